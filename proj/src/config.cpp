#include "faultest/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include "faultest/errors.hpp"

namespace faultest {

namespace {

nlohmann::json to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = to_json(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& value : *a) out.push_back(to_json(value));
    return out;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  std::ostringstream os;
  if (const auto* v = node.as_date()) os << v->get();
  if (const auto* v = node.as_time()) os << v->get();
  if (const auto* v = node.as_date_time()) os << v->get();
  return os.str();
}

std::string extension_of(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

}  // namespace

nlohmann::json parse_toml(const std::string& text, const std::string& source) {
  try {
    const toml::table tbl = toml::parse(text, source);
    return to_json(tbl);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string ext = extension_of(path);
  if (ext == ".toml") return parse_toml(buf.str(), path);
  if (ext == ".json") {
    try {
      return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  throw ConfigError(path + ": unknown config extension '" + ext + "' (expected .toml or .json)");
}

}  // namespace faultest
