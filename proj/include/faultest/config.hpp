#pragma once

#include <string>

#include <json.hpp>

namespace faultest {

/// Reads a TOML or JSON document, chosen by file extension (.toml, .json),
/// and returns it as JSON. Throws ConfigError on parse failures.
nlohmann::json load_config_file(const std::string& path);
nlohmann::json parse_toml(const std::string& text, const std::string& source = "<string>");

}  // namespace faultest
