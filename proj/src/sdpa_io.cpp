#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "faultest/errors.hpp"
#include "faultest/sdp.hpp"

namespace faultest {

void write_sdpa(const SdpProblem& problem, std::ostream& os) {
  os << "\"faultest SDP: minimize c'x s.t. sum_i x_i F_i - F_0 >= 0\n";
  os << problem.num_vars << "\n" << problem.blocks.size() << "\n";
  for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
    os << (k ? " " : "") << problem.blocks[k].dim();
  }
  os << "\n";
  os << std::setprecision(17);
  for (int i = 0; i < problem.num_vars; ++i) os << (i ? " " : "") << problem.c(i);
  os << "\n";
  const auto emit = [&](int mat, int blk, const Mat& M, double sign) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = i; j < M.cols(); ++j) {
        const double v = sign * 0.5 * (M(i, j) + M(j, i));
        if (v != 0.0) os << mat << " " << blk << " " << i + 1 << " " << j + 1 << " " << v << "\n";
      }
    }
  };
  for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
    emit(0, static_cast<int>(k) + 1, problem.blocks[k].F0, -1.0);
  }
  for (int i = 0; i < problem.num_vars; ++i) {
    for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
      const auto& F = problem.blocks[k].F;
      if (static_cast<int>(F.size()) > i && F[i].size() > 0) emit(i + 1, static_cast<int>(k) + 1, F[i], 1.0);
    }
  }
}

namespace {

std::string strip_punctuation(std::string line) {
  if (const auto cut = line.find_first_of("=\"*"); cut != std::string::npos) line.erase(cut);
  for (char& ch : line) {
    if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
  }
  return line;
}

}  // namespace

SdpProblem read_sdpa(std::istream& is) {
  std::string line;
  std::stringstream body;
  bool header_done = false;
  while (std::getline(is, line)) {
    if (!header_done && (line.empty() || line[0] == '"' || line[0] == '*')) continue;
    header_done = true;
    body << strip_punctuation(line) << "\n";
  }
  SdpProblem p;
  int nblocks = 0;
  if (!(body >> p.num_vars >> nblocks) || p.num_vars < 0 || nblocks < 0) {
    throw Error("SDPA: malformed header");
  }
  std::vector<int> sizes(static_cast<std::size_t>(nblocks));
  for (auto& s : sizes) {
    if (!(body >> s)) throw Error("SDPA: malformed block structure");
    s = std::abs(s);
  }
  p.c.resize(p.num_vars);
  for (int i = 0; i < p.num_vars; ++i) {
    if (!(body >> p.c(i))) throw Error("SDPA: objective vector too short");
  }
  p.blocks.resize(static_cast<std::size_t>(nblocks));
  for (int k = 0; k < nblocks; ++k) {
    auto& b = p.blocks[k];
    b.label = "block" + std::to_string(k + 1);
    b.F0 = Mat::Zero(sizes[k], sizes[k]);
    b.F.assign(static_cast<std::size_t>(p.num_vars), Mat::Zero(sizes[k], sizes[k]));
  }
  int mat = 0, blk = 0, i = 0, j = 0;
  double v = 0.0;
  while (body >> mat >> blk >> i >> j >> v) {
    if (mat < 0 || mat > p.num_vars || blk < 1 || blk > nblocks) throw Error("SDPA: entry index out of range");
    const int n = sizes[blk - 1];
    if (i < 1 || j < 1 || i > n || j > n) throw Error("SDPA: entry position out of range");
    Mat& M = mat == 0 ? p.blocks[blk - 1].F0 : p.blocks[blk - 1].F[mat - 1];
    const double val = mat == 0 ? -v : v;
    M(i - 1, j - 1) = val;
    M(j - 1, i - 1) = val;
  }
  if (!body.eof()) throw Error("SDPA: trailing garbage in entry list");
  return p;
}

void write_sdpa_file(const SdpProblem& problem, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_sdpa(problem, os);
}

SdpProblem read_sdpa_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_sdpa(is);
}

}  // namespace faultest
