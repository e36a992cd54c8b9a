#include "zodmc/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace zodmc {

std::string samples_csv(const Matrix& points) {
  std::string out;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    if (j) out += ',';
    out += 'x' + std::to_string(j);
  }
  out += '\n';
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j) out += ',';
      out += format_double(points(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& points) {
  write_text(path, samples_csv(points));
}

Matrix read_samples_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ConfigError(path.string() + ": malformed value on row " + std::to_string(rows + 1));
      values.push_back(v);
      p = next;
      if (j + 1 < cols) {
        if (p == end || *p != ',') throw ConfigError(path.string() + ": short row " + std::to_string(rows + 1));
        ++p;
      }
    }
    ++rows;
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return m;
}

}  // namespace zodmc
