#include "sdore/errors.hpp"
#include "sdore/experiments.hpp"
#include "sdore/rng.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sdore::experiments {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const std::filesystem::path& path, std::size_t row,
                    std::size_t col, const std::string& name) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(path.string() + ": row " + std::to_string(row) + ", column " + std::to_string(col) +
                     " (" + name + "): non-numeric value '" + cell + "'");
  }
  return v;
}

}  // namespace

FixedData load_csv_dataset(const std::filesystem::path& path, const std::string& target_column,
                           int n_noise_features, std::uint64_t noise_seed) {
  if (n_noise_features < 0) throw ContractViolation("n_noise_features must be nonnegative");
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw ParseError(path.string() + ": empty file (no header row)");
  const auto header = split(line);
  std::size_t target = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target_column) target = c;
  }
  if (target == header.size()) {
    throw ParseError(path.string() + ": row 1: target column '" + target_column + "' not found in header");
  }

  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_number(cells[c], path, row, c + 1, header[c]);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows after the header");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto base = static_cast<Eigen::Index>(header.size() - 1);
  FixedData out;
  out.data.X.resize(n, base + n_noise_features);
  out.data.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target) {
        out.data.Y(i) = rows[i][c];
      } else {
        out.data.X(i, k++) = rows[i][c];
      }
    }
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target) out.feature_names.push_back(header[c]);
  }
  for (Eigen::Index k = 0; k < base; ++k) {
    auto col = out.data.X.col(k);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    if (sd == 0.0) {
      throw ParseError(path.string() + ": column '" + out.feature_names[k] + "' is constant and cannot be standardized");
    }
    col /= sd;
  }
  auto rng = stream_rng(noise_seed, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < n_noise_features; ++j) out.data.X(i, base + j) = u(rng);
  }
  for (int j = 0; j < n_noise_features; ++j) out.feature_names.push_back("noise" + std::to_string(j + 1));
  return out;
}

}  // namespace sdore::experiments
