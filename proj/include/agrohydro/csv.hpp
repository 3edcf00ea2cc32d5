#pragma once

// Minimal CSV helpers for the run artifacts.  Values are written with
// enough digits to round-trip doubles.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace agrohydro {

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_.precision(17);
  }

  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
      out_ << (i ? "," : "") << names[i];
    out_ << '\n';
  }

  template <typename Range>
  void row(const Range& values) {
    bool first = true;
    for (const auto& v : values) {
      if (!first) out_ << ',';
      out_ << v;
      first = false;
    }
    out_ << '\n';
  }

  std::ostream& stream() { return out_; }

 private:
  std::ofstream out_;
};

/// Reads a numeric CSV (optional non-numeric header row is skipped).
inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw std::runtime_error("non-numeric cell in " + path.string());
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace agrohydro
