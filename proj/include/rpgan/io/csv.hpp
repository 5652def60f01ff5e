// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rpgan::io {

/// Shortest round-trippable rendering ("%.17g" trimmed to "%.9g" when exact).
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  /// Cells must not contain commas or newlines.
  void add_row(const std::vector<std::string>& cells);
  std::size_t rows() const { return rows_; }
  std::string str() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

}  // namespace rpgan::io
