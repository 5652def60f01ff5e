// SPDX-License-Identifier: Apache-2.0
#include "rpgan/io/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "rpgan/io/errors.hpp"

namespace rpgan::io {

std::string format_number(double v) {
  char buf[40];
  for (int precision : {9, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (precision == 17 || std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw std::invalid_argument("CSV header is empty");
  rows_ = 0;
  add_row(header);
  rows_ = 0;
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("CSV cell '" + cells[i] + "' contains a separator");
    }
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  ++rows_;
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text_atomic(path, text_); }

}  // namespace rpgan::io
