#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mvreem {

/// A parsed comma-separated file: header plus rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position of `name`; throws DataError when absent.
  std::size_t column(std::string_view name) const;
};

/// Reads a CSV with a mandatory header row. Supports double-quoted cells.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::istream& in);

/// Quotes a cell when it contains separators or quotes.
std::string csv_escape(std::string_view cell);

/// Formats a double with round-trip precision.
std::string format_double(double v);

/// Cells that mark a missing value: empty or "NA".
bool is_missing_cell(std::string_view cell);

/// Parses a full-cell floating point number; false on trailing garbage.
bool parse_double(std::string_view cell, double& out);

}  // namespace mvreem
