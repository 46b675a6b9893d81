#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace scm {

/// Shortest decimal that round-trips; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

/// RFC 4180 field quoting.
std::string csv_escape(std::string_view field);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void write_row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

/// Parses a numeric CSV file with a header row. Quoted fields are accepted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_numeric_csv(std::istream& in);

}  // namespace scm
