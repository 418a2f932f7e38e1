#pragma once

#include <string>
#include <vector>

#include "gridest/common.hpp"

namespace gridest::model {

struct CsvFile {
  std::string path;
  std::string header;                          // first line, CR stripped
  std::vector<std::vector<std::string>> rows;  // comma-split data cells
};

CsvFile read_csv(const std::string& path);

// Parses a numeric cell; throws unparseable_cell naming file/row/column.
double parse_cell(const CsvFile& f, std::size_t row, std::size_t col);
// Same, requiring an integral value.
int parse_int_cell(const CsvFile& f, std::size_t row, std::size_t col);

// Throws bad_header unless the header matches exactly (trailing commas are
// tolerated for key/value style tables when `loose_trailing` is set).
void require_header(const CsvFile& f, const std::string& expected, bool loose_trailing = false);

void require_cells(const CsvFile& f, std::size_t row, std::size_t n);

}  // namespace gridest::model
