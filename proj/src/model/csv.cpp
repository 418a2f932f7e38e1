#include "csv.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gridest::model {

static std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "missing file: " + path);

  CsvFile f;
  f.path = path;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (first) {
      f.header = line;
      first = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    f.rows.push_back(std::move(cells));
  }
  if (first) throw Error(Errc::bad_header, "empty file: " + path);
  return f;
}

static std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const CsvFile& f, std::size_t row, std::size_t col) {
  const std::string cell = trimmed(f.rows[row][col]);
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (cell.empty() || end != begin + cell.size()) {
    std::ostringstream os;
    os << f.path << ": unparseable cell '" << f.rows[row][col] << "' at row " << (row + 2)
       << ", column " << (col + 1);
    throw Error(Errc::unparseable_cell, os.str());
  }
  return v;
}

int parse_int_cell(const CsvFile& f, std::size_t row, std::size_t col) {
  double v = parse_cell(f, row, col);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    std::ostringstream os;
    os << f.path << ": expected integer cell '" << f.rows[row][col] << "' at row " << (row + 2)
       << ", column " << (col + 1);
    throw Error(Errc::unparseable_cell, os.str());
  }
  return i;
}

void require_header(const CsvFile& f, const std::string& expected, bool loose_trailing) {
  std::string h = f.header;
  if (loose_trailing) {
    while (!h.empty() && h.back() == ',') h.pop_back();
    std::string e = expected;
    while (!e.empty() && e.back() == ',') e.pop_back();
    if (h == e) return;
  } else if (h == expected) {
    return;
  }
  throw Error(Errc::bad_header,
              f.path + ": bad header\n  expected: " + expected + "\n  found:    " + f.header);
}

void require_cells(const CsvFile& f, std::size_t row, std::size_t n) {
  if (f.rows[row].size() != n) {
    std::ostringstream os;
    os << f.path << ": row " << (row + 2) << " has " << f.rows[row].size() << " cells, expected "
       << n;
    throw Error(Errc::unparseable_cell, os.str());
  }
}

}  // namespace gridest::model
