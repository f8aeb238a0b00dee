#include "cascade/metrics_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cascade/error.hpp"

namespace cascade {

int MetricsTable::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

double MetricsTable::at(std::size_t row, const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw SchemaError("no column " + name);
  return rows.at(row).at(c);
}

std::string to_csv(const MetricsTable& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  char buf[64];
  for (const auto& r : t.rows) {
    if (r.size() != t.columns.size()) throw SchemaError("to_csv: ragged row");
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r[i]);
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

MetricsTable parse_csv(const std::string& text, const std::vector<std::string>& required) {
  MetricsTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("parse_csv: empty input");
  {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) t.columns.push_back(cell);
  }
  for (const auto& r : required)
    if (t.column(r) < 0) throw SchemaError("metrics schema: missing column " + r);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        // strtod accepts nan/inf spellings that stod rejects on some platforms
        row.push_back(std::strtod(cell.c_str(), nullptr));
      }
    }
    if (row.size() != t.columns.size()) throw SchemaError("metrics schema: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << text;
  if (!os) throw Error("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace cascade
