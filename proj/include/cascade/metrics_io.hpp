#pragma once

#include <string>
#include <vector>

namespace cascade {

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 if absent
  double at(std::size_t row, const std::string& name) const;
};

// Full-precision CSV; identical tables give identical bytes.
std::string to_csv(const MetricsTable& t);

// Throws SchemaError if any of `required` is missing or a row is ragged.
MetricsTable parse_csv(const std::string& text, const std::vector<std::string>& required = {});

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace cascade
