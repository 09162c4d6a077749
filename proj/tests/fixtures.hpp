#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fixtures {

/// Header-keyed CSV table; every cell kept as text.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("no column " + name);
  }
  double num(std::size_t r, const std::string& name) const { return std::stod(rows[r][column(name)]); }
  const std::string& str(std::size_t r, const std::string& name) const { return rows[r][column(name)]; }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline Table read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  Table t;
  std::string line;
  std::getline(in, line);
  t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

inline std::filesystem::path data(const std::string& name) {
  return std::filesystem::path(STACKWAVE_TEST_DATA) / name;
}

/// quantity -> value for two-column tables, with an optional leading key column.
inline std::map<std::string, double> lookup(const Table& t, const std::string& key = {},
                                            const std::string& match = {}) {
  std::map<std::string, double> m;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (key.empty() || t.str(r, key) == match) m[t.str(r, "quantity")] = t.num(r, "value");
  return m;
}

}  // namespace fixtures
