// SPDX-License-Identifier: Apache-2.0
//
// Minimal delimited-text reader/writer. Quotes are supported on read;
// values we emit never need quoting (ids and numbers).

#pragma once

#include <string>
#include <vector>

namespace sloth::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

Table read_file(const std::string& path, char delimiter = ',');
Table read_string(const std::string& text, char delimiter = ',');

void write_file(const std::string& path, const Table& table,
                char delimiter = ',');

/// Shortest representation that parses back to the identical double.
std::string format_double(double value);

}  // namespace sloth::csv
