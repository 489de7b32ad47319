#pragma once

#include <string>
#include <vector>

#include "sdebridge/core.hpp"

namespace sdebridge {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

// Writes via a temporary file in the same directory plus rename, so readers
// never observe a partial file.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

// Numeric CSV with a single header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text, const std::string& origin = "csv");
CsvTable read_csv(const std::string& path);
void write_csv_atomic(const std::string& path, const CsvTable& table);

// Observations use the schema t,x1,...,xd.
CsvTable observations_to_table(const Observations& obs);
Observations table_to_observations(const CsvTable& table, const std::string& origin = "csv");

}  // namespace sdebridge
