#pragma once

// Minimal RFC 4180 reader/writer used by the tabular exports.

#include <string>
#include <string_view>
#include <vector>

namespace visbench::csv {

using Row = std::vector<std::string>;

std::string format_row(const Row& row);

/// Parses a whole document. Quoted fields may contain commas, quotes ("")
/// and newlines. Blank lines are skipped.
std::vector<Row> parse(std::string_view text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view field);

}  // namespace visbench::csv
