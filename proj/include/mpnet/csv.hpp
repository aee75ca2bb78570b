#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mpnet::csv {

using Row = std::vector<std::string>;

/// Parses RFC-4180 text: comma separated, double-quote quoting with "" as
/// the escaped quote, CRLF or LF line ends. A trailing newline does not
/// produce an empty record. Throws ParseError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::filesystem::path &path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream &os, const Row &row);

} // namespace mpnet::csv
