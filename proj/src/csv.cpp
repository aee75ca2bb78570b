#include "mpnet/csv.hpp"

#include "mpnet/errors.hpp"

#include <fstream>
#include <sstream>

namespace mpnet::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t quote_line = 0;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n')
          ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
    case '"':
      if (!field_started && field.empty()) {
        in_quotes = true;
        field_started = true;
        quote_line = line;
      } else {
        field.push_back(c);
      }
      break;
    case ',':
      end_field();
      break;
    case '\r':
      if (i + 1 < text.size() && text[i + 1] == '\n')
        ++i;
      [[fallthrough]];
    case '\n':
      end_row();
      ++line;
      break;
    default:
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes)
    throw ParseError("unterminated quoted field starting on line " +
                         std::to_string(quote_line),
                     quote_line, row.size() + 1);
  if (field_started || !field.empty() || !row.empty())
    end_row();
  return rows;
}

std::vector<Row> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw SchemaError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  // UTF-8 byte order mark
  if (text.rfind("\xEF\xBB\xBF", 0) == 0)
    text.erase(0, 3);
  return parse(text);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"')
      out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream &os, const Row &row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i)
      os << ',';
    os << escape(row[i]);
  }
  os << '\n';
}

} // namespace mpnet::csv
