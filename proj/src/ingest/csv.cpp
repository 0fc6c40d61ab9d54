#include <algorithm>
#include <iterator>
#include <set>
#include <sstream>

#include "tbstream/ingest/clinical_ingest.hpp"

namespace tbstream::ingest {

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

struct CsvRow {
  std::vector<std::string> cells;
  std::size_t line = 0;
};

// Splits text into rows honoring quoted fields (which may span lines).
std::vector<CsvRow> tokenize(std::string_view text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string cell;
  bool in_quotes = false;
  bool row_has_content = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_row = [&] {
    if (row_has_content || !row.cells.empty() || !cell.empty()) {
      row.cells.push_back(cell);
      rows.push_back(std::move(row));
    }
    row = CsvRow{};
    cell.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.cells.push_back(cell);
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row.line = line;
        break;
      default:
        cell += c;
        row_has_content = true;
    }
  }
  end_row();
  return rows;
}

}  // namespace

std::vector<std::string> schema_columns() {
  std::vector<std::string> cols = {"no", "id", "name", "gender", "date", "time"};
  for (auto s : kSymptomColumns) cols.emplace_back(s);
  return cols;
}

HeaderError::HeaderError(std::vector<std::string> missing)
    : std::runtime_error("CSV header is missing required columns: " + join(missing, ", ")),
      missing_(std::move(missing)) {}

std::vector<std::string> split_csv_line(std::string_view line) {
  auto rows = tokenize(line);
  if (rows.empty()) return {};
  return rows.front().cells;
}

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvParseResult parse_csv_text(std::string_view text, const std::vector<std::string>& schema) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  auto rows = tokenize(text);
  CsvParseResult result;
  if (rows.empty()) throw HeaderError(schema);

  for (auto& h : rows.front().cells) result.header.push_back(trim(h));
  std::set<std::string> present(result.header.begin(), result.header.end());
  std::vector<std::string> missing;
  for (const auto& col : schema) {
    if (!present.count(col)) missing.push_back(col);
  }
  if (!missing.empty()) throw HeaderError(std::move(missing));

  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto& row = rows[r];
    if (row.cells.size() != result.header.size()) {
      result.rejections.push_back(
          {row.line, RejectReason::MissingCritical,
           "ragged row: expected " + std::to_string(result.header.size()) + " cells, got " +
               std::to_string(row.cells.size())});
      continue;
    }
    RawRecord raw;
    raw.source_line = row.line;
    for (std::size_t c = 0; c < row.cells.size(); ++c) {
      raw.column_values[result.header[c]] = trim(row.cells[c]);
    }
    result.records.push_back(std::move(raw));
  }
  return result;
}

CsvParseResult parse_csv(std::istream& input, const std::vector<std::string>& schema) {
  std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
  return parse_csv_text(text, schema);
}

}  // namespace tbstream::ingest
