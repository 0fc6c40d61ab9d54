#include <algorithm>
#include <ostream>

#include "json.hpp"

#include "tbstream/sparql/query.hpp"

namespace tbstream::sparql {

std::optional<OutputFormat> output_format_from_string(std::string_view name) {
  if (name == "table") return OutputFormat::Table;
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  return std::nullopt;
}

std::string display_term(const rdf::Term& t) {
  if (t.is_blank()) return "_:" + t.value;
  if (t.is_literal()) return t.value;
  const std::string_view ns = rdf::kDefaultNamespace;
  if (t.value.size() > ns.size() && t.value.compare(0, ns.size(), ns) == 0) {
    return "ex:" + t.value.substr(ns.size());
  }
  return "<" + t.value + ">";
}

namespace {

std::string csv_cell(const rdf::Term& t) {
  std::string v = t.is_blank() ? "_:" + t.value : t.value;
  if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json json_cell(const rdf::Term& t) {
  nlohmann::json j;
  j["value"] = t.value;
  if (t.is_iri()) {
    j["type"] = "uri";
  } else if (t.is_blank()) {
    j["type"] = "bnode";
  } else {
    j["type"] = "literal";
    if (!t.datatype.empty()) j["datatype"] = t.datatype;
    if (!t.lang.empty()) j["xml:lang"] = t.lang;
  }
  return j;
}

void write_table(std::ostream& out, const ResultTable& table) {
  std::vector<std::size_t> width;
  for (const auto& h : table.header) width.push_back(h.size() + 1);
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : table.rows) {
    std::vector<std::string> line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line.push_back(display_term(row[i]));
      width[i] = std::max(width[i], line.back().size());
    }
    cells.push_back(std::move(line));
  }
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      out << (i ? " | " : "") << line[i];
      if (i + 1 < line.size()) out << std::string(width[i] - line[i].size(), ' ');
    }
    out << '\n';
  };
  std::vector<std::string> head;
  for (const auto& h : table.header) head.push_back("?" + h);
  emit(head);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + (width.empty() ? 0 : 3 * (width.size() - 1)), '-') << '\n';
  for (const auto& line : cells) emit(line);
  out << "(" << table.rows.size() << (table.rows.size() == 1 ? " row)" : " rows)") << '\n';
}

}  // namespace

void write_result(std::ostream& out, const ResultTable& table, OutputFormat format) {
  switch (format) {
    case OutputFormat::Table:
      write_table(out, table);
      break;
    case OutputFormat::Csv:
      for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
      out << '\n';
      for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
        out << '\n';
      }
      break;
    case OutputFormat::Json: {
      nlohmann::json bindings = nlohmann::json::array();
      for (const auto& row : table.rows) {
        nlohmann::json b = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i) b[table.header[i]] = json_cell(row[i]);
        bindings.push_back(std::move(b));
      }
      nlohmann::json doc = {{"head", {{"vars", table.header}}}, {"results", {{"bindings", bindings}}}};
      out << doc.dump(2) << '\n';
      break;
    }
  }
}

}  // namespace tbstream::sparql
