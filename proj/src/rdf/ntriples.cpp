#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tbstream/rdf/ntriples.hpp"

namespace tbstream::rdf {

NTriplesError::NTriplesError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

void escape_into(std::string& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t lineno) : s_(line), lineno_(lineno) {}

  Triple parse() {
    Triple t;
    t.subject = term();
    if (t.subject.is_literal()) fail("literal subject");
    t.predicate = term();
    if (!t.predicate.is_iri()) fail("predicate must be an IRI");
    t.object = term();
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != '.') fail("expected '.'");
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("trailing characters after '.'");
    try {
      validate(t);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw NTriplesError(lineno_, what); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  std::string iri_body() {
    ++pos_;  // '<'
    auto end = s_.find('>', pos_);
    if (end == std::string_view::npos) fail("unterminated IRI");
    std::string v(s_.substr(pos_, end - pos_));
    if (v.find_first_of(" \"<") != std::string::npos) fail("invalid character in IRI");
    pos_ = end + 1;
    return v;
  }

  std::uint32_t hex(std::size_t n) {
    if (pos_ + n > s_.size()) fail("truncated unicode escape");
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      char c = s_[pos_++];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= c - '0';
      else if (c >= 'a' && c <= 'f') v |= c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') v |= c - 'A' + 10;
      else fail("bad hex digit in escape");
    }
    return v;
  }

  Term term() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of line");
    char c = s_[pos_];
    if (c == '<') return Term::iri(iri_body());
    if (c == '_') {
      if (pos_ + 1 >= s_.size() || s_[pos_ + 1] != ':') fail("malformed blank node");
      pos_ += 2;
      auto start = pos_;
      while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
      if (pos_ == start) fail("empty blank node label");
      return Term::blank(std::string(s_.substr(start, pos_ - start)));
    }
    if (c != '"') fail(std::string("unexpected character '") + c + "'");
    ++pos_;
    std::string value;
    for (;;) {
      if (pos_ >= s_.size()) fail("unterminated literal");
      char d = s_[pos_++];
      if (d == '"') break;
      if (d != '\\') {
        value += d;
        continue;
      }
      if (pos_ >= s_.size()) fail("dangling escape");
      char e = s_[pos_++];
      switch (e) {
        case 'n': value += '\n'; break;
        case 'r': value += '\r'; break;
        case 't': value += '\t'; break;
        case 'b': value += '\b'; break;
        case 'f': value += '\f'; break;
        case '"': value += '"'; break;
        case '\'': value += '\''; break;
        case '\\': value += '\\'; break;
        case 'u': append_utf8(value, hex(4)); break;
        case 'U': append_utf8(value, hex(8)); break;
        default: fail(std::string("unknown escape \\") + e);
      }
    }
    if (pos_ + 1 < s_.size() && s_[pos_] == '^' && s_[pos_ + 1] == '^') {
      pos_ += 2;
      if (pos_ >= s_.size() || s_[pos_] != '<') fail("expected datatype IRI");
      return Term::typed(std::move(value), iri_body());
    }
    if (pos_ < s_.size() && s_[pos_] == '@') {
      auto start = ++pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
      if (pos_ == start) fail("empty language tag");
      return Term::lang_literal(std::move(value), std::string(s_.substr(start, pos_ - start)));
    }
    return Term::literal(std::move(value));
  }

  std::string_view s_;
  std::size_t lineno_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format_term(const Term& t) {
  std::string out;
  switch (t.kind) {
    case TermKind::Iri:
      out = "<" + t.value + ">";
      break;
    case TermKind::Blank:
      out = "_:" + t.value;
      break;
    case TermKind::Literal:
      out += '"';
      escape_into(out, t.value);
      out += '"';
      if (!t.datatype.empty()) out += "^^<" + t.datatype + ">";
      else if (!t.lang.empty()) out += "@" + t.lang;
      break;
  }
  return out;
}

void serialize_ntriples(const Graph& g, std::ostream& out) {
  auto triples = g.triples();
  std::sort(triples.begin(), triples.end());
  for (const auto& t : triples) {
    out << format_term(t.subject) << ' ' << format_term(t.predicate) << ' '
        << format_term(t.object) << " .\n";
  }
}

std::string serialize_ntriples(const Graph& g) {
  std::ostringstream out;
  serialize_ntriples(g, out);
  return out.str();
}

std::size_t parse_ntriples(std::istream& in, Graph& g) {
  std::string line;
  std::size_t lineno = 0, count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    g.insert(LineParser(line, lineno).parse());
    ++count;
  }
  return count;
}

Graph parse_ntriples(std::string_view text) {
  std::istringstream in{std::string(text)};
  Graph g;
  parse_ntriples(in, g);
  return g;
}

Graph load_ntriples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Graph g;
  parse_ntriples(in, g);
  return g;
}

void save_ntriples_file(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  serialize_ntriples(g, out);
}

}  // namespace tbstream::rdf
