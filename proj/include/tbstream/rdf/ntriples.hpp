#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tbstream/rdf/graph.hpp"

namespace tbstream::rdf {

class NTriplesError : public std::runtime_error {
 public:
  NTriplesError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string format_term(const Term& t);

/// Writes one triple per line in a canonical (sorted) order.
void serialize_ntriples(const Graph& g, std::ostream& out);
std::string serialize_ntriples(const Graph& g);

/// Parses line-oriented N-Triples into `g`; returns the number of lines
/// holding a triple. Blank lines and `#` comments are skipped.
std::size_t parse_ntriples(std::istream& in, Graph& g);
Graph parse_ntriples(std::string_view text);

Graph load_ntriples_file(const std::string& path);
void save_ntriples_file(const Graph& g, const std::string& path);

}  // namespace tbstream::rdf
