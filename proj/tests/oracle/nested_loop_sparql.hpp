#pragma once

#include <vector>

#include "tbstream/rdf/graph.hpp"
#include "tbstream/sparql/query.hpp"

namespace oracle {

/// Brute-force evaluation: patterns in written order, each matched by scanning
/// every triple; filters, grouping and projection applied to plain string
/// maps. Rows come back unordered unless the query has ORDER BY, in which case
/// only the ORDER BY keys determine the order (ties keep scan order).
std::vector<std::vector<tbstream::rdf::Term>> nested_loop_select(const tbstream::sparql::QueryAst& q,
                                                                 const std::vector<tbstream::rdf::Triple>& triples);

}  // namespace oracle
