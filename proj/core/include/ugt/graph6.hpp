#pragma once

#include <string>
#include <vector>

#include "ugt/graph.hpp"

namespace ugt {

/// Decode one graph6 string (short form n <= 62 plus the 3-byte long form).
Graph graph6_decode(const std::string& line);
std::string graph6_encode(const Graph& g);

struct GraphCorpus {
    std::string name;
    std::vector<Graph> graphs;
};

/// One graph6 string per line; '>>graph6<<' headers and blank lines skipped.
GraphCorpus load_graph6_file(const std::string& path);
void save_graph6_file(const std::string& path, const GraphCorpus& corpus);

} // namespace ugt
