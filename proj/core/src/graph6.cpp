#include "ugt/graph6.hpp"

#include <sstream>

namespace ugt {

namespace {
constexpr int kLo = 63;   // '?'
constexpr int kHi = 126;  // '~'
} // namespace

Graph graph6_decode(const std::string& line) {
    std::size_t pos = 0;
    auto byte = [&](std::size_t i) -> int {
        if (i >= line.size()) throw DataError("graph6: truncated string");
        int c = static_cast<unsigned char>(line[i]);
        if (c < kLo || c > kHi) throw DataError("graph6: invalid byte");
        return c - kLo;
    };

    std::size_t n = 0;
    if (line.empty()) throw DataError("graph6: empty string");
    if (static_cast<unsigned char>(line[0]) == kHi) {
        if (line.size() >= 2 && static_cast<unsigned char>(line[1]) == kHi)
            throw DataError("graph6: 8-byte order form not supported");
        n = (std::size_t(byte(1)) << 12) | (std::size_t(byte(2)) << 6) | std::size_t(byte(3));
        pos = 4;
    } else {
        n = static_cast<std::size_t>(byte(0));
        pos = 1;
    }

    std::vector<std::pair<NodeId, NodeId>> edges;
    std::size_t bit = 0;
    int cur = 0;
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (bit == 0) {
                cur = byte(pos++);
                bit = 6;
            }
            if (cur & (1 << (bit - 1)))
                edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
            --bit;
        }
    }
    if (pos != line.size()) throw DataError("graph6: trailing bytes");
    return Graph(static_cast<NodeId>(n), std::move(edges));
}

std::string graph6_encode(const Graph& g) {
    std::size_t n = g.n_nodes();
    std::string out;
    if (n <= 62) {
        out.push_back(static_cast<char>(kLo + n));
    } else if (n <= 258047) {
        out.push_back(static_cast<char>(kHi));
        out.push_back(static_cast<char>(kLo + ((n >> 12) & 0x3f)));
        out.push_back(static_cast<char>(kLo + ((n >> 6) & 0x3f)));
        out.push_back(static_cast<char>(kLo + (n & 0x3f)));
    } else {
        throw DataError("graph6_encode: graph too large");
    }
    int acc = 0, bits = 0;
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            acc = (acc << 1) | (g.has_edge(static_cast<NodeId>(i), static_cast<NodeId>(j)) ? 1 : 0);
            if (++bits == 6) {
                out.push_back(static_cast<char>(kLo + acc));
                acc = 0;
                bits = 0;
            }
        }
    }
    if (bits > 0) {
        acc <<= (6 - bits);
        out.push_back(static_cast<char>(kLo + acc));
    }
    return out;
}

GraphCorpus load_graph6_file(const std::string& path) {
    std::istringstream in(read_text_file(path));
    GraphCorpus corpus;
    corpus.name = path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind(">>", 0) == 0) continue;
        try {
            corpus.graphs.push_back(graph6_decode(line));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (corpus.graphs.empty()) throw DataError(path + ": no graphs");
    return corpus;
}

void save_graph6_file(const std::string& path, const GraphCorpus& corpus) {
    std::string out;
    for (const auto& g : corpus.graphs) {
        out += graph6_encode(g);
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

} // namespace ugt
