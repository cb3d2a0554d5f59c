#pragma once

#include "kgml/tensor.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <utility>
#include <vector>

namespace kgml::kb {

/// Undirected edge over entity ids, stored with lo <= hi.
struct Edge {
    int a, b;
    Edge(int u, int v) : a(std::min(u, v)), b(std::max(u, v)) {}
    friend bool operator==(const Edge& x, const Edge& y) = default;
    friend auto operator<=>(const Edge& x, const Edge& y) = default;
};

enum class Provenance { base, knn };

/// Shared knowledge base: entity vocabulary, typed triples, and one embedding
/// row per entity. Entity ids are dense indices into `entities`.
struct KnowledgeBase {
    std::vector<std::string> entities;          // id -> surface name
    std::vector<std::string> relations;         // relation id -> name
    std::vector<std::array<int, 3>> triples;    // (head, relation, tail)
    Mat embeddings;                             // |entities| x D_e

    int entity_id(const std::string& name) const;  // -1 when absent
    int dim() const { return static_cast<int>(embeddings.cols()); }
    int size() const { return static_cast<int>(entities.size()); }

private:
    friend KnowledgeBase load_kb(const std::string&, const std::string&);
    std::vector<std::pair<std::string, int>> name_index_;  // sorted by name
};

/// Union of KB edges and k-NN edges, with provenance, plus sorted adjacency
/// lists. Immutable after construction; extraction is a pure read.
struct DenseGraph {
    const KnowledgeBase* kb = nullptr;
    std::vector<Edge> edges;                  // sorted, unique
    std::vector<Provenance> provenance;       // parallel to edges
    std::vector<std::vector<int>> adjacency;  // neighbor ids, ascending

    bool has_edge(int u, int v) const;
};

/// Per-sentence extracted subgraph. Nodes are KB entity ids in ascending
/// order; `features` holds the corresponding KB embedding rows (h_v^0).
struct SentenceGraph {
    std::vector<int> nodes;     // ascending entity ids
    std::vector<Edge> edges;    // sorted, endpoints in `nodes`
    std::vector<int> targets;   // ascending, subset of nodes
    Mat features;               // |nodes| x D_e

    int node_pos(int entity_id) const;  // index into nodes, -1 when absent
};

constexpr int kUnreachable = -1;

/// Hop-count distances between the target entities plus one canonical
/// shortest path per reachable pair (lexicographically smallest node
/// sequence starting from the smaller endpoint).
struct DistanceMatrix {
    std::vector<int> targets;                         // ascending entity ids
    std::vector<std::vector<int>> dist;               // |t| x |t|, kUnreachable sentinel
    std::vector<std::vector<std::vector<int>>> path;  // canonical paths, empty if unreachable
};

/// Loads entities + embeddings (the entity universe) and triples.
/// Triples referencing unknown entities fail with the offending line number.
KnowledgeBase load_kb(const std::string& triples_path, const std::string& embeddings_path);

/// Exact k-NN edges by Euclidean distance on entity embeddings, symmetrized
/// (an edge is kept if either endpoint selects the other). Distance ties
/// break toward the lower entity id.
std::vector<Edge> build_knn_graph(const KnowledgeBase& kb, int k);

/// G = G_base U G_knn. Base provenance wins on overlap.
DenseGraph densify(const KnowledgeBase& kb, const std::vector<Edge>& knn_edges);

DistanceMatrix pairwise_shortest(const DenseGraph& dense, const std::vector<int>& targets);

/// Alg: BFS distance matrix over targets -> Kruskal MST on the metric
/// closure (lexicographic tie-break) -> union of canonical shortest paths
/// along MST edges. Unreachable targets stay as isolated nodes.
SentenceGraph extract_sentence_kg(const DenseGraph& dense, const std::vector<int>& targets);

}  // namespace kgml::kb
