#include "kgml/kb.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

namespace kgml::kb {

namespace {

std::vector<int> bfs_distances(const DenseGraph& g, int source) {
    std::vector<int> dist(g.adjacency.size(), kUnreachable);
    std::deque<int> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v : g.adjacency[u]) {
            if (dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

// Lexicographically smallest shortest path from `from`, guided by BFS
// distances measured from `to`: at every hop take the smallest neighbor one
// step closer to the destination.
std::vector<int> canonical_path(const DenseGraph& g, int from, int to,
                                const std::vector<int>& dist_to) {
    std::vector<int> path{from};
    int cur = from;
    while (cur != to) {
        int next = -1;
        for (int v : g.adjacency[cur]) {  // ascending order
            if (dist_to[v] == dist_to[cur] - 1) {
                next = v;
                break;
            }
        }
        path.push_back(next);
        cur = next;
    }
    return path;
}

std::vector<int> sorted_unique(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void validate_targets(const DenseGraph& dense, const std::vector<int>& targets) {
    if (targets.empty()) throw DataError("target entity set is empty");
    for (int t : targets)
        if (t < 0 || t >= static_cast<int>(dense.adjacency.size()))
            throw DataError("target entity id out of range: " + std::to_string(t));
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

}  // namespace

int KnowledgeBase::entity_id(const std::string& name) const {
    auto it = std::lower_bound(name_index_.begin(), name_index_.end(), name,
                               [](const auto& p, const std::string& n) { return p.first < n; });
    if (it == name_index_.end() || it->first != name) return -1;
    return it->second;
}

bool DenseGraph::has_edge(int u, int v) const {
    return std::binary_search(edges.begin(), edges.end(), Edge(u, v));
}

int SentenceGraph::node_pos(int entity_id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), entity_id);
    if (it == nodes.end() || *it != entity_id) return -1;
    return static_cast<int>(it - nodes.begin());
}

KnowledgeBase load_kb(const std::string& triples_path, const std::string& embeddings_path) {
    KnowledgeBase kb;

    std::ifstream emb(embeddings_path);
    if (!emb) throw DataError("cannot open embeddings file: " + embeddings_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(emb, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(embeddings_path + ":" + std::to_string(line_no) +
                            ": expected name<TAB>values");
        kb.entities.push_back(line.substr(0, tab));
        std::istringstream vals(line.substr(tab + 1));
        std::vector<double> row;
        double x;
        while (vals >> x) row.push_back(x);
        if (row.empty())
            throw DataError(embeddings_path + ":" + std::to_string(line_no) + ": empty vector");
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError(embeddings_path + ":" + std::to_string(line_no) +
                            ": dimension mismatch (" + std::to_string(row.size()) + " vs " +
                            std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(embeddings_path + ": no entities");

    kb.embeddings.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            kb.embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

    kb.name_index_.reserve(kb.entities.size());
    for (size_t i = 0; i < kb.entities.size(); ++i)
        kb.name_index_.emplace_back(kb.entities[i], static_cast<int>(i));
    std::sort(kb.name_index_.begin(), kb.name_index_.end());
    for (size_t i = 1; i < kb.name_index_.size(); ++i)
        if (kb.name_index_[i].first == kb.name_index_[i - 1].first)
            throw DataError(embeddings_path + ": duplicate entity name: " + kb.name_index_[i].first);

    std::ifstream tri(triples_path);
    if (!tri) throw DataError("cannot open triples file: " + triples_path);
    std::vector<std::string> rel_names;
    line_no = 0;
    while (std::getline(tri, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream parts(line);
        std::string h, r, t;
        if (!std::getline(parts, h, '\t') || !std::getline(parts, r, '\t') ||
            !std::getline(parts, t, '\t'))
            throw DataError(triples_path + ":" + std::to_string(line_no) +
                            ": expected head<TAB>relation<TAB>tail");
        const int hid = kb.entity_id(h);
        const int tid = kb.entity_id(t);
        if (hid < 0)
            throw DataError(triples_path + ":" + std::to_string(line_no) + ": unknown entity: " + h);
        if (tid < 0)
            throw DataError(triples_path + ":" + std::to_string(line_no) + ": unknown entity: " + t);
        auto rit = std::find(rel_names.begin(), rel_names.end(), r);
        int rid;
        if (rit == rel_names.end()) {
            rid = static_cast<int>(rel_names.size());
            rel_names.push_back(r);
        } else {
            rid = static_cast<int>(rit - rel_names.begin());
        }
        kb.triples.push_back({hid, rid, tid});
    }
    kb.relations = std::move(rel_names);
    return kb;
}

std::vector<Edge> build_knn_graph(const KnowledgeBase& kb, int k) {
    const int n = kb.size();
    if (k <= 0) throw NumericError("build_knn_graph: k must be positive");
    if (k >= n) throw NumericError("build_knn_graph: k = " + std::to_string(k) +
                                   " must be smaller than entity count " + std::to_string(n));
    std::vector<Edge> out;
    std::vector<std::pair<double, int>> cand(static_cast<size_t>(n) - 1);
    for (int i = 0; i < n; ++i) {
        cand.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            cand.emplace_back((kb.embeddings.row(i) - kb.embeddings.row(j)).squaredNorm(), j);
        }
        // ties by lower entity id
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (int s = 0; s < k; ++s) out.emplace_back(i, cand[s].second);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DenseGraph densify(const KnowledgeBase& kb, const std::vector<Edge>& knn_edges) {
    const int n = kb.size();
    auto check = [&](const Edge& e) {
        if (e.a < 0 || e.b >= n)
            throw DataError("densify: edge endpoint out of range: " + std::to_string(e.a) + "-" +
                            std::to_string(e.b));
    };
    std::vector<std::pair<Edge, Provenance>> tagged;
    for (const auto& t : kb.triples) {
        if (t[0] == t[2]) continue;  // self-loops dropped
        Edge e(t[0], t[2]);
        check(e);
        tagged.emplace_back(e, Provenance::base);
    }
    for (const Edge& e : knn_edges) {
        if (e.a == e.b) continue;
        check(e);
        tagged.emplace_back(e, Provenance::knn);
    }
    // base sorts before knn, so unique keeps base provenance on overlap
    std::sort(tagged.begin(), tagged.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first < y.first : x.second < y.second;
    });
    tagged.erase(std::unique(tagged.begin(), tagged.end(),
                             [](const auto& x, const auto& y) { return x.first == y.first; }),
                 tagged.end());

    DenseGraph g;
    g.kb = &kb;
    g.adjacency.resize(static_cast<size_t>(n));
    for (const auto& [e, prov] : tagged) {
        g.edges.push_back(e);
        g.provenance.push_back(prov);
        g.adjacency[e.a].push_back(e.b);
        g.adjacency[e.b].push_back(e.a);
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

DistanceMatrix pairwise_shortest(const DenseGraph& dense, const std::vector<int>& targets_in) {
    validate_targets(dense, targets_in);
    DistanceMatrix out;
    out.targets = sorted_unique(targets_in);
    const int t = static_cast<int>(out.targets.size());

    std::vector<std::vector<int>> dist_from(t);
    for (int i = 0; i < t; ++i) dist_from[i] = bfs_distances(dense, out.targets[i]);

    out.dist.assign(t, std::vector<int>(t, kUnreachable));
    out.path.assign(t, std::vector<std::vector<int>>(t));
    for (int i = 0; i < t; ++i) {
        out.dist[i][i] = 0;
        out.path[i][i] = {out.targets[i]};
        for (int j = i + 1; j < t; ++j) {
            const int d = dist_from[j][out.targets[i]];
            out.dist[i][j] = out.dist[j][i] = d;
            if (d == kUnreachable) continue;
            // walk from the smaller entity id so the sequence is canonical
            out.path[i][j] = canonical_path(dense, out.targets[i], out.targets[j], dist_from[j]);
            out.path[j][i] = {out.path[i][j].rbegin(), out.path[i][j].rend()};
        }
    }
    return out;
}

SentenceGraph extract_sentence_kg(const DenseGraph& dense, const std::vector<int>& targets_in) {
    validate_targets(dense, targets_in);
    DistanceMatrix dm = pairwise_shortest(dense, targets_in);
    const int t = static_cast<int>(dm.targets.size());

    // Kruskal on the metric closure, edges ordered by (distance, i, j).
    struct ClosureEdge {
        int d, i, j;
        auto operator<=>(const ClosureEdge&) const = default;
    };
    std::vector<ClosureEdge> closure;
    for (int i = 0; i < t; ++i)
        for (int j = i + 1; j < t; ++j)
            if (dm.dist[i][j] != kUnreachable) closure.push_back({dm.dist[i][j], i, j});
    std::sort(closure.begin(), closure.end());

    UnionFind uf(t);
    std::vector<int> node_set = dm.targets;  // unreachable targets stay isolated
    std::vector<Edge> edge_set;
    for (const auto& ce : closure) {
        if (!uf.unite(ce.i, ce.j)) continue;
        const auto& path = dm.path[ce.i][ce.j];
        for (size_t s = 0; s < path.size(); ++s) {
            node_set.push_back(path[s]);
            if (s + 1 < path.size()) edge_set.emplace_back(path[s], path[s + 1]);
        }
    }

    SentenceGraph g;
    g.nodes = sorted_unique(std::move(node_set));
    std::sort(edge_set.begin(), edge_set.end());
    edge_set.erase(std::unique(edge_set.begin(), edge_set.end()), edge_set.end());
    g.edges = std::move(edge_set);
    g.targets = dm.targets;
    g.features.resize(static_cast<Eigen::Index>(g.nodes.size()), dense.kb->embeddings.cols());
    for (size_t i = 0; i < g.nodes.size(); ++i)
        g.features.row(static_cast<Eigen::Index>(i)) = dense.kb->embeddings.row(g.nodes[i]);
    return g;
}

}  // namespace kgml::kb
