#include "kgml/gnn.hpp"

#include <cmath>

namespace kgml::gnn {

void register_gnn_params(ParameterStore& store, const std::vector<int>& dims,
                         std::mt19937_64& rng) {
    if (dims.size() < 2) throw NumericError("gnn: need at least one layer (dims >= 2)");
    for (size_t k = 1; k < dims.size(); ++k) {
        const int d_in = dims[k - 1];
        const int d_out = dims[k];
        if (d_in < 1 || d_out < 1) throw NumericError("gnn: layer widths must be positive");
        const double s = std::sqrt(6.0 / (d_in + d_out));
        const std::string prefix = "gnn.l" + std::to_string(k);
        store.add(prefix + ".w_self", Group::knowledge, rand_uniform(d_in, d_out, s, rng));
        store.add(prefix + ".w_neigh", Group::knowledge, rand_uniform(d_in, d_out, s, rng));
    }
}

std::vector<LayerRef> gnn_leaves(Bound& bound, const ParameterStore& store, int num_layers) {
    std::vector<LayerRef> layers;
    for (int k = 1; k <= num_layers; ++k) {
        const std::string prefix = "gnn.l" + std::to_string(k);
        for (const auto& suffix : {".w_self", ".w_neigh"})
            if (!bound.has(prefix + suffix)) bound.bind(store, prefix + suffix);
        layers.push_back({bound.at(prefix + ".w_self"), bound.at(prefix + ".w_neigh")});
    }
    return layers;
}

Mat neighbor_mean_matrix(const kb::SentenceGraph& g) {
    const int n = static_cast<int>(g.nodes.size());
    Mat a = Mat::Zero(n, n);
    std::vector<int> degree(n, 0);
    for (const auto& e : g.edges) {
        const int i = g.node_pos(e.a);
        const int j = g.node_pos(e.b);
        if (i < 0 || j < 0) throw DataError("sentence graph edge references unknown node");
        a(i, j) = 1.0;
        a(j, i) = 1.0;
        ++degree[i];
        ++degree[j];
    }
    for (int i = 0; i < n; ++i)
        if (degree[i] > 0) a.row(i) /= static_cast<double>(degree[i]);
    return a;
}

ad::Value sage_layer(ad::Tape& tape, ad::Value features, ad::Value neighbor_mean,
                     const LayerRef& layer) {
    ad::Value own = tape.matmul(features, layer.w_self);
    ad::Value agg = tape.matmul(tape.matmul(neighbor_mean, features), layer.w_neigh);
    return tape.relu(tape.add(own, agg));
}

ad::Value encode_graph(ad::Tape& tape, const kb::SentenceGraph& g,
                       const std::vector<LayerRef>& layers) {
    if (g.nodes.empty()) throw DataError("encode_graph: empty node set");
    ad::Value h = tape.constant(g.features);
    ad::Value a = tape.constant(neighbor_mean_matrix(g));
    for (const auto& layer : layers) h = sage_layer(tape, h, a, layer);
    return tape.mean_rows(h);
}

}  // namespace kgml::gnn
