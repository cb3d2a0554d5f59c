#pragma once

#include "kgml/autodiff.hpp"
#include "kgml/kb.hpp"
#include "kgml/params.hpp"

#include <random>
#include <vector>

namespace kgml::gnn {

/// One GraphSAGE layer: self weight and neighbor weight, both d_in x d_out.
struct LayerRef {
    ad::Value w_self;
    ad::Value w_neigh;
};

/// Parameter names for a K-layer stack with widths dims = [D_e, d1, ..., dK].
/// Registered in group `knowledge`.
void register_gnn_params(ParameterStore& store, const std::vector<int>& dims,
                         std::mt19937_64& rng);

/// Mean-of-neighbors operator for a sentence graph: row v is 1/|N(v)| on v's
/// neighbors, all-zero for isolated nodes.
Mat neighbor_mean_matrix(const kb::SentenceGraph& g);

/// h' = ReLU(h W_self + mean_neigh(h) W_neigh), neighbor features taken from
/// the previous layer.
ad::Value sage_layer(ad::Tape& tape, ad::Value features, ad::Value neighbor_mean,
                     const LayerRef& layer);

/// K sage layers followed by mean readout over nodes (ascending entity-id
/// order, so the embedding is bitwise independent of input labeling).
ad::Value encode_graph(ad::Tape& tape, const kb::SentenceGraph& g,
                       const std::vector<LayerRef>& layers);

/// Tape leaves for the registered stack, in layer order.
std::vector<LayerRef> gnn_leaves(Bound& bound, const ParameterStore& store, int num_layers);

}  // namespace kgml::gnn
