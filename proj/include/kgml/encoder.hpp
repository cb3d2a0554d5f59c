#pragma once

#include "kgml/autodiff.hpp"
#include "kgml/params.hpp"

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgml::enc {

constexpr int kPad = 0;
constexpr int kUnk = 1;

/// Token vocabulary with dense indices. PAD = 0, UNK = 1.
class Vocab {
public:
    Vocab();

    /// Adds the token if absent; returns its id.
    int add(const std::string& token);
    /// Id lookup, UNK for unseen tokens.
    int id(const std::string& token) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Lowercase + whitespace split.
std::vector<std::string> tokenize(const std::string& text);

/// Bag-of-embeddings encoder parameters: a |V| x D_w token table and one
/// affine projection to dimension D_s. Group `encoder`.
void register_encoder_params(ParameterStore& store, int vocab_size, int d_word, int d_sent,
                             std::mt19937_64& rng);

/// Names of the fusion layer weights (group `knowledge`): one fully connected
/// layer mapping concat(sentence, graph) back to the sentence dimension.
void register_fusion_params(ParameterStore& store, int d_sent, int d_graph,
                            std::mt19937_64& rng);

/// ReLU(mean of non-PAD token embeddings * W + b), as a 1 x D_s row.
/// Token ids are sorted before summation so bag order never changes bits.
ad::Value encode_sentence(Bound& bound, const std::vector<int>& tokens);

/// ReLU(concat(sentence, graph) * W_f + b_f).
ad::Value fuse(Bound& bound, ad::Value sentence, ad::Value graph);

/// Ablation: raw concat(sentence, graph); with an empty graph embedding the
/// sentence passes through unchanged.
ad::Value fuse_ablation_concat(ad::Tape& tape, ad::Value sentence, ad::Value graph);

}  // namespace kgml::enc
