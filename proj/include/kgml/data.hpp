#pragma once

#include "kgml/encoder.hpp"
#include "kgml/kb.hpp"
#include "kgml/meta.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace kgml::data {

struct Doc {
    std::string text;
    std::string label;
    std::string user;              // "-" when absent
    std::vector<int> tokens;       // vocab ids
    std::vector<int> entities;     // linked KB entity ids, ascending, deduped
};

/// Loaded corpus plus split membership. Supervised splits partition label
/// names; unsupervised splits partition user ids.
struct Corpus {
    std::vector<Doc> docs;
    enc::Vocab vocab;
    std::map<std::string, std::vector<std::string>> label_splits;
    std::map<std::string, std::vector<std::string>> user_splits;

    std::vector<int> docs_with_label(const std::string& label) const;
    std::vector<int> docs_with_user(const std::string& user) const;
};

/// label<TAB>user<TAB>text records plus a split file of `split<TAB>name`
/// lines (names are labels for supervised splits, user ids otherwise).
Corpus load_corpus(const std::string& corpus_path, const std::string& splits_path);

/// Greedy longest-match dictionary linking of KB surface names over the
/// lowercased whitespace tokens; multi-word names match contiguous spans.
std::vector<int> link_entities(const std::string& text, const kb::KnowledgeBase& kb);

/// Links every document in place.
void link_corpus(Corpus& corpus, const kb::KnowledgeBase& kb);

/// N-way K-shot episode from the given split: N classes uniformly without
/// replacement, K supports + Q queries per class, disjoint, labels densified
/// to 0..N-1 in class-selection order.
meta::Episode sample_episode(const Corpus& corpus, const std::string& split, int n_way,
                             int k_shot, int queries, std::mt19937_64& rng);

/// One user sampled uniformly from the split; up to context_size of their
/// documents become the (query-only) task.
meta::Episode sample_user_task(const Corpus& corpus, const std::string& split,
                               int context_size, std::mt19937_64& rng,
                               const std::vector<std::string>& label_universe);

/// Synthetic supervised benchmark. Entities cluster by class in embedding
/// space and intra-class KB edges connect them; filler tokens are drawn from
/// a shared pool with probability `lambda` (class-uninformative) and from a
/// class pool otherwise. At lambda = 1 all non-mention tokens carry no class
/// signal and the graph pathway holds the entire class signal.
struct SynthSpec {
    int classes_train = 10;
    int classes_val = 5;
    int classes_test = 5;
    int entities_per_class = 20;
    int docs_per_class = 30;
    int vocab_shared = 200;
    int vocab_per_class = 20;
    int tokens_per_doc = 10;
    int mentions_per_doc = 2;
    int embed_dim = 16;
    double lambda = 1.0;
    double cluster_radius = 3.0;
    double cluster_noise = 0.3;
    /// Fraction of each class's entity chain present in the base KB; the
    /// remaining entities rely on k-NN densification to connect.
    double base_chain_fraction = 0.5;
};

/// Latent-per-task benchmark for unsupervised adaptation: each user carries a
/// hidden bit z; the label is the XOR of a per-document content token and z.
/// A per-document style token reveals z only with probability
/// 1 - style_noise, so single documents are ambiguous while a query batch
/// identifies z almost surely.
struct ArmSpec {
    int users_train = 40;
    int users_val = 5;
    int users_test = 15;
    int docs_per_user = 60;
    double style_noise = 0.35;
};

struct SynthFiles {
    std::string triples, embeddings, corpus, splits, metadata;
};

/// Writes the benchmark files under out_dir (byte-identical for a fixed
/// seed) and returns their paths.
SynthFiles make_synthetic_benchmark(const SynthSpec& spec, std::uint64_t seed,
                                    const std::string& out_dir);
SynthFiles make_arm_benchmark(const ArmSpec& spec, std::uint64_t seed,
                              const std::string& out_dir);

}  // namespace kgml::data
