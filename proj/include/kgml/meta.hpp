#pragma once

#include "kgml/encoder.hpp"
#include "kgml/gnn.hpp"
#include "kgml/kb.hpp"
#include "kgml/params.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kgml::meta {

/// Knowledge-graph pathway variants. `full` is the complete pipeline,
/// `no_knn` drops the k-NN densification edges, `concat_fusion` replaces the
/// learned aggregator with plain concatenation, `off` disables the graph
/// pathway entirely.
enum class KgMode { full, no_knn, concat_fusion, off };

KgMode kg_mode_from_name(const std::string& s);
const char* kg_mode_name(KgMode m);

struct Item {
    std::vector<int> tokens;    // vocab ids
    kb::SentenceGraph graph;    // valid when has_graph
    bool has_graph = false;
    int label = -1;             // dense per-episode label; -1 if unlabeled
    int doc = -1;               // source document index, for caching
};

/// One task: labeled support + query (supervised) or query only (ARM).
struct Episode {
    std::vector<Item> support;
    std::vector<Item> query;
    int way = 0;
    int shots = 0;
    std::vector<std::string> class_names;  // dense label -> original name
};

struct ModelConfig {
    int vocab_size = 2;
    int d_word = 16;
    int d_sent = 64;
    std::vector<int> gnn_dims;  // [D_e, d1, ..., dK]; empty when kg == off
    int head_hidden = 64;
    int head_classes = 0;       // 0: no head (ProtoNet)
    bool arm_context = false;   // head also sees the task context vector
    KgMode kg = KgMode::full;

    int graph_dim() const { return gnn_dims.empty() ? 0 : gnn_dims.back(); }
    /// Width of the representation fed to heads / prototypes.
    int fused_dim() const;
    int head_input_dim() const;
};

/// Parameter groups wired for one configuration. Initialization order is
/// encoder, head, knowledge, all drawn from one seeded generator, so builds
/// that share a seed and differ only by kg=off match bit-for-bit on the
/// groups they share.
struct Model {
    ModelConfig cfg;
    ParameterStore store;
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Binds whatever groups the kg mode requires and returns the fused
/// representation of one item as a 1 x fused_dim row.
ad::Value embed_item(Bound& bound, const Model& model, const Item& item);

/// Two ReLU layers plus a linear output layer over row-stacked features.
ad::Value head_forward(ad::Tape& tape, const std::map<std::string, ad::Value>& head,
                       ad::Value features);

/// Fused features of many items without recording gradients.
Mat fused_features(const Model& model, const std::vector<Item>& items);

using HeadValues = std::map<std::string, Mat>;

HeadValues head_values(const Model& model);

/// Inner loop of gradient-based adaptation: `steps` SGD steps at rate alpha
/// on support cross-entropy. Only the head moves; encoder and knowledge
/// parameters are read-only here.
HeadValues maml_adapt(const Model& model, const Mat& support_features,
                      const std::vector<int>& support_labels, double alpha, int steps);

/// One first-order outer step over a meta-batch: adapt per episode, average
/// query losses, one Adam step on encoder + head-init + knowledge.
/// Returns the batch query loss.
double maml_outer_step(Model& model, const std::vector<Episode>& episodes, double alpha,
                       int inner_steps, Adam& opt);

/// Class probabilities from negative squared distances to prototypes.
Eigen::RowVectorXd proto_predict(const Mat& prototypes, const Eigen::RowVectorXd& query);

/// Episodic prototype loss; Adam step on encoder + knowledge.
double proto_train_step(Model& model, const std::vector<Episode>& episodes, Adam& opt);

/// Mean of query embeddings (the task context vector).
Mat arm_context(const std::vector<Mat>& query_embeddings);

/// Unsupervised step: classify each query given concat(fused, context);
/// Adam step on all three groups. With use_context = false the head sees the
/// fused embedding alone (the context-free control).
double arm_train_step(Model& model, const std::vector<Episode>& episodes, Adam& opt,
                      bool use_context = true);

// -- evaluation -----------------------------------------------------------

std::vector<int> maml_predict(const Model& model, const Episode& ep, double alpha,
                              int inner_steps);
std::vector<int> proto_predict_episode(const Model& model, const Episode& ep);
std::vector<int> arm_predict_episode(const Model& model, const Episode& ep, bool use_context);

struct EvalReport {
    double mean_accuracy = 0.0;
    double ci95_halfwidth = 0.0;
    std::vector<double> per_episode;
};

EvalReport summarize(const std::vector<double>& per_episode_accuracy);

}  // namespace kgml::meta
