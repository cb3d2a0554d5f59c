#pragma once

#include "kgml/meta.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kgml {

enum class Mode { maml, protonet, arm };

Mode mode_from_name(const std::string& s);
const char* mode_name(Mode m);

/// Flat key=value run configuration. File values load first, CLI flags
/// override them.
struct RunConfig {
    Mode mode = Mode::protonet;
    meta::KgMode kg = meta::KgMode::full;

    int n_way = 5;
    int k_shot = 1;
    int queries = 5;
    int knn_k = 3;
    std::vector<int> gnn_dims = {64, 16};  // layer widths, input dim comes from the KB
    int d_word = 64;
    int d_sent = 64;
    int head_hidden = 64;

    double alpha = 0.01;       // inner-loop rate (MAML)
    double beta = 2e-5;        // outer-loop rate
    int inner_steps = 5;
    double weight_decay = 0.0;
    int epochs = 1000;         // outer steps
    int meta_batch = 2;
    int context_size = 50;     // ARM queries per task
    bool arm_context = true;   // false: context-free control head
    double user_ratio = 1.0;   // fraction of meta-train users kept (ARM)
    int eval_episodes = 600;
    std::uint64_t seed = 7;

    std::string kb_triples, kb_embeddings, corpus, splits;
    std::string checkpoint = "model.ckpt";
    std::string log_file;      // empty: stdout only
    std::string dump_file = "graphs.txt";

    /// Throws DataError on invalid keys/values or mode-inconsistent settings.
    void validate() const;
};

/// Parses `key=value` lines ('#' comments allowed) into cfg.
void load_config_file(RunConfig& cfg, const std::string& path);
/// Applies one key=value assignment.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);
/// The full config as key=value lines (the checkpoint snapshot).
std::string config_snapshot(const RunConfig& cfg);

}  // namespace kgml
