#pragma once

#include "kgml/config.hpp"
#include "kgml/data.hpp"
#include "kgml/kb.hpp"
#include "kgml/meta.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kgml::run {

/// Loaded data + lazily extracted sentence graphs, shared by the commands.
struct Session {
    RunConfig cfg;
    data::Corpus corpus;
    std::vector<std::string> label_universe;  // sorted distinct labels
    std::optional<kb::KnowledgeBase> kb;
    std::optional<kb::DenseGraph> dense;
    std::vector<std::optional<kb::SentenceGraph>> graph_cache;  // by doc index

    /// Fills item graphs from the cache (extracting on first use).
    void attach_graphs(meta::Episode& ep);
};

Session load_session(const RunConfig& cfg, bool need_kb);

meta::Model build_model_for(const RunConfig& cfg, const Session& session);

using LogSink = std::function<void(const std::string&)>;

struct ExtractStats {
    int sentences = 0;
    int with_targets = 0;
    double mean_nodes = 0.0;
    double mean_edges = 0.0;
    double unreachable_rate = 0.0;
};

/// Dumps one graph record per corpus line and summary stats.
ExtractStats cmd_extract_kg(const RunConfig& cfg, const LogSink& log);

struct TrainResult {
    std::vector<double> losses;                       // per outer step
    std::vector<std::pair<int, double>> val_accuracy; // (step, accuracy)
    double time_per_task_ms = 0.0;
};

TrainResult cmd_train(const RunConfig& cfg, const LogSink& log);

struct EvalResult {
    double mean_accuracy = 0.0;
    double ci95_halfwidth = 0.0;
    int episodes = 0;
    double time_per_task_ms = 0.0;
};

EvalResult cmd_eval(const RunConfig& cfg, const LogSink& log);

}  // namespace kgml::run
