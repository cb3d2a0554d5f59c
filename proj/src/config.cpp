#include "kgml/config.hpp"

#include <fstream>
#include <sstream>

namespace kgml {

Mode mode_from_name(const std::string& s) {
    if (s == "maml") return Mode::maml;
    if (s == "protonet") return Mode::protonet;
    if (s == "arm") return Mode::arm;
    throw DataError("unknown mode: " + s);
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::maml: return "maml";
        case Mode::protonet: return "protonet";
        case Mode::arm: return "arm";
    }
    return "?";
}

void RunConfig::validate() const {
    if (n_way < 1 || k_shot < 1 || queries < 1) throw DataError("config: N, K, Q must be positive");
    if (knn_k < 1) throw DataError("config: knn_k must be positive");
    if (d_word < 1 || d_sent < 1 || head_hidden < 1) throw DataError("config: invalid widths");
    if (beta <= 0.0) throw DataError("config: beta must be positive");
    if (mode == Mode::maml && alpha <= 0.0) throw DataError("config: alpha must be positive");
    if (mode == Mode::maml && inner_steps < 1)
        throw DataError("config: inner_steps must be positive");
    if (weight_decay < 0.0) throw DataError("config: weight_decay must be nonnegative");
    if (epochs < 0) throw DataError("config: epochs must be nonnegative");
    if (meta_batch < 1) throw DataError("config: meta_batch must be positive");
    if (mode == Mode::arm && context_size < 1)
        throw DataError("config: context_size must be positive");
    if (user_ratio <= 0.0 || user_ratio > 1.0)
        throw DataError("config: user_ratio must lie in (0, 1]");
    if (eval_episodes < 1) throw DataError("config: eval_episodes must be positive");
    if (kg != meta::KgMode::off && gnn_dims.empty())
        throw DataError("config: gnn_dims required unless kg=off");
    for (int d : gnn_dims)
        if (d < 1) throw DataError("config: gnn layer widths must be positive");
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(std::stoi(part));
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "mode") cfg.mode = mode_from_name(value);
        else if (key == "kg") cfg.kg = meta::kg_mode_from_name(value);
        else if (key == "n_way") cfg.n_way = std::stoi(value);
        else if (key == "k_shot") cfg.k_shot = std::stoi(value);
        else if (key == "queries") cfg.queries = std::stoi(value);
        else if (key == "knn_k") cfg.knn_k = std::stoi(value);
        else if (key == "gnn_dims") cfg.gnn_dims = parse_int_list(value);
        else if (key == "d_word") cfg.d_word = std::stoi(value);
        else if (key == "d_sent") cfg.d_sent = std::stoi(value);
        else if (key == "head_hidden") cfg.head_hidden = std::stoi(value);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "beta") cfg.beta = std::stod(value);
        else if (key == "inner_steps") cfg.inner_steps = std::stoi(value);
        else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
        else if (key == "epochs") cfg.epochs = std::stoi(value);
        else if (key == "meta_batch") cfg.meta_batch = std::stoi(value);
        else if (key == "context_size") cfg.context_size = std::stoi(value);
        else if (key == "arm_context") cfg.arm_context = (value == "true" || value == "1");
        else if (key == "user_ratio") cfg.user_ratio = std::stod(value);
        else if (key == "eval_episodes") cfg.eval_episodes = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "kb_triples") cfg.kb_triples = value;
        else if (key == "kb_embeddings") cfg.kb_embeddings = value;
        else if (key == "corpus") cfg.corpus = value;
        else if (key == "splits") cfg.splits = value;
        else if (key == "checkpoint") cfg.checkpoint = value;
        else if (key == "log_file") cfg.log_file = value;
        else if (key == "dump_file") cfg.dump_file = value;
        else throw DataError("config: unknown key: " + key);
    } catch (const std::invalid_argument&) {
        throw DataError("config: bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw DataError("config: value out of range for " + key + ": " + value);
    }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected key=value");
        apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

std::string config_snapshot(const RunConfig& cfg) {
    std::ostringstream out;
    out << "mode=" << mode_name(cfg.mode) << '\n';
    out << "kg=" << meta::kg_mode_name(cfg.kg) << '\n';
    out << "n_way=" << cfg.n_way << '\n';
    out << "k_shot=" << cfg.k_shot << '\n';
    out << "queries=" << cfg.queries << '\n';
    out << "knn_k=" << cfg.knn_k << '\n';
    out << "gnn_dims=";
    for (size_t i = 0; i < cfg.gnn_dims.size(); ++i) out << (i ? "," : "") << cfg.gnn_dims[i];
    out << '\n';
    out << "d_word=" << cfg.d_word << '\n';
    out << "d_sent=" << cfg.d_sent << '\n';
    out << "head_hidden=" << cfg.head_hidden << '\n';
    out << "alpha=" << cfg.alpha << '\n';
    out << "beta=" << cfg.beta << '\n';
    out << "inner_steps=" << cfg.inner_steps << '\n';
    out << "weight_decay=" << cfg.weight_decay << '\n';
    out << "epochs=" << cfg.epochs << '\n';
    out << "meta_batch=" << cfg.meta_batch << '\n';
    out << "context_size=" << cfg.context_size << '\n';
    out << "arm_context=" << (cfg.arm_context ? "true" : "false") << '\n';
    out << "user_ratio=" << cfg.user_ratio << '\n';
    out << "eval_episodes=" << cfg.eval_episodes << '\n';
    out << "seed=" << cfg.seed << '\n';
    return out.str();
}

}  // namespace kgml
