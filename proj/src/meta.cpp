#include "kgml/meta.hpp"

#include <algorithm>
#include <cmath>

namespace kgml::meta {

namespace {

const std::vector<std::string> kHeadNames = {"head.w1", "head.b1", "head.w2",
                                             "head.b2", "head.wout", "head.bout"};

void register_head_params(ParameterStore& store, int d_in, int hidden, int classes,
                          std::mt19937_64& rng) {
    if (d_in < 1 || hidden < 1 || classes < 2) throw NumericError("head: invalid dimensions");
    const double s1 = std::sqrt(6.0 / (d_in + hidden));
    const double s2 = std::sqrt(6.0 / (hidden + hidden));
    const double s3 = std::sqrt(6.0 / (hidden + classes));
    store.add("head.w1", Group::head, rand_uniform(d_in, hidden, s1, rng));
    store.add("head.b1", Group::head, Mat::Zero(1, hidden));
    store.add("head.w2", Group::head, rand_uniform(hidden, hidden, s2, rng));
    store.add("head.b2", Group::head, Mat::Zero(1, hidden));
    store.add("head.wout", Group::head, rand_uniform(hidden, classes, s3, rng));
    store.add("head.bout", Group::head, Mat::Zero(1, classes));
}

std::vector<int> labels_of(const std::vector<Item>& items) {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.label);
    return out;
}

// Stacks the fused embeddings of a list of items on one tape.
ad::Value embed_stack(Bound& bound, const Model& model, const std::vector<Item>& items) {
    std::vector<ad::Value> rows;
    rows.reserve(items.size());
    for (const auto& it : items) rows.push_back(embed_item(bound, model, it));
    return bound.tape().concat_rows(rows);
}

std::map<std::string, ad::Value> bind_head(Bound& bound, const Model& model) {
    std::map<std::string, ad::Value> head;
    for (const auto& name : kHeadNames) head[name] = bound.bind(model.store, name);
    return head;
}

std::vector<int> argmax_rows(const Mat& logits) {
    std::vector<int> out(static_cast<size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index j;
        logits.row(i).maxCoeff(&j);
        out[static_cast<size_t>(i)] = static_cast<int>(j);
    }
    return out;
}

void accumulate(ad::GradMap& total, const ad::GradMap& part, double weight) {
    for (const auto& [name, g] : part) {
        auto it = total.find(name);
        if (it == total.end())
            total[name] = g * weight;
        else
            it->second += g * weight;
    }
}

}  // namespace

KgMode kg_mode_from_name(const std::string& s) {
    if (s == "full") return KgMode::full;
    if (s == "no-knn") return KgMode::no_knn;
    if (s == "concat-fusion") return KgMode::concat_fusion;
    if (s == "off") return KgMode::off;
    throw DataError("unknown kg mode: " + s);
}

const char* kg_mode_name(KgMode m) {
    switch (m) {
        case KgMode::full: return "full";
        case KgMode::no_knn: return "no-knn";
        case KgMode::concat_fusion: return "concat-fusion";
        case KgMode::off: return "off";
    }
    return "?";
}

int ModelConfig::fused_dim() const {
    switch (kg) {
        case KgMode::off: return d_sent;
        case KgMode::concat_fusion: return d_sent + graph_dim();
        default: return d_sent;
    }
}

int ModelConfig::head_input_dim() const {
    return arm_context ? 2 * fused_dim() : fused_dim();
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.kg != KgMode::off && cfg.gnn_dims.size() < 2)
        throw NumericError("model: kg pathway enabled but gnn dims missing");
    Model m;
    m.cfg = cfg;
    std::mt19937_64 rng(seed);
    enc::register_encoder_params(m.store, cfg.vocab_size, cfg.d_word, cfg.d_sent, rng);
    if (cfg.head_classes > 0)
        register_head_params(m.store, cfg.head_input_dim(), cfg.head_hidden, cfg.head_classes,
                             rng);
    if (cfg.kg != KgMode::off) {
        gnn::register_gnn_params(m.store, cfg.gnn_dims, rng);
        if (cfg.kg != KgMode::concat_fusion)
            enc::register_fusion_params(m.store, cfg.d_sent, cfg.graph_dim(), rng);
    }
    return m;
}

ad::Value embed_item(Bound& bound, const Model& model, const Item& item) {
    bound.bind(model.store, "enc.embed");
    bound.bind(model.store, "enc.proj.w");
    bound.bind(model.store, "enc.proj.b");
    ad::Value sentence = enc::encode_sentence(bound, item.tokens);
    if (model.cfg.kg == KgMode::off) return sentence;

    const int num_layers = static_cast<int>(model.cfg.gnn_dims.size()) - 1;
    for (int k = 1; k <= num_layers; ++k) {
        bound.bind(model.store, "gnn.l" + std::to_string(k) + ".w_self");
        bound.bind(model.store, "gnn.l" + std::to_string(k) + ".w_neigh");
    }
    ad::Tape& tape = bound.tape();
    ad::Value graph;
    if (item.has_graph && !item.graph.nodes.empty()) {
        graph = gnn::encode_graph(tape, item.graph, gnn::gnn_leaves(bound, model.store, num_layers));
    } else {
        // sentences without linked entities contribute a zero graph embedding
        graph = tape.constant(Mat::Zero(1, model.cfg.graph_dim()));
    }
    if (model.cfg.kg == KgMode::concat_fusion) return enc::fuse_ablation_concat(tape, sentence, graph);
    bound.bind(model.store, "fuse.w");
    bound.bind(model.store, "fuse.b");
    return enc::fuse(bound, sentence, graph);
}

ad::Value head_forward(ad::Tape& tape, const std::map<std::string, ad::Value>& head,
                       ad::Value features) {
    ad::Value h1 = tape.relu(
        tape.add_rowvec(tape.matmul(features, head.at("head.w1")), head.at("head.b1")));
    ad::Value h2 =
        tape.relu(tape.add_rowvec(tape.matmul(h1, head.at("head.w2")), head.at("head.b2")));
    return tape.add_rowvec(tape.matmul(h2, head.at("head.wout")), head.at("head.bout"));
}

Mat fused_features(const Model& model, const std::vector<Item>& items) {
    if (items.empty()) throw DataError("fused_features: no items");
    ad::Tape tape;
    Bound bound(tape);
    std::vector<ad::Value> vals;
    vals.reserve(items.size());
    for (const auto& it : items) vals.push_back(embed_item(bound, model, it));
    return tape.value(tape.concat_rows(vals));
}

HeadValues head_values(const Model& model) {
    HeadValues out;
    for (const auto& name : kHeadNames) out[name] = model.store.at(name).value;
    return out;
}

HeadValues maml_adapt(const Model& model, const Mat& support_features,
                      const std::vector<int>& support_labels, double alpha, int steps) {
    if (support_features.rows() == 0) throw DataError("maml_adapt: empty support set");
    if (alpha <= 0.0) throw NumericError("maml_adapt: alpha must be positive");
    if (steps < 0) throw NumericError("maml_adapt: steps must be nonnegative");
    HeadValues head = head_values(model);
    for (int s = 0; s < steps; ++s) {
        ad::Tape tape;
        std::map<std::string, ad::Value> leaves;
        for (auto& [name, v] : head) leaves[name] = tape.leaf(v, true);
        ad::Value feats = tape.constant(support_features);
        ad::Value logits = head_forward(tape, leaves, feats);
        ad::Value loss = tape.cross_entropy(logits, support_labels);
        tape.backward(loss);
        for (auto& [name, v] : head) v -= alpha * tape.grad(leaves[name]);
    }
    return head;
}

double maml_outer_step(Model& model, const std::vector<Episode>& episodes, double alpha,
                       int inner_steps, Adam& opt) {
    if (episodes.empty()) throw DataError("maml_outer_step: empty episode batch");
    const double w = 1.0 / static_cast<double>(episodes.size());
    ad::GradMap total;
    double batch_loss = 0.0;
    for (const auto& ep : episodes) {
        if (ep.support.empty() || ep.query.empty())
            throw DataError("maml_outer_step: episode needs support and query items");
        Mat sup_feats = fused_features(model, ep.support);
        HeadValues adapted =
            maml_adapt(model, sup_feats, labels_of(ep.support), alpha, inner_steps);

        ad::Tape tape;
        Bound bound(tape);
        std::map<std::string, ad::Value> head;
        for (auto& [name, v] : adapted) head[name] = tape.leaf(v, true);
        ad::Value qf = embed_stack(bound, model, ep.query);
        ad::Value logits = head_forward(tape, head, qf);
        ad::Value loss = tape.cross_entropy(logits, labels_of(ep.query));
        tape.backward(loss);
        batch_loss += w * tape.value(loss)(0, 0);

        ad::GradMap grads = bound.grads();
        // first-order: the adapted head's gradient updates the initialization
        for (auto& [name, v] : head) grads[name] = tape.grad(v);
        accumulate(total, grads, w);
    }
    opt.step(model.store, total);
    return batch_loss;
}

Eigen::RowVectorXd proto_predict(const Mat& prototypes, const Eigen::RowVectorXd& query) {
    if (prototypes.rows() == 0) throw DataError("proto_predict: no prototypes");
    if (prototypes.cols() != query.cols())
        throw NumericError("proto_predict: dimension mismatch");
    Eigen::RowVectorXd neg(prototypes.rows());
    for (Eigen::Index k = 0; k < prototypes.rows(); ++k)
        neg(k) = -(query - prototypes.row(k)).squaredNorm();
    const double m = neg.maxCoeff();
    Eigen::RowVectorXd e = (neg.array() - m).exp();
    return e / e.sum();
}

double proto_train_step(Model& model, const std::vector<Episode>& episodes, Adam& opt) {
    if (episodes.empty()) throw DataError("proto_train_step: empty episode batch");
    const double w = 1.0 / static_cast<double>(episodes.size());
    ad::GradMap total;
    double batch_loss = 0.0;
    for (const auto& ep : episodes) {
        if (ep.support.empty() || ep.query.empty())
            throw DataError("proto_train_step: episode needs support and query items");
        ad::Tape tape;
        Bound bound(tape);
        std::vector<ad::Value> sup;
        sup.reserve(ep.support.size());
        for (const auto& it : ep.support) sup.push_back(embed_item(bound, model, it));

        const int way = ep.way > 0 ? ep.way : 1 + *std::max_element(
            labels_of(ep.support).begin(), labels_of(ep.support).end());
        std::vector<ad::Value> protos;
        for (int k = 0; k < way; ++k) {
            std::vector<ad::Value> members;
            for (size_t j = 0; j < ep.support.size(); ++j)
                if (ep.support[j].label == k) members.push_back(sup[j]);
            if (members.empty())
                throw DataError("proto_train_step: class " + std::to_string(k) + " has no support");
            protos.push_back(tape.mean_rows(tape.concat_rows(members)));
        }
        ad::Value proto_mat = tape.concat_rows(protos);
        ad::Value qf = embed_stack(bound, model, ep.query);
        ad::Value logits = tape.scale(tape.sqdist(qf, proto_mat), -1.0);
        ad::Value loss = tape.cross_entropy(logits, labels_of(ep.query));
        tape.backward(loss);
        batch_loss += w * tape.value(loss)(0, 0);
        accumulate(total, bound.grads(), w);
    }
    opt.step(model.store, total);
    return batch_loss;
}

Mat arm_context(const std::vector<Mat>& query_embeddings) {
    if (query_embeddings.empty()) throw DataError("arm_context: empty embedding list");
    Mat sum = Mat::Zero(1, query_embeddings.front().cols());
    for (const auto& e : query_embeddings) {
        if (e.rows() != 1 || e.cols() != sum.cols())
            throw NumericError("arm_context: embeddings must be rows of one width");
        sum += e;
    }
    return sum / static_cast<double>(query_embeddings.size());
}

double arm_train_step(Model& model, const std::vector<Episode>& episodes, Adam& opt,
                      bool use_context) {
    if (episodes.empty()) throw DataError("arm_train_step: empty episode batch");
    const double w = 1.0 / static_cast<double>(episodes.size());
    ad::GradMap total;
    double batch_loss = 0.0;
    for (const auto& ep : episodes) {
        if (ep.query.empty()) throw DataError("arm_train_step: episode has no queries");
        ad::Tape tape;
        Bound bound(tape);
        auto head = bind_head(bound, model);
        ad::Value qf = embed_stack(bound, model, ep.query);
        ad::Value inp = qf;
        if (use_context) {
            ad::Value ctx = tape.mean_rows(qf);
            inp = tape.concat_cols(qf, tape.broadcast_rows(ctx, static_cast<int>(ep.query.size())));
        }
        ad::Value logits = head_forward(tape, head, inp);
        ad::Value loss = tape.cross_entropy(logits, labels_of(ep.query));
        tape.backward(loss);
        batch_loss += w * tape.value(loss)(0, 0);
        accumulate(total, bound.grads(), w);
    }
    opt.step(model.store, total);
    return batch_loss;
}

std::vector<int> maml_predict(const Model& model, const Episode& ep, double alpha,
                              int inner_steps) {
    Mat sup_feats = fused_features(model, ep.support);
    HeadValues adapted = maml_adapt(model, sup_feats, labels_of(ep.support), alpha, inner_steps);
    Mat qf = fused_features(model, ep.query);
    ad::Tape tape;
    std::map<std::string, ad::Value> head;
    for (auto& [name, v] : adapted) head[name] = tape.constant(v);
    ad::Value logits = head_forward(tape, head, tape.constant(qf));
    return argmax_rows(tape.value(logits));
}

std::vector<int> proto_predict_episode(const Model& model, const Episode& ep) {
    Mat sup = fused_features(model, ep.support);
    const int way = ep.way > 0 ? ep.way : 1 + *std::max_element(
        labels_of(ep.support).begin(), labels_of(ep.support).end());
    Mat protos = Mat::Zero(way, sup.cols());
    std::vector<int> counts(static_cast<size_t>(way), 0);
    for (size_t j = 0; j < ep.support.size(); ++j) {
        protos.row(ep.support[j].label) += sup.row(static_cast<Eigen::Index>(j));
        ++counts[static_cast<size_t>(ep.support[j].label)];
    }
    for (int k = 0; k < way; ++k) {
        if (counts[static_cast<size_t>(k)] == 0)
            throw DataError("proto_predict_episode: class without support");
        protos.row(k) /= static_cast<double>(counts[static_cast<size_t>(k)]);
    }
    Mat qf = fused_features(model, ep.query);
    std::vector<int> preds;
    preds.reserve(ep.query.size());
    for (Eigen::Index i = 0; i < qf.rows(); ++i) {
        Eigen::RowVectorXd p = proto_predict(protos, qf.row(i));
        Eigen::Index k;
        p.maxCoeff(&k);
        preds.push_back(static_cast<int>(k));
    }
    return preds;
}

std::vector<int> arm_predict_episode(const Model& model, const Episode& ep, bool use_context) {
    Mat qf = fused_features(model, ep.query);
    Mat inp = qf;
    if (use_context) {
        Mat ctx = qf.colwise().sum() / static_cast<double>(qf.rows());
        Mat joined(qf.rows(), 2 * qf.cols());
        joined << qf, ctx.replicate(qf.rows(), 1);
        inp = std::move(joined);
    }
    ad::Tape tape;
    std::map<std::string, ad::Value> head;
    for (const auto& name : kHeadNames) head[name] = tape.constant(model.store.at(name).value);
    ad::Value logits = head_forward(tape, head, tape.constant(inp));
    return argmax_rows(tape.value(logits));
}

EvalReport summarize(const std::vector<double>& per_episode_accuracy) {
    EvalReport r;
    r.per_episode = per_episode_accuracy;
    const double n = static_cast<double>(per_episode_accuracy.size());
    if (per_episode_accuracy.empty()) throw DataError("summarize: no episodes");
    double mean = 0.0;
    for (double a : per_episode_accuracy) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : per_episode_accuracy) var += (a - mean) * (a - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    r.mean_accuracy = mean;
    r.ci95_halfwidth = 1.96 * std::sqrt(var / n);
    return r;
}

}  // namespace kgml::meta
