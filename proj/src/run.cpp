#include "kgml/run.hpp"

#include "kgml/checkpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kgml::run {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(double x) {
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
}

std::vector<std::string> train_users(const RunConfig& cfg, const data::Corpus& corpus) {
    auto it = corpus.user_splits.find("train");
    if (it == corpus.user_splits.end() || it->second.empty())
        throw DataError("no meta-train users in splits file");
    std::vector<std::string> users = it->second;
    if (cfg.user_ratio < 1.0) {
        std::mt19937_64 rng(cfg.seed ^ 0x757365727331ULL);
        for (size_t i = 0; i + 1 < users.size(); ++i) {
            std::uniform_int_distribution<size_t> d(i, users.size() - 1);
            std::swap(users[i], users[d(rng)]);
        }
        const size_t keep = std::max<size_t>(
            1, static_cast<size_t>(std::ceil(cfg.user_ratio * static_cast<double>(users.size()))));
        users.resize(keep);
    }
    return users;
}

meta::Episode user_task_from_docs(const Session& s, const std::vector<int>& doc_ids) {
    meta::Episode ep;
    ep.class_names = s.label_universe;
    for (int doc : doc_ids) {
        meta::Item item;
        item.tokens = s.corpus.docs[static_cast<size_t>(doc)].tokens;
        const auto lit = std::find(s.label_universe.begin(), s.label_universe.end(),
                                   s.corpus.docs[static_cast<size_t>(doc)].label);
        item.label = static_cast<int>(lit - s.label_universe.begin());
        item.doc = doc;
        ep.query.push_back(std::move(item));
    }
    return ep;
}

double episode_accuracy(const std::vector<int>& pred, const std::vector<meta::Item>& items) {
    int correct = 0;
    for (size_t i = 0; i < items.size(); ++i)
        if (pred[i] == items[i].label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::vector<int> predict_episode(const RunConfig& cfg, const meta::Model& model,
                                 const meta::Episode& ep) {
    switch (cfg.mode) {
        case Mode::maml: return meta::maml_predict(model, ep, cfg.alpha, cfg.inner_steps);
        case Mode::protonet: return meta::proto_predict_episode(model, ep);
        case Mode::arm: return meta::arm_predict_episode(model, ep, cfg.arm_context);
    }
    throw DataError("unknown mode");
}

/// Validation pass on its own generator so it never disturbs training rng.
double validation_accuracy(const RunConfig& cfg, Session& session, const meta::Model& model,
                           int episodes, std::uint64_t salt) {
    std::mt19937_64 rng(cfg.seed ^ salt);
    std::vector<double> acc;
    for (int e = 0; e < episodes; ++e) {
        meta::Episode ep;
        if (cfg.mode == Mode::arm) {
            ep = data::sample_user_task(session.corpus, "val", cfg.context_size, rng,
                                        session.label_universe);
        } else {
            ep = data::sample_episode(session.corpus, "val", cfg.n_way, cfg.k_shot, cfg.queries,
                                      rng);
        }
        session.attach_graphs(ep);
        acc.push_back(episode_accuracy(predict_episode(cfg, model, ep), ep.query));
    }
    return meta::summarize(acc).mean_accuracy;
}

}  // namespace

void Session::attach_graphs(meta::Episode& ep) {
    if (cfg.kg == meta::KgMode::off) return;
    auto fill = [&](meta::Item& item) {
        if (item.doc < 0) return;
        auto& slot = graph_cache[static_cast<size_t>(item.doc)];
        if (!slot.has_value()) {
            const auto& entities = corpus.docs[static_cast<size_t>(item.doc)].entities;
            if (entities.empty())
                slot = kb::SentenceGraph{};  // no linked entities: zero graph embedding
            else
                slot = kb::extract_sentence_kg(*dense, entities);
        }
        item.graph = *slot;
        item.has_graph = !item.graph.nodes.empty();
    };
    for (auto& item : ep.support) fill(item);
    for (auto& item : ep.query) fill(item);
}

Session load_session(const RunConfig& cfg, bool need_kb) {
    cfg.validate();
    Session s;
    s.cfg = cfg;
    s.corpus = data::load_corpus(cfg.corpus, cfg.splits);
    std::set<std::string> labels;
    for (const auto& d : s.corpus.docs) labels.insert(d.label);
    s.label_universe.assign(labels.begin(), labels.end());

    if (need_kb || cfg.kg != meta::KgMode::off) {
        s.kb = kb::load_kb(cfg.kb_triples, cfg.kb_embeddings);
        data::link_corpus(s.corpus, *s.kb);
        std::vector<kb::Edge> knn;
        if (cfg.kg != meta::KgMode::no_knn) knn = kb::build_knn_graph(*s.kb, cfg.knn_k);
        s.dense = kb::densify(*s.kb, knn);
    }
    s.graph_cache.resize(s.corpus.docs.size());
    return s;
}

meta::Model build_model_for(const RunConfig& cfg, const Session& session) {
    meta::ModelConfig mc;
    mc.vocab_size = session.corpus.vocab.size();
    mc.d_word = cfg.d_word;
    mc.d_sent = cfg.d_sent;
    mc.head_hidden = cfg.head_hidden;
    mc.kg = cfg.kg;
    if (cfg.kg != meta::KgMode::off) {
        mc.gnn_dims.push_back(session.kb->dim());
        for (int d : cfg.gnn_dims) mc.gnn_dims.push_back(d);
    }
    switch (cfg.mode) {
        case Mode::maml: mc.head_classes = cfg.n_way; break;
        case Mode::protonet: mc.head_classes = 0; break;
        case Mode::arm:
            mc.head_classes = static_cast<int>(session.label_universe.size());
            mc.arm_context = cfg.arm_context;
            break;
    }
    return meta::build_model(mc, cfg.seed);
}

ExtractStats cmd_extract_kg(const RunConfig& cfg, const LogSink& log) {
    Session session = load_session(cfg, /*need_kb=*/true);
    std::ofstream dump(cfg.dump_file, std::ios::binary);
    if (!dump) throw DataError("cannot write dump file: " + cfg.dump_file);

    ExtractStats stats;
    double nodes = 0.0, edges = 0.0;
    long unreachable = 0, target_total = 0;
    for (const auto& doc : session.corpus.docs) {
        ++stats.sentences;
        if (doc.entities.empty()) {
            dump << "nodes=\tedges=\ttargets=\n";
            continue;
        }
        ++stats.with_targets;
        kb::SentenceGraph g = kb::extract_sentence_kg(*session.dense, doc.entities);
        nodes += static_cast<double>(g.nodes.size());
        edges += static_cast<double>(g.edges.size());
        if (g.targets.size() >= 2) {
            kb::DistanceMatrix dm = kb::pairwise_shortest(*session.dense, doc.entities);
            for (size_t i = 0; i < dm.targets.size(); ++i) {
                bool connected = false;
                for (size_t j = 0; j < dm.targets.size(); ++j)
                    if (i != j && dm.dist[i][j] != kb::kUnreachable) connected = true;
                if (!connected) ++unreachable;
                ++target_total;
            }
        }
        dump << "nodes=";
        for (size_t i = 0; i < g.nodes.size(); ++i) dump << (i ? "," : "") << g.nodes[i];
        dump << "\tedges=";
        for (size_t i = 0; i < g.edges.size(); ++i)
            dump << (i ? "," : "") << g.edges[i].a << '-' << g.edges[i].b;
        dump << "\ttargets=";
        for (size_t i = 0; i < g.targets.size(); ++i) dump << (i ? "," : "") << g.targets[i];
        dump << '\n';
    }
    if (stats.with_targets > 0) {
        stats.mean_nodes = nodes / stats.with_targets;
        stats.mean_edges = edges / stats.with_targets;
    }
    if (target_total > 0)
        stats.unreachable_rate = static_cast<double>(unreachable) / static_cast<double>(target_total);
    log("sentences=" + std::to_string(stats.sentences) +
        " with_targets=" + std::to_string(stats.with_targets) +
        " mean_nodes=" + fmt(stats.mean_nodes) + " mean_edges=" + fmt(stats.mean_edges) +
        " unreachable_rate=" + fmt(stats.unreachable_rate));
    return stats;
}

TrainResult cmd_train(const RunConfig& cfg, const LogSink& log) {
    Session session = load_session(cfg, /*need_kb=*/false);
    meta::Model model = build_model_for(cfg, session);
    Adam opt(cfg.beta, 0.9, 0.999, 1e-8, cfg.weight_decay);

    std::vector<std::string> arm_users;
    if (cfg.mode == Mode::arm) {
        arm_users = train_users(cfg, session.corpus);
        session.corpus.user_splits["train"] = arm_users;
    }

    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
    TrainResult result;
    double task_ms = 0.0;
    long tasks = 0;
    const int val_every = cfg.epochs >= 5 ? cfg.epochs / 5 : 0;

    for (int step = 1; step <= cfg.epochs; ++step) {
        const auto t0 = Clock::now();
        std::vector<meta::Episode> batch;
        for (int b = 0; b < cfg.meta_batch; ++b) {
            meta::Episode ep;
            if (cfg.mode == Mode::arm)
                ep = data::sample_user_task(session.corpus, "train", cfg.context_size, rng,
                                            session.label_universe);
            else
                ep = data::sample_episode(session.corpus, "train", cfg.n_way, cfg.k_shot,
                                          cfg.queries, rng);
            session.attach_graphs(ep);
            batch.push_back(std::move(ep));
        }
        double loss = 0.0;
        try {
            switch (cfg.mode) {
                case Mode::maml:
                    loss = meta::maml_outer_step(model, batch, cfg.alpha, cfg.inner_steps, opt);
                    break;
                case Mode::protonet:
                    loss = meta::proto_train_step(model, batch, opt);
                    break;
                case Mode::arm:
                    loss = meta::arm_train_step(model, batch, opt, cfg.arm_context);
                    break;
            }
        } catch (const NumericError& e) {
            throw NumericError("step " + std::to_string(step) + ": " + e.what());
        }
        if (!std::isfinite(loss))
            throw NumericError("step " + std::to_string(step) + ": non-finite loss");
        task_ms += ms_since(t0);
        tasks += cfg.meta_batch;
        result.losses.push_back(loss);
        log("step=" + std::to_string(step) + " loss=" + fmt(loss));

        const bool has_val = cfg.mode == Mode::arm
                                 ? session.corpus.user_splits.count("val") > 0
                                 : session.corpus.label_splits.count("val") > 0;
        if (has_val && val_every > 0 && step % val_every == 0) {
            const double acc = validation_accuracy(cfg, session, model, 20,
                                                   0x76616cULL + static_cast<std::uint64_t>(step));
            result.val_accuracy.emplace_back(step, acc);
            log("step=" + std::to_string(step) + " val_acc=" + fmt(acc));
        }
    }

    result.time_per_task_ms = tasks > 0 ? task_ms / static_cast<double>(tasks) : 0.0;
    log("time_per_task_ms=" + fmt(result.time_per_task_ms));
    save_checkpoint(cfg.checkpoint, model.store, config_snapshot(cfg));
    return result;
}

EvalResult cmd_eval(const RunConfig& cfg, const LogSink& log) {
    Session session = load_session(cfg, /*need_kb=*/false);
    meta::Model model = build_model_for(cfg, session);
    Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    restore_into(model.store, ckpt.store);

    std::vector<double> acc;
    double task_ms = 0.0;
    std::mt19937_64 rng(cfg.seed ^ 0x6576616cULL);

    if (cfg.mode == Mode::arm) {
        auto it = session.corpus.user_splits.find("test");
        if (it == session.corpus.user_splits.end() || it->second.empty())
            throw DataError("no meta-test users in splits file");
        for (const auto& user : it->second) {
            const auto t0 = Clock::now();
            meta::Episode ep = user_task_from_docs(session, session.corpus.docs_with_user(user));
            session.attach_graphs(ep);
            acc.push_back(episode_accuracy(predict_episode(cfg, model, ep), ep.query));
            task_ms += ms_since(t0);
        }
    } else {
        for (int e = 0; e < cfg.eval_episodes; ++e) {
            const auto t0 = Clock::now();
            meta::Episode ep = data::sample_episode(session.corpus, "test", cfg.n_way, cfg.k_shot,
                                                    cfg.queries, rng);
            session.attach_graphs(ep);
            acc.push_back(episode_accuracy(predict_episode(cfg, model, ep), ep.query));
            task_ms += ms_since(t0);
        }
    }

    meta::EvalReport report = meta::summarize(acc);
    EvalResult out;
    out.mean_accuracy = report.mean_accuracy;
    out.ci95_halfwidth = report.ci95_halfwidth;
    out.episodes = static_cast<int>(acc.size());
    out.time_per_task_ms = acc.empty() ? 0.0 : task_ms / static_cast<double>(acc.size());
    log("episodes=" + std::to_string(out.episodes) + " mean_acc=" + fmt(out.mean_accuracy) +
        " ci95=" + fmt(out.ci95_halfwidth) + " time_per_task_ms=" + fmt(out.time_per_task_ms));
    return out;
}

}  // namespace kgml::run
