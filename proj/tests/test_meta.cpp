#include "kgml/meta.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace kgml;
using meta::Episode;
using meta::Item;
using meta::KgMode;
using meta::Model;
using meta::ModelConfig;

namespace {

ModelConfig off_config(int classes) {
    ModelConfig cfg;
    cfg.vocab_size = 12;
    cfg.d_word = 6;
    cfg.d_sent = 5;
    cfg.head_hidden = 8;
    cfg.head_classes = classes;
    cfg.kg = KgMode::off;
    return cfg;
}

Item item(std::vector<int> tokens, int label) {
    Item it;
    it.tokens = std::move(tokens);
    it.label = label;
    return it;
}

// 2-way episode whose classes are told apart by disjoint token sets.
Episode toy_episode(int queries_per_class = 2) {
    Episode ep;
    ep.way = 2;
    ep.shots = 1;
    ep.class_names = {"a", "b"};
    ep.support = {item({2, 3}, 0), item({8, 9}, 1)};
    for (int q = 0; q < queries_per_class; ++q) {
        ep.query.push_back(item({2, 3, 4}, 0));
        ep.query.push_back(item({8, 9, 10}, 1));
    }
    return ep;
}

std::vector<int> labels_of(const std::vector<Item>& items) {
    std::vector<int> out;
    for (const auto& it : items) out.push_back(it.label);
    return out;
}

double support_ce(const Model& model, const meta::HeadValues& head, const Mat& features,
                  const std::vector<int>& labels) {
    ad::Tape tape;
    std::map<std::string, ad::Value> leaves;
    for (const auto& [name, value] : head) leaves[name] = tape.constant(value);
    auto logits = meta::head_forward(tape, leaves, tape.constant(features));
    (void)model;
    return tape.value(tape.cross_entropy(logits, labels))(0, 0);
}

bool stores_equal(const ParameterStore& a, const ParameterStore& b) {
    if (a.all().size() != b.all().size()) return false;
    for (size_t i = 0; i < a.all().size(); ++i) {
        if (a.all()[i].name != b.all()[i].name) return false;
        if ((a.all()[i].value - b.all()[i].value).norm() != 0.0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("fused dimension bookkeeping per kg mode") {
    ModelConfig cfg = off_config(2);
    CHECK(cfg.fused_dim() == 5);
    cfg.kg = KgMode::full;
    cfg.gnn_dims = {4, 3};
    CHECK(cfg.fused_dim() == 5);
    cfg.kg = KgMode::concat_fusion;
    CHECK(cfg.fused_dim() == 8);
    cfg.arm_context = true;
    CHECK(cfg.head_input_dim() == 16);
}

TEST_CASE("builds sharing a seed agree on shared groups across kg modes") {
    ModelConfig with = off_config(2);
    with.kg = KgMode::full;
    with.gnn_dims = {4, 3};
    Model a = meta::build_model(with, 99);
    Model b = meta::build_model(off_config(2), 99);
    for (const auto& name : {"enc.embed", "enc.proj.w", "enc.proj.b"})
        CHECK((a.store.at(name).value - b.store.at(name).value).norm() == 0.0);
    for (const auto& name : meta::head_values(b))
        CHECK((a.store.at(name.first).value - name.second).norm() == 0.0);
}

TEST_CASE("embed_item output width matches fused_dim in every mode") {
    for (KgMode kg : {KgMode::full, KgMode::no_knn, KgMode::concat_fusion, KgMode::off}) {
        ModelConfig cfg = off_config(2);
        cfg.kg = kg;
        if (kg != KgMode::off) cfg.gnn_dims = {4, 3};
        Model m = meta::build_model(cfg, 7);
        Item it = item({2, 5}, 0);
        if (kg != KgMode::off) {
            it.has_graph = true;
            it.graph.nodes = {0, 1};
            it.graph.edges = {kb::Edge(0, 1)};
            it.graph.targets = {0, 1};
            it.graph.features = Mat::Ones(2, 4);
        }
        ad::Tape tape;
        Bound bound(tape);
        auto v = meta::embed_item(bound, m, it);
        CHECK(tape.value(v).cols() == cfg.fused_dim());
    }
}

TEST_CASE("item without a graph uses a zero graph embedding") {
    ModelConfig cfg = off_config(2);
    cfg.kg = KgMode::full;
    cfg.gnn_dims = {4, 3};
    Model m = meta::build_model(cfg, 13);

    Item no_graph = item({2, 5}, 0);
    Item zero_graph = no_graph;
    zero_graph.has_graph = true;
    zero_graph.graph.nodes = {0};
    zero_graph.graph.targets = {0};
    zero_graph.graph.features = Mat::Zero(1, 4);  // isolated zero node -> zero readout

    Mat a = meta::fused_features(m, {no_graph});
    Mat b = meta::fused_features(m, {zero_graph});
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("maml_adapt with zero steps is the identity") {
    Model m = meta::build_model(off_config(2), 3);
    Episode ep = toy_episode();
    Mat feats = meta::fused_features(m, ep.support);
    auto adapted = meta::maml_adapt(m, feats, labels_of(ep.support), 0.1, 0);
    for (const auto& [name, value] : meta::head_values(m))
        CHECK((adapted.at(name) - value).norm() == 0.0);
}

TEST_CASE("one adaptation step equals a hand-built SGD step") {
    Model m = meta::build_model(off_config(2), 5);
    Episode ep = toy_episode();
    Mat feats = meta::fused_features(m, ep.support);
    const std::vector<int> labels = labels_of(ep.support);
    const double alpha = 0.05;

    auto adapted = meta::maml_adapt(m, feats, labels, alpha, 1);

    ad::Tape tape;
    std::map<std::string, ad::Value> leaves;
    for (const auto& [name, value] : meta::head_values(m)) leaves[name] = tape.leaf(value, true);
    auto loss = tape.cross_entropy(meta::head_forward(tape, leaves, tape.constant(feats)), labels);
    tape.backward(loss);
    for (const auto& [name, leaf] : leaves) {
        Mat expect = tape.value(leaf) - alpha * tape.grad(leaf);
        CHECK((adapted.at(name) - expect).norm() == 0.0);
    }
}

TEST_CASE("adaptation lowers the support loss and touches nothing else") {
    Model m = meta::build_model(off_config(2), 11);
    Episode ep = toy_episode();
    Mat feats = meta::fused_features(m, ep.support);
    const std::vector<int> labels = labels_of(ep.support);

    Model snapshot = m;
    auto before = meta::head_values(m);
    auto adapted = meta::maml_adapt(m, feats, labels, 0.1, 10);

    CHECK(support_ce(m, adapted, feats, labels) < support_ce(m, before, feats, labels));
    CHECK(stores_equal(m.store, snapshot.store));  // encoder + knowledge + head init untouched
}

TEST_CASE("outer step on identical episodes matches the single-episode step bitwise") {
    Episode ep = toy_episode();
    Model m1 = meta::build_model(off_config(2), 21);
    Model m2 = meta::build_model(off_config(2), 21);
    Adam o1(1e-3), o2(1e-3);
    const double l1 = meta::maml_outer_step(m1, {ep}, 0.05, 3, o1);
    const double l2 = meta::maml_outer_step(m2, {ep, ep}, 0.05, 3, o2);
    CHECK(l1 == l2);
    CHECK(stores_equal(m1.store, m2.store));
}

TEST_CASE("outer steps reduce the query loss on a fixed task") {
    Model m = meta::build_model(off_config(2), 33);
    Adam opt(5e-3);
    Episode ep = toy_episode();
    double first = meta::maml_outer_step(m, {ep}, 0.1, 3, opt);
    double last = first;
    for (int s = 0; s < 60; ++s) last = meta::maml_outer_step(m, {ep}, 0.1, 3, opt);
    CHECK(last < first);
    CHECK(std::isfinite(last));
}

TEST_CASE("maml_predict solves a separable task") {
    Model m = meta::build_model(off_config(2), 41);
    Adam opt(5e-3);
    Episode ep = toy_episode();
    for (int s = 0; s < 150; ++s) meta::maml_outer_step(m, {ep}, 0.1, 5, opt);
    auto pred = meta::maml_predict(m, ep, 0.1, 5);
    CHECK(pred == labels_of(ep.query));
}

TEST_CASE("proto_predict is uniform for equidistant prototypes") {
    Mat protos(2, 2);
    protos << 1, 0, -1, 0;
    Eigen::RowVectorXd q(2);
    q << 0, 5;
    auto p = meta::proto_predict(protos, q);
    CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("proto_predict at a prototype concentrates there") {
    Mat protos(2, 1);
    protos << 0, 1;
    Eigen::RowVectorXd q(1);
    q << 0;
    auto p = meta::proto_predict(protos, q);
    // squared distances 0 and 1 -> softmax(0, -1)
    const double e = std::exp(-1.0);
    CHECK(p(0) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
}

TEST_CASE("proto_predict reproduces softmax(-1, -4)") {
    Mat protos(2, 1);
    protos << 1, 2;
    Eigen::RowVectorXd q(1);
    q << 0;
    auto p = meta::proto_predict(protos, q);
    const double z = std::exp(-1.0) + std::exp(-4.0);
    CHECK(p(0) == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(std::exp(-4.0) / z).epsilon(1e-12));
    CHECK(p(0) == doctest::Approx(0.95257412682243336).epsilon(1e-9));
}

TEST_CASE("proto_predict is a distribution and its argmax survives rescaling") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 100; ++trial) {
        Mat protos(3, 4);
        Eigen::RowVectorXd q(4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) protos(i, j) = u(rng);
        for (int j = 0; j < 4; ++j) q(j) = u(rng);
        auto p = meta::proto_predict(protos, q);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);

        // scaling the whole space scales every squared distance by s^2 > 0
        const double s = 1.7;
        auto ps = meta::proto_predict(Mat(protos * s), Eigen::RowVectorXd(q * s));
        int a, b;
        p.maxCoeff(&a);
        ps.maxCoeff(&b);
        CHECK(a == b);
    }
}

TEST_CASE("1-shot prototypes are the support embeddings themselves") {
    ModelConfig cfg = off_config(0);
    Model m = meta::build_model(cfg, 61);
    Episode ep = toy_episode();
    // a query with exactly a support's tokens sits at distance zero from its
    // class prototype and is classified accordingly
    ep.query = {item({2, 3}, 0), item({8, 9}, 1)};
    auto pred = meta::proto_predict_episode(m, ep);
    CHECK(pred == std::vector<int>{0, 1});
}

TEST_CASE("proto training reduces the episodic loss") {
    ModelConfig cfg = off_config(0);
    Model m = meta::build_model(cfg, 71);
    Adam opt(1e-2);
    Episode ep = toy_episode();
    double first = meta::proto_train_step(m, {ep}, opt);
    double last = first;
    for (int s = 0; s < 40; ++s) last = meta::proto_train_step(m, {ep}, opt);
    CHECK(last < first);
}

TEST_CASE("arm_context is the mean and ignores list order") {
    Mat a(1, 3), b(1, 3), c(1, 3);
    a << 1, 2, 3;
    b << 5, -1, 0;
    c << 0, 8, -6;
    Mat mean = meta::arm_context({a, b, c});
    Mat expect(1, 3);
    expect << 2, 3, -1;
    CHECK((mean - expect).norm() == 0.0);
    CHECK((meta::arm_context({c, a, b}) - mean).norm() == 0.0);
    CHECK_THROWS_AS(meta::arm_context({}), DataError);
}

TEST_CASE("arm training with context reduces loss and stays finite") {
    ModelConfig cfg = off_config(2);
    cfg.arm_context = true;
    Model m = meta::build_model(cfg, 81);
    Episode ep;
    ep.way = 2;
    ep.query = {item({2, 3}, 0), item({8, 9}, 1), item({2, 4}, 0), item({8, 10}, 1)};
    Adam opt(1e-2);
    double first = meta::arm_train_step(m, {ep}, opt, true);
    double last = first;
    for (int s = 0; s < 40; ++s) last = meta::arm_train_step(m, {ep}, opt, true);
    CHECK(std::isfinite(last));
    CHECK(last < first);
    auto pred = meta::arm_predict_episode(m, ep, true);
    CHECK(pred.size() == ep.query.size());
}

TEST_CASE("summarize basic statistics") {
    auto r = meta::summarize({1.0, 1.0, 1.0});
    CHECK(r.mean_accuracy == 1.0);
    CHECK(r.ci95_halfwidth == 0.0);
    auto r2 = meta::summarize({0.0, 1.0});
    CHECK(r2.mean_accuracy == doctest::Approx(0.5));
    CHECK(r2.ci95_halfwidth > 0.0);
    CHECK_THROWS_AS(meta::summarize({}), DataError);
}
