#include "kgml/autodiff.hpp"
#include "kgml/params.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace kgml;

namespace {

Mat row(std::initializer_list<double> xs) {
    Mat m(1, static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) m(0, i++) = x;
    return m;
}

// Central finite difference of a scalar-valued function of one tensor entry.
template <typename F>
double fd(F&& f, Mat& x, Eigen::Index i, Eigen::Index j, double eps = 1e-5) {
    const double keep = x(i, j);
    x(i, j) = keep + eps;
    const double hi = f();
    x(i, j) = keep - eps;
    const double lo = f();
    x(i, j) = keep;
    return (hi - lo) / (2.0 * eps);
}

}  // namespace

TEST_CASE("relu forward") {
    ad::Tape t;
    ad::Value x = t.leaf(row({-1.0, 2.0}));
    CHECK(t.value(t.relu(x)) == row({0.0, 2.0}));
}

TEST_CASE("softmax of equal logits is uniform") {
    ad::Tape t;
    ad::Value x = t.leaf(row({0.0, 0.0}));
    Mat y = t.value(t.softmax(x));
    CHECK(y(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul identity") {
    std::mt19937_64 rng(3);
    Mat a = rand_uniform(3, 3, 1.0, rng);
    ad::Tape t;
    ad::Value out = t.matmul(t.leaf(Mat::Identity(3, 3)), t.leaf(a));
    CHECK(t.value(out) == a);
}

TEST_CASE("matmul shape mismatch names shapes") {
    ad::Tape t;
    ad::Value a = t.leaf(Mat::Zero(2, 3));
    ad::Value b = t.leaf(Mat::Zero(2, 3));
    CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("matmul"), NumericError);
}

TEST_CASE("backward of sum is ones") {
    ad::Tape t;
    ad::Value p = t.leaf(row({1.0, 2.0, 3.0}), true);
    t.backward(t.sum(p));
    CHECK(t.grad(p) == row({1.0, 1.0, 1.0}));
}

TEST_CASE("backward of p*p is 2p") {
    ad::Tape t;
    ad::Value p = t.leaf(row({2.0}), true);
    t.backward(t.sum(t.mul(p, p)));
    CHECK(t.grad(p)(0, 0) == 4.0);
}

TEST_CASE("non-scalar loss rejected") {
    ad::Tape t;
    ad::Value p = t.leaf(row({1.0, 2.0}), true);
    CHECK_THROWS_AS(t.backward(p), NumericError);
}

TEST_CASE("two-layer MLP gradients match finite differences") {
    std::mt19937_64 rng(11);
    Mat x = rand_uniform(4, 3, 1.0, rng);
    Mat w1 = rand_uniform(3, 5, 1.0, rng);
    Mat b1 = rand_uniform(1, 5, 0.5, rng);
    Mat w2 = rand_uniform(5, 2, 1.0, rng);
    std::vector<int> labels = {0, 1, 1, 0};

    auto loss_fn = [&]() {
        ad::Tape t;
        ad::Value h = t.relu(t.add_rowvec(t.matmul(t.leaf(x), t.leaf(w1)), t.leaf(b1)));
        ad::Value logits = t.matmul(h, t.leaf(w2));
        return t.value(t.cross_entropy(logits, labels))(0, 0);
    };

    ad::Tape t;
    ad::Value vw1 = t.leaf(w1, true), vb1 = t.leaf(b1, true), vw2 = t.leaf(w2, true);
    ad::Value h = t.relu(t.add_rowvec(t.matmul(t.leaf(x), vw1), vb1));
    t.backward(t.cross_entropy(t.matmul(h, vw2), labels));

    auto check_all = [&](Mat& param, ad::Value leaf) {
        for (Eigen::Index i = 0; i < param.rows(); ++i)
            for (Eigen::Index j = 0; j < param.cols(); ++j) {
                const double num = fd(loss_fn, param, i, j);
                const double ana = t.grad(leaf)(i, j);
                CHECK(std::abs(num - ana) <= 1e-4 * std::max(1.0, std::abs(num)));
            }
    };
    check_all(w1, vw1);
    check_all(b1, vb1);
    check_all(w2, vw2);
}

TEST_CASE("softmax, sqdist and mean_rows match finite differences") {
    std::mt19937_64 rng(17);
    Mat a = rand_uniform(3, 4, 1.0, rng);
    Mat b = rand_uniform(2, 4, 1.0, rng);

    auto loss_fn = [&]() {
        ad::Tape t;
        ad::Value d = t.sqdist(t.leaf(a), t.leaf(b));
        ad::Value s = t.softmax(t.scale(d, -1.0));
        return t.value(t.sum(t.mul(t.mean_rows(s), t.mean_rows(s))))(0, 0);
    };

    ad::Tape t;
    ad::Value va = t.leaf(a, true), vb = t.leaf(b, true);
    ad::Value s = t.softmax(t.scale(t.sqdist(va, vb), -1.0));
    t.backward(t.sum(t.mul(t.mean_rows(s), t.mean_rows(s))));

    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double num = fd(loss_fn, a, i, j);
            CHECK(std::abs(num - t.grad(va)(i, j)) <= 1e-4 * std::max(1.0, std::abs(num)));
        }
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const double num = fd(loss_fn, b, i, j);
            CHECK(std::abs(num - t.grad(vb)(i, j)) <= 1e-4 * std::max(1.0, std::abs(num)));
        }
}

TEST_CASE("rows_mean, concat and broadcast gradients match finite differences") {
    std::mt19937_64 rng(23);
    Mat table = rand_uniform(5, 3, 1.0, rng);
    Mat other = rand_uniform(1, 2, 1.0, rng);
    std::vector<int> ids = {0, 2, 2, 4};

    auto loss_fn = [&]() {
        ad::Tape t;
        ad::Value bag = t.rows_mean(t.leaf(table), ids);
        ad::Value cat = t.concat_cols(bag, t.leaf(other));
        ad::Value rep = t.broadcast_rows(cat, 3);
        return t.value(t.sum(t.relu(rep)))(0, 0);
    };

    ad::Tape t;
    ad::Value vt = t.leaf(table, true), vo = t.leaf(other, true);
    t.backward(t.sum(t.relu(t.broadcast_rows(t.concat_cols(t.rows_mean(vt, ids), vo), 3))));

    for (Eigen::Index i = 0; i < table.rows(); ++i)
        for (Eigen::Index j = 0; j < table.cols(); ++j) {
            const double num = fd(loss_fn, table, i, j);
            CHECK(std::abs(num - t.grad(vt)(i, j)) <= 1e-4 * std::max(1.0, std::abs(num)));
        }
    for (Eigen::Index j = 0; j < other.cols(); ++j) {
        const double num = fd(loss_fn, other, 0, j);
        CHECK(std::abs(num - t.grad(vo)(0, j)) <= 1e-4 * std::max(1.0, std::abs(num)));
    }
}

TEST_CASE("forward is deterministic") {
    std::mt19937_64 rng(29);
    Mat x = rand_uniform(6, 6, 1.0, rng);
    auto run = [&]() {
        ad::Tape t;
        ad::Value v = t.relu(t.matmul(t.leaf(x), t.leaf(x)));
        return t.value(t.sum(v))(0, 0);
    };
    const double first = run();
    for (int i = 0; i < 5; ++i) CHECK(run() == first);
}

TEST_CASE("sgd_step") {
    ParameterStore store;
    store.add("p", Group::head, row({1.0, 1.0}));
    ad::GradMap grads{{"p", row({1.0, 2.0})}};

    SUBCASE("basic arithmetic") {
        sgd_step(store, grads, 0.5);
        CHECK(store.at("p").value == row({0.5, 0.0}));
    }
    SUBCASE("zero gradient is a fixed point") {
        ad::GradMap zero{{"p", row({0.0, 0.0})}};
        sgd_step(store, zero, 0.5);
        CHECK(store.at("p").value == row({1.0, 1.0}));
    }
    SUBCASE("nonpositive lr rejected") {
        CHECK_THROWS_AS(sgd_step(store, grads, 0.0), NumericError);
        CHECK_THROWS_AS(sgd_step(store, grads, -1.0), NumericError);
    }
}

TEST_CASE("adam first step moves by about -lr") {
    ParameterStore store;
    store.add("p", Group::head, row({0.0}));
    Adam opt(1e-3);
    opt.step(store, {{"p", row({1.0})}});
    CHECK(store.at("p").value(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam with zero gradients and no decay leaves parameters unchanged") {
    ParameterStore store;
    store.add("p", Group::head, row({1.5, -2.0}));
    Adam opt(0.1);
    for (int i = 0; i < 10; ++i) opt.step(store, {{"p", row({0.0, 0.0})}});
    CHECK(store.at("p").value == row({1.5, -2.0}));
}

TEST_CASE("adam minimizes a scalar quadratic") {
    ParameterStore store;
    store.add("p", Group::head, row({1.0}));
    Adam opt(0.1);
    for (int i = 0; i < 100; ++i) {
        const double p = store.at("p").value(0, 0);
        opt.step(store, {{"p", row({2.0 * p})}});
    }
    CHECK(std::abs(store.at("p").value(0, 0)) < 0.1);
}

TEST_CASE("adam rejects invalid hyperparameters") {
    CHECK_THROWS_AS(Adam(0.0), NumericError);
    CHECK_THROWS_AS(Adam(0.1, 1.0), NumericError);
    CHECK_THROWS_AS(Adam(0.1, 0.9, -0.1), NumericError);
    CHECK_THROWS_AS(Adam(0.1, 0.9, 0.999, 0.0), NumericError);
    CHECK_THROWS_AS(Adam(0.1, 0.9, 0.999, 1e-8, -1.0), NumericError);
}

TEST_CASE("maml-style second use of adapted values") {
    // adapted leaves feed a fresh tape without touching the original one
    ad::Tape t1;
    ad::Value p = t1.leaf(row({1.0, -1.0}), true);
    t1.backward(t1.sum(t1.mul(p, p)));
    Mat adapted = t1.value(p) - 0.1 * t1.grad(p);

    ad::Tape t2;
    ad::Value q = t2.leaf(adapted, true);
    t2.backward(t2.sum(q));
    CHECK(t2.grad(q) == row({1.0, 1.0}));
    CHECK(t1.value(p) == row({1.0, -1.0}));
}
