#include "kgml/params.hpp"

#include <cmath>

namespace kgml {

const char* group_name(Group g) {
    switch (g) {
        case Group::encoder: return "encoder";
        case Group::head: return "head";
        case Group::knowledge: return "knowledge";
    }
    return "?";
}

Group group_from_name(const std::string& s) {
    if (s == "encoder") return Group::encoder;
    if (s == "head") return Group::head;
    if (s == "knowledge") return Group::knowledge;
    throw DataError("unknown parameter group: " + s);
}

void ParameterStore::add(const std::string& name, Group group, Mat value, bool trainable) {
    if (index_.count(name)) throw DataError("duplicate parameter name: " + name);
    index_[name] = params_.size();
    params_.push_back(Param{name, group, std::move(value), trainable});
}

bool ParameterStore::has(const std::string& name) const { return index_.count(name) > 0; }

Param& ParameterStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return params_[it->second];
}

const Param& ParameterStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return params_[it->second];
}

std::vector<std::string> ParameterStore::names(Group group) const {
    std::vector<std::string> out;
    for (const auto& p : params_)
        if (p.group == group && p.trainable) out.push_back(p.name);
    return out;
}

ad::Value Bound::bind(const ParameterStore& store, const std::string& name, bool requires_grad) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    ad::Value v = tape_->leaf(store.at(name).value, requires_grad);
    leaves_[name] = v;
    if (requires_grad) grad_names_.push_back(name);
    return v;
}

void Bound::bind_groups(const ParameterStore& store, std::initializer_list<Group> groups,
                        bool requires_grad) {
    for (const auto& p : store.all())
        for (Group g : groups)
            if (p.group == g && p.trainable) bind(store, p.name, requires_grad);
}

ad::Value Bound::at(const std::string& name) const {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw DataError("parameter not bound to tape: " + name);
    return it->second;
}

ad::GradMap Bound::grads() const {
    ad::GradMap out;
    for (const auto& name : grad_names_) out[name] = tape_->grad(leaves_.at(name));
    return out;
}

void sgd_step(ParameterStore& params, const ad::GradMap& grads, double lr) {
    if (lr <= 0.0) throw NumericError("sgd_step: learning rate must be positive");
    for (const auto& [name, g] : grads) {
        Param& p = params.at(name);
        if (p.value.rows() != g.rows() || p.value.cols() != g.cols())
            throw NumericError("sgd_step: gradient shape " + shape_str(g) +
                               " != parameter shape " + shape_str(p.value) + " for " + name);
        p.value -= lr * g;
    }
}

Adam::Adam(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
    if (lr <= 0.0) throw NumericError("adam: learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw NumericError("adam: betas must lie in [0, 1)");
    if (eps <= 0.0) throw NumericError("adam: eps must be positive");
    if (weight_decay < 0.0) throw NumericError("adam: weight decay must be nonnegative");
}

void Adam::step(ParameterStore& params, const ad::GradMap& grads) {
    // Iterate parameters in store order so state creation is deterministic.
    for (auto& p : params.all()) {
        auto it = grads.find(p.name);
        if (it == grads.end()) continue;
        const Mat& g = it->second;
        if (p.value.rows() != g.rows() || p.value.cols() != g.cols())
            throw NumericError("adam: gradient shape " + shape_str(g) +
                               " != parameter shape " + shape_str(p.value) + " for " + p.name);
        State& s = state_[p.name];
        if (s.t == 0) {
            s.m = Mat::Zero(g.rows(), g.cols());
            s.v = Mat::Zero(g.rows(), g.cols());
        }
        ++s.t;
        s.m = beta1_ * s.m + (1.0 - beta1_) * g;
        s.v = beta2_ * s.v + (1.0 - beta2_) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
        Mat mhat = s.m / bc1;
        Mat vhat = s.v / bc2;
        if (weight_decay_ > 0.0) p.value -= lr_ * weight_decay_ * p.value;
        Mat denom = (vhat.cwiseSqrt().array() + eps_).matrix();
        p.value -= lr_ * mhat.cwiseQuotient(denom);
    }
}

}  // namespace kgml
