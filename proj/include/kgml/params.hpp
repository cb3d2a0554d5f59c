#pragma once

#include "kgml/autodiff.hpp"
#include "kgml/tensor.hpp"

#include <initializer_list>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgml {

/// Parameter groups. `encoder` holds the sentence-encoder weights shared
/// across tasks, `head` the task-specific classifier adapted per episode,
/// `knowledge` the GNN + fusion weights shared globally.
enum class Group { encoder, head, knowledge };

const char* group_name(Group g);
Group group_from_name(const std::string& s);

struct Param {
    std::string name;
    Group group;
    Mat value;
    bool trainable = true;
};

/// Named tensors with fixed group membership. Insertion order is stable and
/// defines the deterministic iteration order used everywhere (init, Adam,
/// checkpointing).
class ParameterStore {
public:
    void add(const std::string& name, Group group, Mat value, bool trainable = true);
    bool has(const std::string& name) const;
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;

    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }
    /// Names of trainable parameters in the given group, insertion order.
    std::vector<std::string> names(Group group) const;

private:
    std::vector<Param> params_;
    std::unordered_map<std::string, size_t> index_;
};

/// Tape leaves for a set of parameters, keyed by name. Collecting gradients
/// after backward() yields a GradMap ready for an optimizer step.
class Bound {
public:
    Bound(ad::Tape& tape) : tape_(&tape) {}

    /// Creates a leaf holding the parameter's current value.
    ad::Value bind(const ParameterStore& store, const std::string& name,
                   bool requires_grad = true);
    /// Binds every trainable parameter in the given groups, store order.
    void bind_groups(const ParameterStore& store, std::initializer_list<Group> groups,
                     bool requires_grad = true);

    ad::Value at(const std::string& name) const;
    bool has(const std::string& name) const { return leaves_.count(name) > 0; }
    ad::Tape& tape() const { return *tape_; }

    /// Gradients of every bound leaf created with requires_grad.
    ad::GradMap grads() const;

private:
    ad::Tape* tape_;
    std::map<std::string, ad::Value> leaves_;
    std::vector<std::string> grad_names_;
};

/// p <- p - lr * g for exactly the parameters named in `grads`.
void sgd_step(ParameterStore& params, const ad::GradMap& grads, double lr);

/// Adam with bias correction and decoupled weight decay. Moment state is
/// allocated lazily per parameter name and persists across steps.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
         double weight_decay = 0.0);

    void step(ParameterStore& params, const ad::GradMap& grads);

    double lr() const { return lr_; }

private:
    struct State {
        Mat m, v;
        long t = 0;
    };
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    std::unordered_map<std::string, State> state_;
};

}  // namespace kgml
