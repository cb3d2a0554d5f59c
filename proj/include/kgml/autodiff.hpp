#pragma once

#include "kgml/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace kgml::ad {

/// Handle into a Tape. Only valid for the tape that created it.
struct Value {
    int id = -1;
};

/// Explicit-tape reverse-mode engine over dense double matrices.
///
/// Ops are appended in topological order by construction; backward() walks the
/// tape in reverse and accumulates gradients into every node that (transitively)
/// depends on a differentiable leaf. Values are immutable once recorded.
class Tape {
public:
    /// Records a leaf. Gradients are accumulated only for leaves created with
    /// requires_grad = true (and everything downstream of them).
    Value leaf(Mat value, bool requires_grad = false);
    Value constant(Mat value) { return leaf(std::move(value), false); }

    // -- primitive ops ------------------------------------------------------
    Value matmul(Value a, Value b);
    Value add(Value a, Value b);
    /// Adds a 1xD row vector to every row of an NxD matrix.
    Value add_rowvec(Value a, Value bias);
    Value mul(Value a, Value b);  // elementwise
    Value scale(Value a, double s);
    Value relu(Value a);
    /// Row-wise softmax.
    Value softmax(Value a);
    /// NxD -> 1xD column means.
    Value mean_rows(Value a);
    Value concat_cols(Value a, Value b);
    /// Stacks same-width blocks vertically.
    Value concat_rows(const std::vector<Value>& parts);
    /// Repeats a 1xD row n times.
    Value broadcast_rows(Value a, int n);
    /// Pairwise squared Euclidean distances between rows: (NxD, MxD) -> NxM.
    Value sqdist(Value a, Value b);
    /// Mean of selected rows of a matrix (duplicates counted). Powers the
    /// bag-of-embeddings lookup without materializing one-hot matmuls.
    Value rows_mean(Value table, const std::vector<int>& row_ids);
    /// Mean cross-entropy of row-wise softmax(logits) against integer labels.
    Value cross_entropy(Value logits, const std::vector<int>& labels);
    Value sum(Value a);  // scalar

    /// Reverse pass from a scalar loss. Clears any previous gradients.
    void backward(Value loss_node);

    const Mat& value(Value v) const;
    /// Gradient accumulated by the last backward(); zero matrix for reachable
    /// parameters the loss does not touch.
    const Mat& grad(Value v) const;

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    enum class Op {
        Leaf, MatMul, Add, AddRowVec, Mul, Scale, Relu, Softmax, MeanRows,
        ConcatCols, ConcatRows, BroadcastRows, SqDist, RowsMean, CrossEntropy, Sum,
    };

    struct Node {
        Op op;
        std::vector<int> in;
        Mat val;
        Mat grad;
        bool needs_grad = false;
        std::vector<int> idx;  // row ids / labels
        double scalar = 0.0;
    };

    Value push(Op op, std::vector<int> in, Mat val, std::vector<int> idx = {},
               double scalar = 0.0);
    const Node& node(Value v) const;
    void check(Value v) const;

    std::vector<Node> nodes_;
};

/// name -> gradient, keyed by parameter name.
using GradMap = std::map<std::string, Mat>;

}  // namespace kgml::ad
