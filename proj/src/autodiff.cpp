#include "kgml/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace kgml::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
    throw NumericError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                       " and " + shape_str(b));
}

Mat softmax_rows(const Mat& x) {
    Mat y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double m = x.row(i).maxCoeff();
        Eigen::RowVectorXd e = (x.row(i).array() - m).exp();
        y.row(i) = e / e.sum();
    }
    return y;
}

}  // namespace

Value Tape::push(Op op, std::vector<int> in, Mat val, std::vector<int> idx, double scalar) {
    Node n;
    n.op = op;
    n.in = std::move(in);
    n.val = std::move(val);
    n.idx = std::move(idx);
    n.scalar = scalar;
    n.needs_grad = false;
    for (int i : n.in) {
        if (i < 0 || i >= static_cast<int>(nodes_.size()))
            throw NumericError("tape: op input out of order (possible cycle)");
        n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    }
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Value v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw NumericError("tape: invalid value handle");
}

const Tape::Node& Tape::node(Value v) const {
    check(v);
    return nodes_[v.id];
}

Value Tape::leaf(Mat value, bool requires_grad) {
    if (value.size() == 0) throw NumericError("leaf: empty tensor");
    Value v = push(Op::Leaf, {}, std::move(value));
    nodes_[v.id].needs_grad = requires_grad;
    return v;
}

Value Tape::matmul(Value a, Value b) {
    const Mat& A = node(a).val;
    const Mat& B = node(b).val;
    if (A.cols() != B.rows()) shape_error("matmul", A, B);
    return push(Op::MatMul, {a.id, b.id}, A * B);
}

Value Tape::add(Value a, Value b) {
    const Mat& A = node(a).val;
    const Mat& B = node(b).val;
    if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("add", A, B);
    return push(Op::Add, {a.id, b.id}, A + B);
}

Value Tape::add_rowvec(Value a, Value bias) {
    const Mat& A = node(a).val;
    const Mat& B = node(bias).val;
    if (B.rows() != 1 || A.cols() != B.cols()) shape_error("add_rowvec", A, B);
    Mat out = A;
    out.rowwise() += B.row(0);
    return push(Op::AddRowVec, {a.id, bias.id}, std::move(out));
}

Value Tape::mul(Value a, Value b) {
    const Mat& A = node(a).val;
    const Mat& B = node(b).val;
    if (A.rows() != B.rows() || A.cols() != B.cols()) shape_error("mul", A, B);
    return push(Op::Mul, {a.id, b.id}, A.cwiseProduct(B));
}

Value Tape::scale(Value a, double s) {
    return push(Op::Scale, {a.id}, node(a).val * s, {}, s);
}

Value Tape::relu(Value a) {
    return push(Op::Relu, {a.id}, node(a).val.cwiseMax(0.0));
}

Value Tape::softmax(Value a) {
    return push(Op::Softmax, {a.id}, softmax_rows(node(a).val));
}

Value Tape::mean_rows(Value a) {
    const Mat& A = node(a).val;
    Mat out = A.colwise().sum() / static_cast<double>(A.rows());
    return push(Op::MeanRows, {a.id}, std::move(out));
}

Value Tape::concat_cols(Value a, Value b) {
    const Mat& A = node(a).val;
    const Mat& B = node(b).val;
    if (A.rows() != B.rows()) shape_error("concat_cols", A, B);
    Mat out(A.rows(), A.cols() + B.cols());
    out << A, B;
    return push(Op::ConcatCols, {a.id, b.id}, std::move(out));
}

Value Tape::concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw NumericError("concat_rows: no inputs");
    Eigen::Index rows = 0;
    const Eigen::Index cols = node(parts[0]).val.cols();
    for (Value p : parts) {
        if (node(p).val.cols() != cols)
            shape_error("concat_rows", node(parts[0]).val, node(p).val);
        rows += node(p).val.rows();
    }
    Mat out(rows, cols);
    std::vector<int> in;
    Eigen::Index r = 0;
    for (Value p : parts) {
        const Mat& P = node(p).val;
        out.middleRows(r, P.rows()) = P;
        r += P.rows();
        in.push_back(p.id);
    }
    return push(Op::ConcatRows, std::move(in), std::move(out));
}

Value Tape::broadcast_rows(Value a, int n) {
    const Mat& A = node(a).val;
    if (A.rows() != 1) throw NumericError("broadcast_rows: input must be a row, got " + shape_str(A));
    if (n < 1) throw NumericError("broadcast_rows: n must be positive");
    Mat out = A.replicate(n, 1);
    return push(Op::BroadcastRows, {a.id}, std::move(out));
}

Value Tape::sqdist(Value a, Value b) {
    const Mat& A = node(a).val;
    const Mat& B = node(b).val;
    if (A.cols() != B.cols()) shape_error("sqdist", A, B);
    Mat out(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j)
            out(i, j) = (A.row(i) - B.row(j)).squaredNorm();
    return push(Op::SqDist, {a.id, b.id}, std::move(out));
}

Value Tape::rows_mean(Value table, const std::vector<int>& row_ids) {
    const Mat& T = node(table).val;
    if (row_ids.empty()) throw NumericError("rows_mean: empty row selection");
    Mat out = Mat::Zero(1, T.cols());
    for (int r : row_ids) {
        if (r < 0 || r >= T.rows())
            throw NumericError("rows_mean: row " + std::to_string(r) + " out of range for " + shape_str(T));
        out.row(0) += T.row(r);
    }
    out /= static_cast<double>(row_ids.size());
    return push(Op::RowsMean, {table.id}, std::move(out), row_ids);
}

Value Tape::cross_entropy(Value logits, const std::vector<int>& labels) {
    const Mat& L = node(logits).val;
    if (static_cast<Eigen::Index>(labels.size()) != L.rows())
        throw NumericError("cross_entropy: " + std::to_string(labels.size()) +
                           " labels for logits " + shape_str(L));
    double total = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= L.cols())
            throw NumericError("cross_entropy: label " + std::to_string(y) + " out of range");
        const double m = L.row(i).maxCoeff();
        const double lse = m + std::log((L.row(i).array() - m).exp().sum());
        total += lse - L(i, y);
    }
    Mat out(1, 1);
    out(0, 0) = total / static_cast<double>(L.rows());
    return push(Op::CrossEntropy, {logits.id}, std::move(out), labels);
}

Value Tape::sum(Value a) {
    Mat out(1, 1);
    out(0, 0) = node(a).val.sum();
    return push(Op::Sum, {a.id}, std::move(out));
}

const Mat& Tape::value(Value v) const { return node(v).val; }

const Mat& Tape::grad(Value v) const {
    const Node& n = node(v);
    if (n.grad.size() == 0)
        throw NumericError("grad: no gradient recorded (run backward first)");
    return n.grad;
}

void Tape::backward(Value loss_node) {
    const Node& loss = node(loss_node);
    if (loss.val.rows() != 1 || loss.val.cols() != 1)
        throw NumericError("backward: loss must be scalar, got " + shape_str(loss.val));

    // Mark the subgraph the loss depends on; everything else keeps stale grads cleared.
    std::vector<char> reach(nodes_.size(), 0);
    reach[loss_node.id] = 1;
    for (int i = loss_node.id; i >= 0; --i) {
        if (!reach[i]) continue;
        for (int j : nodes_[i].in) reach[j] = 1;
    }
    for (auto& n : nodes_)
        n.grad = n.needs_grad ? Mat::Zero(n.val.rows(), n.val.cols()) : Mat();
    for (size_t i = 0; i < nodes_.size(); ++i)
        if (reach[i] && nodes_[i].needs_grad && nodes_[i].grad.size() == 0)
            nodes_[i].grad = Mat::Zero(nodes_[i].val.rows(), nodes_[i].val.cols());

    if (!loss.needs_grad) return;  // loss does not depend on any parameter
    nodes_[loss_node.id].grad(0, 0) = 1.0;

    for (int i = loss_node.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!reach[i] || !n.needs_grad || n.grad.size() == 0) continue;
        const Mat& g = n.grad;
        auto acc = [&](int in_id, const Mat& contrib) {
            Node& p = nodes_[in_id];
            if (p.needs_grad) p.grad += contrib;
        };
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Mat& A = nodes_[n.in[0]].val;
                const Mat& B = nodes_[n.in[1]].val;
                acc(n.in[0], g * B.transpose());
                acc(n.in[1], A.transpose() * g);
                break;
            }
            case Op::Add:
                acc(n.in[0], g);
                acc(n.in[1], g);
                break;
            case Op::AddRowVec:
                acc(n.in[0], g);
                acc(n.in[1], g.colwise().sum());
                break;
            case Op::Mul:
                acc(n.in[0], g.cwiseProduct(nodes_[n.in[1]].val));
                acc(n.in[1], g.cwiseProduct(nodes_[n.in[0]].val));
                break;
            case Op::Scale:
                acc(n.in[0], g * n.scalar);
                break;
            case Op::Relu: {
                Mat m = (n.val.array() > 0.0).cast<double>();
                acc(n.in[0], g.cwiseProduct(m));
                break;
            }
            case Op::Softmax: {
                const Mat& y = n.val;
                Mat dx(y.rows(), y.cols());
                for (Eigen::Index r = 0; r < y.rows(); ++r) {
                    const double dot = g.row(r).dot(y.row(r));
                    dx.row(r) = y.row(r).cwiseProduct(((g.row(r).array() - dot).matrix()));
                }
                acc(n.in[0], dx);
                break;
            }
            case Op::MeanRows: {
                const Eigen::Index rows = nodes_[n.in[0]].val.rows();
                Mat dx = g.replicate(rows, 1) / static_cast<double>(rows);
                acc(n.in[0], dx);
                break;
            }
            case Op::ConcatCols: {
                const Eigen::Index ca = nodes_[n.in[0]].val.cols();
                acc(n.in[0], g.leftCols(ca));
                acc(n.in[1], g.rightCols(g.cols() - ca));
                break;
            }
            case Op::ConcatRows: {
                Eigen::Index r = 0;
                for (int in_id : n.in) {
                    const Eigen::Index rows = nodes_[in_id].val.rows();
                    acc(in_id, g.middleRows(r, rows));
                    r += rows;
                }
                break;
            }
            case Op::BroadcastRows:
                acc(n.in[0], g.colwise().sum());
                break;
            case Op::SqDist: {
                const Mat& A = nodes_[n.in[0]].val;
                const Mat& B = nodes_[n.in[1]].val;
                Mat dA = Mat::Zero(A.rows(), A.cols());
                Mat dB = Mat::Zero(B.rows(), B.cols());
                for (Eigen::Index r = 0; r < A.rows(); ++r)
                    for (Eigen::Index c = 0; c < B.rows(); ++c) {
                        Eigen::RowVectorXd diff = 2.0 * g(r, c) * (A.row(r) - B.row(c));
                        dA.row(r) += diff;
                        dB.row(c) -= diff;
                    }
                acc(n.in[0], dA);
                acc(n.in[1], dB);
                break;
            }
            case Op::RowsMean: {
                Node& p = nodes_[n.in[0]];
                if (p.needs_grad) {
                    const double inv = 1.0 / static_cast<double>(n.idx.size());
                    for (int r : n.idx) p.grad.row(r) += g.row(0) * inv;
                }
                break;
            }
            case Op::CrossEntropy: {
                const Mat& L = nodes_[n.in[0]].val;
                Mat p = softmax_rows(L);
                for (Eigen::Index r = 0; r < L.rows(); ++r) p(r, n.idx[r]) -= 1.0;
                acc(n.in[0], p * (g(0, 0) / static_cast<double>(L.rows())));
                break;
            }
            case Op::Sum: {
                const Mat& A = nodes_[n.in[0]].val;
                acc(n.in[0], Mat::Constant(A.rows(), A.cols(), g(0, 0)));
                break;
            }
        }
    }
}

}  // namespace kgml::ad
