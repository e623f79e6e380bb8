#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "lhcm/common.hpp"

// Minimal tape-based reverse-mode differentiation over dense matrices.
// Every operation allocates a node holding its value and an adjoint
// closure; backward() walks the tape in reverse topological order.
namespace lhcm::ad {

struct Node {
    Eigen::MatrixXd val;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backprop;

    void accumulate(const Eigen::MatrixXd& g);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    const Eigen::MatrixXd& value() const { return n_->val; }
    const Eigen::MatrixXd& grad() const;
    std::shared_ptr<Node> node() const { return n_; }
    bool valid() const { return n_ != nullptr; }
    Eigen::Index rows() const { return n_->val.rows(); }
    Eigen::Index cols() const { return n_->val.cols(); }

    // In-place value update for persistent parameters (tape-free).
    Eigen::MatrixXd& mutable_value() { return n_->val; }

private:
    std::shared_ptr<Node> n_;
};

Var param(Eigen::MatrixXd v);     // leaf with gradient
Var constant(Eigen::MatrixXd v);  // leaf without gradient
Var scalar(double v);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);          // same shape
Var sub(const Var& a, const Var& b);          // same shape
Var mul(const Var& a, const Var& b);          // elementwise, same shape
Var add_rowvec(const Var& a, const Var& b);   // b is 1 x c, broadcast over rows
Var mul_rowvec(const Var& a, const Var& b);   // b is 1 x c, broadcast over rows
Var transpose(const Var& a);
Var scale(const Var& a, double s);
Var add_const(const Var& a, double c);
Var sigmoid(const Var& a);
Var tanh_(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var exp_(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);   // 1x1
Var mean(const Var& a);  // 1x1
Var slice(const Var& a, int r0, int nrows, int c0, int ncols);
Var concat_cols(const std::vector<Var>& parts);
Var logsumexp(const Var& a);  // over all entries, 1x1

/// out(i, j) = a(perms[j][i], j); used to build product-of-marginals samples.
Var shuffle_rows_per_col(const Var& a, const std::vector<std::vector<int>>& perms);

/// Reverse pass from a 1x1 root. Zeroes the gradients of every reachable
/// node first, so persistent parameters need no explicit zero_grad.
void backward(const Var& root);

class Adam {
public:
    Adam(std::vector<Var> params, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8);
    void step();
    /// Applies the given gradients instead of the parameters' own.
    void step_with(const std::vector<Eigen::MatrixXd>& grads);
    const std::vector<Var>& params() const { return params_; }

private:
    std::vector<Var> params_;
    std::vector<Eigen::MatrixXd> m_, v_;
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
};

// Parameter (de)serialization helpers.
std::vector<double> flatten(const std::vector<Var>& params);
void unflatten(const std::vector<double>& data, std::vector<Var>& params);

}  // namespace lhcm::ad
