#include "lhcm/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace lhcm::ad {

void Node::accumulate(const Eigen::MatrixXd& g) {
    if (!grad_alloc) {
        grad = Eigen::MatrixXd::Zero(val.rows(), val.cols());
        grad_alloc = true;
    }
    grad += g;
}

const Eigen::MatrixXd& Var::grad() const {
    if (!n_->grad_alloc) throw StructuralError("Var::grad: no gradient accumulated");
    return n_->grad;
}

namespace {

Var make(Eigen::MatrixXd val, std::vector<Var> inputs, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    bool needs = false;
    for (const auto& in : inputs) {
        n->inputs.push_back(in.node());
        needs = needs || in.node()->requires_grad;
    }
    n->requires_grad = needs;
    if (needs) n->backprop = std::move(backprop);
    return Var(n);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw StructuralError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var param(Eigen::MatrixXd v) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->requires_grad = true;
    return Var(n);
}

Var constant(Eigen::MatrixXd v) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    return Var(n);
}

Var scalar(double v) { return constant(Eigen::MatrixXd::Constant(1, 1, v)); }

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw StructuralError("matmul: inner dimension mismatch");
    return make(a.value() * b.value(), {a, b}, [](Node& n) {
        auto& A = n.inputs[0];
        auto& B = n.inputs[1];
        if (A->requires_grad) A->accumulate(n.grad * B->val.transpose());
        if (B->requires_grad) B->accumulate(A->val.transpose() * n.grad);
    });
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    return make(a.value() + b.value(), {a, b}, [](Node& n) {
        for (auto& in : n.inputs)
            if (in->requires_grad) in->accumulate(n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    return make(a.value() - b.value(), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate(n.grad);
        if (n.inputs[1]->requires_grad) n.inputs[1]->accumulate(-n.grad);
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate(n.grad.cwiseProduct(n.inputs[1]->val));
        if (n.inputs[1]->requires_grad) n.inputs[1]->accumulate(n.grad.cwiseProduct(n.inputs[0]->val));
    });
}

Var add_rowvec(const Var& a, const Var& b) {
    if (b.rows() != 1 || b.cols() != a.cols()) throw StructuralError("add_rowvec: bad bias shape");
    Eigen::MatrixXd out = a.value();
    out.rowwise() += b.value().row(0);
    return make(std::move(out), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate(n.grad);
        if (n.inputs[1]->requires_grad) n.inputs[1]->accumulate(n.grad.colwise().sum());
    });
}

Var mul_rowvec(const Var& a, const Var& b) {
    if (b.rows() != 1 || b.cols() != a.cols()) throw StructuralError("mul_rowvec: bad row shape");
    Eigen::MatrixXd out = a.value().array().rowwise() * b.value().row(0).array();
    return make(std::move(out), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate(n.grad.array().rowwise() * n.inputs[1]->val.row(0).array());
        if (n.inputs[1]->requires_grad)
            n.inputs[1]->accumulate(n.grad.cwiseProduct(n.inputs[0]->val).colwise().sum());
    });
}

Var transpose(const Var& a) {
    return make(a.value().transpose(), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate(n.grad.transpose());
    });
}

Var scale(const Var& a, double s) {
    return make(a.value() * s, {a}, [s](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate(n.grad * s);
    });
}

Var add_const(const Var& a, double c) {
    return make(a.value().array() + c, {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad) n.inputs[0]->accumulate(n.grad);
    });
}

Var sigmoid(const Var& a) {
    Eigen::MatrixXd out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return make(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate(
                (n.grad.array() * n.val.array() * (1.0 - n.val.array())).matrix());
    });
}

Var tanh_(const Var& a) {
    Eigen::MatrixXd out = a.value().array().tanh();
    return make(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate((n.grad.array() * (1.0 - n.val.array().square())).matrix());
    });
}

Var relu(const Var& a) {
    Eigen::MatrixXd out = a.value().cwiseMax(0.0);
    return make(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate(
                (n.grad.array() * (n.inputs[0]->val.array() > 0.0).cast<double>()).matrix());
    });
}

Var leaky_relu(const Var& a, double slope) {
    Eigen::MatrixXd out = a.value().cwiseMax(a.value() * slope);
    return make(std::move(out), {a}, [slope](Node& n) {
        if (n.inputs[0]->requires_grad) {
            Eigen::ArrayXXd m = (n.inputs[0]->val.array() > 0.0).cast<double>();
            n.inputs[0]->accumulate((n.grad.array() * (m + (1.0 - m) * slope)).matrix());
        }
    });
}

Var exp_(const Var& a) {
    Eigen::MatrixXd out = a.value().array().exp();
    return make(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate(n.grad.cwiseProduct(n.val));
    });
}

Var square(const Var& a) {
    Eigen::MatrixXd out = a.value().array().square();
    return make(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate(2.0 * n.grad.cwiseProduct(n.inputs[0]->val));
    });
}

Var sum(const Var& a) {
    return make(Eigen::MatrixXd::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad)
            n.inputs[0]->accumulate(Eigen::MatrixXd::Constant(
                n.inputs[0]->val.rows(), n.inputs[0]->val.cols(), n.grad(0, 0)));
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.rows() * a.cols())); }

Var slice(const Var& a, int r0, int nrows, int c0, int ncols) {
    if (r0 < 0 || c0 < 0 || r0 + nrows > a.rows() || c0 + ncols > a.cols())
        throw StructuralError("slice: out of range");
    return make(a.value().block(r0, c0, nrows, ncols), {a}, [r0, nrows, c0, ncols](Node& n) {
        if (n.inputs[0]->requires_grad) {
            Eigen::MatrixXd g =
                Eigen::MatrixXd::Zero(n.inputs[0]->val.rows(), n.inputs[0]->val.cols());
            g.block(r0, c0, nrows, ncols) = n.grad;
            n.inputs[0]->accumulate(g);
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw StructuralError("concat_cols: empty");
    const auto rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw StructuralError("concat_cols: row mismatch");
        cols += p.cols();
    }
    Eigen::MatrixXd out(rows, cols);
    std::vector<int> offsets;
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        offsets.push_back(static_cast<int>(c));
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return make(std::move(out), parts, [offsets](Node& n) {
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            auto& in = n.inputs[k];
            if (in->requires_grad)
                in->accumulate(n.grad.middleCols(offsets[k], in->val.cols()));
        }
    });
}

Var logsumexp(const Var& a) {
    const double m = a.value().maxCoeff();
    const double s = (a.value().array() - m).exp().sum();
    return make(Eigen::MatrixXd::Constant(1, 1, m + std::log(s)), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad) {
            const Eigen::ArrayXXd w = (n.inputs[0]->val.array() - n.val(0, 0)).exp();
            n.inputs[0]->accumulate((n.grad(0, 0) * w).matrix());
        }
    });
}

Var shuffle_rows_per_col(const Var& a, const std::vector<std::vector<int>>& perms) {
    if (static_cast<Eigen::Index>(perms.size()) != a.cols())
        throw StructuralError("shuffle_rows_per_col: one permutation per column required");
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) = a.value()(perms[j][i], j);
    return make(std::move(out), {a}, [perms](Node& n) {
        if (n.inputs[0]->requires_grad) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n.inputs[0]->val.rows(), n.inputs[0]->val.cols());
            for (Eigen::Index j = 0; j < g.cols(); ++j)
                for (Eigen::Index i = 0; i < g.rows(); ++i) g(perms[j][i], j) += n.grad(i, j);
            n.inputs[0]->accumulate(g);
        }
    });
}

void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1)
        throw StructuralError("backward: root must be a scalar");

    // Iterative post-order DFS for the topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->inputs.size()) {
            Node* next = n->inputs[idx++].get();
            if (next->requires_grad && !visited.count(next)) {
                visited.insert(next);
                stack.emplace_back(next, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        n->grad = Eigen::MatrixXd::Zero(n->val.rows(), n->val.cols());
        n->grad_alloc = true;
    }
    root.node()->grad(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

Adam::Adam(std::vector<Var> params, double lr, double b1, double b2, double eps)
    : params_(std::move(params)), lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
    for (const auto& p : params_) {
        m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    }
}

void Adam::step() {
    std::vector<Eigen::MatrixXd> grads;
    grads.reserve(params_.size());
    for (const auto& p : params_) grads.push_back(p.grad());
    step_with(grads);
}

void Adam::step_with(const std::vector<Eigen::MatrixXd>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        m_[k] = b1_ * m_[k] + (1.0 - b1_) * grads[k];
        v_[k] = b2_ * v_[k] + (1.0 - b2_) * grads[k].cwiseProduct(grads[k]);
        params_[k].mutable_value().array() -=
            lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    }
}

std::vector<double> flatten(const std::vector<Var>& params) {
    std::vector<double> out;
    for (const auto& p : params)
        out.insert(out.end(), p.value().data(), p.value().data() + p.value().size());
    return out;
}

void unflatten(const std::vector<double>& data, std::vector<Var>& params) {
    std::size_t off = 0;
    for (auto& p : params) {
        auto& v = p.mutable_value();
        if (off + v.size() > data.size()) throw StructuralError("unflatten: size mismatch");
        std::copy(data.begin() + off, data.begin() + off + v.size(), v.data());
        off += v.size();
    }
    if (off != data.size()) throw StructuralError("unflatten: size mismatch");
}

}  // namespace lhcm::ad
