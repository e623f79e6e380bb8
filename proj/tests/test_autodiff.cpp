#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>

#include "lhcm/autodiff.hpp"

using namespace lhcm;
using namespace lhcm::ad;

namespace {

Eigen::MatrixXd randm(int r, int c, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

// Central finite differences against the analytic gradient of a scalar loss.
double max_rel_grad_err(std::vector<Var> params, const std::function<Var()>& loss_fn,
                        double h = 1e-6) {
    Var loss = loss_fn();
    backward(loss);
    std::vector<Eigen::MatrixXd> analytic;
    for (auto& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = params[k].mutable_value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double orig = v.data()[i];
            v.data()[i] = orig + h;
            const double up = loss_fn().value()(0, 0);
            v.data()[i] = orig - h;
            const double dn = loss_fn().value()(0, 0);
            v.data()[i] = orig;
            const double fd = (up - dn) / (2 * h);
            const double an = analytic[k].data()[i];
            const double err = std::abs(fd - an) / std::max({1e-6, std::abs(fd), std::abs(an)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("gradients of elementary ops match finite differences") {
    Rng rng(1);
    Var a = param(randm(3, 4, rng));
    Var b = param(randm(4, 2, rng));
    Var bias = param(randm(1, 2, rng));
    Var r = param(randm(1, 4, rng));
    Var c = constant(randm(3, 2, rng));

    auto loss = [&] {
        Var h = matmul(mul_rowvec(a, r), b);
        h = add_rowvec(h, bias);
        h = tanh_(h);
        h = add(h, c);
        h = mul(h, h);
        return mean(h);
    };
    CHECK(max_rel_grad_err({a, b, bias, r}, loss) < 1e-5);
}

TEST_CASE("gradients of activations, exp, square, sigmoid") {
    Rng rng(2);
    Var a = param(randm(4, 4, rng));
    auto loss = [&] {
        Var x = sigmoid(a);
        x = add(x, exp_(scale(a, 0.1)));
        x = add(x, square(tanh_(a)));
        x = add(x, leaky_relu(a, 0.2));
        return sum(x);
    };
    CHECK(max_rel_grad_err({a}, loss) < 1e-5);
}

TEST_CASE("gradients of slice, concat, logsumexp, shuffle") {
    Rng rng(3);
    Var a = param(randm(5, 3, rng));
    std::vector<std::vector<int>> perms{{4, 2, 0, 1, 3}, {1, 0, 3, 4, 2}, {0, 1, 2, 3, 4}};
    auto loss = [&] {
        Var s1 = slice(a, 0, 5, 0, 1);
        Var s2 = slice(a, 0, 5, 1, 2);
        Var cat = concat_cols({s2, s1});
        Var sh = shuffle_rows_per_col(cat, perms);
        return add(logsumexp(sh), mean(square(sh)));
    };
    CHECK(max_rel_grad_err({a}, loss) < 1e-5);
}

TEST_CASE("transpose gradient") {
    Rng rng(7);
    Var a = param(randm(3, 5, rng));
    Var w = param(randm(3, 2, rng));
    auto loss = [&] { return sum(square(matmul(transpose(a), w))); };
    CHECK(max_rel_grad_err({a, w}, loss) < 1e-5);
}

TEST_CASE("relu gradient away from the kink") {
    Var a = param((Eigen::MatrixXd(2, 2) << 1.0, -2.0, 0.5, -0.25).finished());
    auto loss = [&] { return sum(relu(a)); };
    CHECK(max_rel_grad_err({a}, loss) < 1e-7);
}

TEST_CASE("backward zeroes stale gradients between tapes") {
    Var a = param(Eigen::MatrixXd::Constant(1, 1, 2.0));
    backward(sum(square(a)));
    CHECK(a.grad()(0, 0) == doctest::Approx(4.0));
    backward(sum(a));
    CHECK(a.grad()(0, 0) == doctest::Approx(1.0));  // not 5.0
}

TEST_CASE("adam minimizes a quadratic") {
    Var w = param(Eigen::MatrixXd::Constant(1, 1, 5.0));
    Adam opt({w}, 0.1);
    for (int i = 0; i < 300; ++i) {
        Var loss = square(add_const(w, -3.0));
        backward(loss);
        opt.step();
    }
    CHECK(w.value()(0, 0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("flatten round trip") {
    Rng rng(4);
    std::vector<Var> ps{param(randm(2, 3, rng)), param(randm(1, 4, rng))};
    auto data = flatten(ps);
    data[3] = 42.0;
    unflatten(data, ps);
    CHECK(flatten(ps) == data);
    std::vector<double> bad(5, 0.0);
    CHECK_THROWS_AS(unflatten(bad, ps), StructuralError);
}
