#include "lhcm/rank.hpp"

#include <algorithm>
#include <numeric>

#include "lhcm/autodiff.hpp"

namespace lhcm {

namespace {

constexpr double kConstColumnEps = 1e-12;
constexpr double kFdStep = 1e-3;
constexpr double kR2Gate = 0.05;

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& data, const std::vector<int>& idx) {
    Eigen::MatrixXd out(data.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = data.col(idx[j]);
    return out;
}

void check_index_sets(const Eigen::MatrixXd& data, const std::vector<int>& S,
                      const std::vector<int>& T) {
    if (S.empty() || T.empty()) throw ArgumentError("rank query needs nonempty S and T");
    for (int i : S)
        for (int j : T)
            if (i == j) throw ArgumentError("rank query sets overlap at column " + std::to_string(i));
    for (int i : S)
        if (i < 0 || i >= data.cols()) throw ArgumentError("S column out of range: " + std::to_string(i));
    for (int j : T)
        if (j < 0 || j >= data.cols()) throw ArgumentError("T column out of range: " + std::to_string(j));
}

/// Rank votes from one Jacobian; 0 when the whole matrix is numerically zero.
int spectrum_rank(const Eigen::VectorXd& sv, double tol, int cap,
                  std::vector<double>* normalized = nullptr) {
    const double s1 = sv.size() > 0 ? sv(0) : 0.0;
    if (normalized) {
        normalized->assign(static_cast<std::size_t>(sv.size()), 0.0);
        if (s1 > 0)
            for (Eigen::Index k = 0; k < sv.size(); ++k) (*normalized)[static_cast<std::size_t>(k)] = sv(k) / s1;
    }
    if (s1 < 1e-9) return 0;
    int r = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) / s1 >= tol) ++r;
    return std::min(r, cap);
}

int majority(const std::vector<int>& votes) {
    std::map<int, int> counts;
    for (int v : votes) ++counts[v];
    int best = 0, best_count = -1;
    for (const auto& [v, c] : counts)
        if (c > best_count) {  // ties break toward the smaller rank
            best = v;
            best_count = c;
        }
    return best;
}

}  // namespace

void RegressorConfig::check() const {
    if (hidden.empty()) throw ArgumentError("regressor needs at least one hidden layer");
    for (int h : hidden)
        if (h <= 0) throw ArgumentError("hidden widths must be positive");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch < 1) throw ArgumentError("batch size must be >= 1");
    if (!(lr > 0)) throw ArgumentError("learning rate must be positive");
}

Regressor::Regressor(int in_dim, int out_dim, const RegressorConfig& cfg, Rng& rng) {
    cfg.check();
    std::vector<int> dims{in_dim};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(out_dim);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double s = std::sqrt(1.0 / dims[l]);  // Xavier-style fan-in scaling
        Eigen::MatrixXd w(dims[l], dims[l + 1]);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * nd(rng);
        w_.push_back(std::move(w));
        b_.emplace_back(Eigen::RowVectorXd::Zero(dims[l + 1]));
    }
    in_mean_ = Eigen::RowVectorXd::Zero(in_dim);
    in_std_ = Eigen::RowVectorXd::Ones(in_dim);
    out_mean_ = Eigen::RowVectorXd::Zero(out_dim);
    out_std_ = Eigen::RowVectorXd::Ones(out_dim);
}

Eigen::MatrixXd Regressor::predict_std(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        h = (h * w_[l]).rowwise() + b_[l];
        if (l + 1 < w_.size()) h = h.array().tanh();
    }
    return h;
}

Eigen::MatrixXd Regressor::predict(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd xs = (x.rowwise() - in_mean_).array().rowwise() / in_std_.array();
    Eigen::MatrixXd ys = predict_std(xs);
    return (ys.array().rowwise() * out_std_.array()).rowwise() + out_mean_.array();
}

Eigen::MatrixXd Regressor::analytic_jacobian(const Eigen::RowVectorXd& x_std) const {
    // Chain rule through y = W_L^T ... tanh(W_1^T x + b_1): propagate the
    // Jacobian forward, scaling rows by 1 - tanh^2 at each hidden layer.
    Eigen::MatrixXd j = Eigen::MatrixXd::Identity(in_dim(), in_dim());
    Eigen::RowVectorXd h = x_std;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        j = j * w_[l];
        h = h * w_[l] + b_[l];
        if (l + 1 < w_.size()) {
            h = h.array().tanh();
            j = j.array().rowwise() * (1.0 - h.array().square());
        }
    }
    return j.transpose();  // out_dim x in_dim
}

Eigen::RowVectorXd Regressor::standardize(const Eigen::RowVectorXd& x_raw) const {
    return (x_raw - in_mean_).array() / in_std_.array();
}

Regressor fit_conditional_mean(const Eigen::MatrixXd& data, const std::vector<int>& S,
                               const std::vector<int>& T, const RegressorConfig& cfg) {
    cfg.check();
    check_index_sets(data, S, T);
    if (data.rows() < 100) throw ArgumentError("conditional-mean fit needs at least 100 rows");

    const Eigen::MatrixXd xr = take_columns(data, S);
    const Eigen::MatrixXd yr = take_columns(data, T);
    const auto n = data.rows();

    Rng rng(cfg.seed);
    Regressor reg(static_cast<int>(S.size()), static_cast<int>(T.size()), cfg, rng);

    reg.in_mean_ = xr.colwise().mean();
    reg.out_mean_ = yr.colwise().mean();
    for (Eigen::Index j = 0; j < xr.cols(); ++j) {
        const double sd = std::sqrt((xr.col(j).array() - reg.in_mean_(j)).square().mean());
        if (sd < kConstColumnEps)
            throw ArgumentError("input column x_" + std::to_string(S[static_cast<std::size_t>(j)]) +
                                " is constant; cannot regress on it");
        reg.in_std_(j) = sd;
    }
    for (Eigen::Index j = 0; j < yr.cols(); ++j) {
        const double sd = std::sqrt((yr.col(j).array() - reg.out_mean_(j)).square().mean());
        reg.out_std_(j) = sd < kConstColumnEps ? 1.0 : sd;
    }
    const Eigen::MatrixXd xs = (xr.rowwise() - reg.in_mean_).array().rowwise() / reg.in_std_.array();
    const Eigen::MatrixXd ys = (yr.rowwise() - reg.out_mean_).array().rowwise() / reg.out_std_.array();

    // Lift the weights onto the tape for training.
    std::vector<ad::Var> params;
    std::vector<ad::Var> ws, bs;
    for (std::size_t l = 0; l < reg.w_.size(); ++l) {
        ws.push_back(ad::param(reg.w_[l]));
        bs.push_back(ad::param(reg.b_[l]));
        params.push_back(ws.back());
        params.push_back(bs.back());
    }
    ad::Adam opt(params, cfg.lr);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += cfg.batch) {
            const auto bsz = std::min<Eigen::Index>(cfg.batch, n - start);
            Eigen::MatrixXd bx(bsz, xs.cols()), by(bsz, ys.cols());
            for (Eigen::Index i = 0; i < bsz; ++i) {
                bx.row(i) = xs.row(order[static_cast<std::size_t>(start + i)]);
                by.row(i) = ys.row(order[static_cast<std::size_t>(start + i)]);
            }
            ad::Var h = ad::constant(std::move(bx));
            for (std::size_t l = 0; l < ws.size(); ++l) {
                h = ad::add_rowvec(ad::matmul(h, ws[l]), bs[l]);
                if (l + 1 < ws.size()) h = ad::tanh_(h);
            }
            ad::Var loss = ad::mean(ad::square(ad::sub(h, ad::constant(std::move(by)))));
            ad::backward(loss);
            opt.step();
        }
    }
    for (std::size_t l = 0; l < ws.size(); ++l) {
        reg.w_[l] = ws[l].value();
        reg.b_[l] = bs[l].value();
    }

    // Standardized outputs have unit variance, so R^2 is one minus the
    // residual mean square. Constant targets carry no signal and score zero.
    const Eigen::MatrixXd resid = reg.predict_std(xs) - ys;
    double sse = 0.0;
    int live_cols = 0;
    for (Eigen::Index j = 0; j < ys.cols(); ++j) {
        const double sd = std::sqrt((yr.col(j).array() - reg.out_mean_(j)).square().mean());
        if (sd < kConstColumnEps) continue;
        sse += resid.col(j).array().square().mean();
        ++live_cols;
    }
    reg.r2_ = live_cols == 0 ? 0.0 : 1.0 - sse / live_cols;
    return reg;
}

RankDecision jacobian_rank(const Regressor& reg, const Eigen::MatrixXd& eval_points, double tol,
                           int cap) {
    if (!(tol > 0.0 && tol < 1.0)) throw ArgumentError("rank tolerance must be in (0, 1)");
    if (eval_points.rows() < 1) throw ArgumentError("jacobian_rank needs at least one point");
    if (eval_points.cols() != reg.in_dim())
        throw ArgumentError("evaluation points do not match the regressor input dimension");

    RankDecision d;
    d.cap = cap;
    d.r2 = reg.r2();
    const int sv_len = std::min(reg.in_dim(), reg.out_dim());
    d.spectrum.assign(static_cast<std::size_t>(sv_len), 0.0);

    for (Eigen::Index p = 0; p < eval_points.rows(); ++p) {
        const Eigen::RowVectorXd x = reg.standardize(eval_points.row(p));
        Eigen::MatrixXd jac(reg.out_dim(), reg.in_dim());
        for (int j = 0; j < reg.in_dim(); ++j) {
            Eigen::RowVectorXd up = x, dn = x;
            up(j) += kFdStep;
            dn(j) -= kFdStep;
            jac.col(j) = (reg.predict_std(up) - reg.predict_std(dn)).transpose() / (2 * kFdStep);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
        std::vector<double> norm;
        d.votes.push_back(spectrum_rank(svd.singularValues(), tol, cap, &norm));
        for (std::size_t k = 0; k < norm.size(); ++k) d.spectrum[k] += norm[k];
    }
    for (double& s : d.spectrum) s /= static_cast<double>(eval_points.rows());
    d.rank = majority(d.votes);
    return d;
}

RankDecision statistical_r(const Eigen::MatrixXd& data, const std::vector<int>& S,
                           const std::vector<int>& T, const RegressorConfig& cfg, double tol,
                           int points) {
    const Regressor reg = fit_conditional_mean(data, S, T, cfg);
    const int cap = static_cast<int>(std::min(S.size(), T.size()));

    // No explanatory power means a flat conditional mean: rank 0 without
    // trusting the noise floor of the Jacobian.
    if (reg.r2() < kR2Gate) {
        RankDecision d;
        d.cap = cap;
        d.r2 = reg.r2();
        d.votes.assign(static_cast<std::size_t>(points), 0);
        d.spectrum.assign(static_cast<std::size_t>(std::min(S.size(), T.size())), 0.0);
        return d;
    }

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);
    Eigen::MatrixXd pts(points, static_cast<Eigen::Index>(S.size()));
    for (int p = 0; p < points; ++p) {
        const Eigen::Index row = pick(rng);
        for (std::size_t j = 0; j < S.size(); ++j) pts(p, static_cast<Eigen::Index>(j)) = data(row, S[j]);
    }
    return jacobian_rank(reg, pts, tol, cap);
}

RankDecision cross_covariance_rank(const Eigen::MatrixXd& data, const std::vector<int>& S,
                                   const std::vector<int>& T, double tol) {
    check_index_sets(data, S, T);
    if (!(tol > 0.0 && tol < 1.0)) throw ArgumentError("rank tolerance must be in (0, 1)");
    if (data.rows() < static_cast<Eigen::Index>(std::max(S.size(), T.size())))
        throw ArgumentError("insufficient data: fewer rows than the larger query set");

    // Work with correlations so the leading singular value has an absolute
    // meaning: independent columns give sigma_1 of order n^{-1/2}, well below
    // any sensible tolerance.
    Eigen::MatrixXd xs = take_columns(data, S);
    Eigen::MatrixXd ys = take_columns(data, T);
    xs.rowwise() -= xs.colwise().mean().eval();
    ys.rowwise() -= ys.colwise().mean().eval();
    for (Eigen::Index j = 0; j < xs.cols(); ++j) {
        const double sd = std::sqrt(xs.col(j).squaredNorm() / static_cast<double>(data.rows()));
        if (sd > kConstColumnEps) xs.col(j) /= sd;
    }
    for (Eigen::Index j = 0; j < ys.cols(); ++j) {
        const double sd = std::sqrt(ys.col(j).squaredNorm() / static_cast<double>(data.rows()));
        if (sd > kConstColumnEps) ys.col(j) /= sd;
    }
    const Eigen::MatrixXd c = xs.transpose() * ys / static_cast<double>(data.rows());

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    RankDecision d;
    d.cap = static_cast<int>(std::min(S.size(), T.size()));
    std::vector<double> norm;
    const Eigen::VectorXd& sv = svd.singularValues();
    d.rank = (sv.size() == 0 || sv(0) < tol) ? 0 : spectrum_rank(sv, tol, d.cap, &norm);
    if (norm.empty()) norm.assign(static_cast<std::size_t>(sv.size()), 0.0);
    d.votes.push_back(d.rank);
    d.spectrum = norm;
    return d;
}

StatisticalOracle::StatisticalOracle(Eigen::MatrixXd data, StatOracleConfig cfg)
    : data_(std::move(data)), cfg_(std::move(cfg)) {
    cfg_.regressor.check();
    if (cfg_.points < 1) throw ArgumentError("oracle needs at least one evaluation point");
}

int StatisticalOracle::query(const std::vector<int>& S, const std::vector<int>& T) {
    std::vector<int> s = S, t = T;
    std::sort(s.begin(), s.end());
    std::sort(t.begin(), t.end());
    if (t < s) std::swap(s, t);  // queries are symmetric; normalize the key
    const auto key = std::make_pair(s, t);
    if (auto it = cache_.find(key); it != cache_.end()) {
        last_ = it->second;
        return last_.rank;
    }

    // Give each distinct query its own deterministic seed stream.
    std::string tag;
    for (int i : s) tag += std::to_string(i) + ",";
    tag += "|";
    for (int i : t) tag += std::to_string(i) + ",";
    RegressorConfig rc = cfg_.regressor;
    rc.seed = fnv1a(tag, rc.seed ^ 0xcbf29ce484222325ull);

    RankDecision d;
    if (cfg_.mode == RankMode::CrossCov)
        d = cross_covariance_rank(data_, s, t, cfg_.tol);
    else
        d = statistical_r(data_, s, t, rc, cfg_.tol, cfg_.points);
    ++fits_;
    cache_.emplace(key, d);
    last_ = d;
    return d.rank;
}

}  // namespace lhcm
