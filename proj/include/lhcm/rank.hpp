#pragma once

#include <map>
#include <vector>

#include "lhcm/dsep.hpp"
#include "lhcm/sem.hpp"

namespace lhcm {

/// MLP settings for the conditional-mean regressor. A smooth activation is
/// used throughout so the fitted surrogate has a Jacobian everywhere, even
/// when the data-generating mechanism is piecewise linear.
struct RegressorConfig {
    std::vector<int> hidden{64, 32};
    double lr = 1e-3;
    int epochs = 200;
    int batch = 64;
    std::uint64_t seed = 0;

    void check() const;
};

/// Outcome of a statistical rank query.
struct RankDecision {
    int rank = 0;                  // estimated rank, capped at min(|S|, |T|)
    int cap = 0;                   // min(|S|, |T|)
    std::vector<int> votes;        // per-evaluation-point rank votes
    std::vector<double> spectrum;  // mean normalized singular spectrum
    double r2 = 0.0;               // training fit quality of the regressor
};

/// Feed-forward regressor y = f(x) trained to the conditional mean, with
/// input/output standardization folded in. Weights are plain matrices after
/// fitting; prediction and the analytic Jacobian are tape-free.
class Regressor {
public:
    Regressor(int in_dim, int out_dim, const RegressorConfig& cfg, Rng& rng);

    /// Forward pass in standardized coordinates (rows are points).
    Eigen::MatrixXd predict_std(const Eigen::MatrixXd& x) const;
    /// Forward pass in raw data coordinates.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
    /// Exact Jacobian (out_dim x in_dim) at one standardized point.
    Eigen::MatrixXd analytic_jacobian(const Eigen::RowVectorXd& x_std) const;

    Eigen::RowVectorXd standardize(const Eigen::RowVectorXd& x_raw) const;

    int in_dim() const { return static_cast<int>(w_.front().rows()); }
    int out_dim() const { return static_cast<int>(w_.back().cols()); }
    double r2() const { return r2_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }

private:
    friend Regressor fit_conditional_mean(const Eigen::MatrixXd&, const std::vector<int>&,
                                          const std::vector<int>&, const RegressorConfig&);
    std::vector<Eigen::MatrixXd> w_;      // per-layer weight matrices
    std::vector<Eigen::RowVectorXd> b_;   // per-layer biases
    Eigen::RowVectorXd in_mean_, in_std_, out_mean_, out_std_;
    double r2_ = 0.0;
};

/// Fits E[data[:,T] | data[:,S]] by minibatch Adam on the squared error.
/// Deterministic given cfg.seed. Throws ArgumentError for overlapping or
/// empty index sets, fewer than 100 rows, or a constant input column.
Regressor fit_conditional_mean(const Eigen::MatrixXd& data, const std::vector<int>& S,
                               const std::vector<int>& T, const RegressorConfig& cfg);

/// Rank of the regressor's Jacobian: central finite differences (step 1e-3 in
/// standardized coordinates) at each evaluation point, singular values kept
/// while sigma_k / sigma_1 >= tol, majority vote across points, capped.
/// eval_points are raw-coordinate rows of the regressor's input.
RankDecision jacobian_rank(const Regressor& reg, const Eigen::MatrixXd& eval_points, double tol,
                           int cap);

/// fit_conditional_mean followed by jacobian_rank on `points` rows sampled
/// from the data. A regressor with no explanatory power (r2 below 0.05) short
/// circuits to rank 0.
RankDecision statistical_r(const Eigen::MatrixXd& data, const std::vector<int>& S,
                           const std::vector<int>& T, const RegressorConfig& cfg,
                           double tol = 0.05, int points = 64);

/// Linear fast path: thresholded singular-value rank of the sample
/// cross-covariance between the S and T columns.
RankDecision cross_covariance_rank(const Eigen::MatrixXd& data, const std::vector<int>& S,
                                   const std::vector<int>& T, double tol = 0.05);

enum class RankMode { Jacobian, CrossCov };

struct StatOracleConfig {
    RegressorConfig regressor;
    double tol = 0.05;
    int points = 64;
    RankMode mode = RankMode::Jacobian;
};

/// RankOracle answering queries from data. Decisions are cached per
/// canonical (S, T) key; queries are symmetric by construction.
class StatisticalOracle : public RankOracle {
public:
    StatisticalOracle(Eigen::MatrixXd data, StatOracleConfig cfg);

    int query(const std::vector<int>& S, const std::vector<int>& T) override;
    const RankDecision& last_decision() const { return last_; }
    int fits() const { return fits_; }

private:
    Eigen::MatrixXd data_;
    StatOracleConfig cfg_;
    std::map<std::pair<std::vector<int>, std::vector<int>>, RankDecision> cache_;
    RankDecision last_;
    int fits_ = 0;
};

}  // namespace lhcm
