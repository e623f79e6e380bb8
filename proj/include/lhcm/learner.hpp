#pragma once

#include <string>
#include <vector>

#include "lhcm/autodiff.hpp"
#include "lhcm/graph.hpp"

namespace lhcm {

/// Latent layer capacities, top layer first: floor(n_x / 2^i) per level,
/// stopping at the first level of capacity <= 1.
std::vector<int> layer_capacities(int n_x);

/// Learnable mask logits, one real per admissible block-form entry.
/// gamma[b] has parent-major shape capacities[b] x capacities[b+1]
/// (x n_x for the bottom block), mirroring HierGraph::blocks.
struct MaskLogits {
    std::vector<ad::Var> gamma;
    std::vector<int> capacities;  // top first
    int n_x = 0;
};

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 400;
    int batch = 32;
    double temperature = 1.0;
    double lambda1 = 10.0;
    double lambda2 = 1e-4;
    int restarts = 10;
    int mine_warmup = 100;  // epochs before the independence term contributes
    double threshold = 0.5;
    std::uint64_t seed = 0;

    void check() const;
};

/// lambda3(epoch) = 10^(-3 + epoch / 100).
double lambda3_schedule(int epoch);

/// Everything trainable: mask logits, encoder, per-node decoder nets, and
/// the independence critic. Noise coordinates are ordered like HierGraph
/// node ids: latents layer-major top-first, then measured.
struct ModelState {
    int n_x = 0;
    MaskLogits mask;
    std::vector<ad::Var> encoder;  // W1,b1,W2,b2,Wmu,bmu,Wlv,blv
    // decoder[k][j] = {W1,b1,W2,b2} for node j of generation step k; step 0
    // is the top latent layer, the last step produces the measured vector.
    std::vector<std::vector<std::vector<ad::Var>>> decoder;
    std::vector<ad::Var> critic;  // W1,b1,W2,b2,W3,b3

    int noise_dim() const;
    std::vector<ad::Var> model_params() const;  // encoder + decoder + gamma
    std::vector<ad::Var> critic_params() const;
};

ModelState init_model(int n_x, const TrainConfig& cfg, Rng& rng);

/// Binary-Concrete relaxation per entry: sigmoid((gamma + logistic noise)/T).
std::vector<ad::Var> sample_mask(const MaskLogits& mask, double temperature, Rng& rng);

/// Ancestral decoding: top latents from their own noise, every lower node
/// from its mask-weighted parent vector plus its own noise. Returns the
/// reconstructed measured batch (rows of eps).
ad::Var decode(const ad::Var& eps, const std::vector<ad::Var>& masks, const ModelState& state);

/// Reparameterized encoder pass: eps = mu + exp(logvar/2) * eta.
ad::Var encode_eps(const ModelState& state, const ad::Var& x, Rng& rng, ad::Var* mu_out = nullptr,
                   ad::Var* logvar_out = nullptr);

/// Purity penalty: squared sum over rows of max(0, |M_i| * (2 - pure_i))
/// where pure_i counts children of row i claimed by no other row. Zero on a
/// binary mask exactly when every nonzero row keeps two pure children.
ad::Var structural_penalty(const std::vector<ad::Var>& masks);

/// Donsker-Varadhan bound of the critic on joint vs per-column shuffled rows.
ad::Var mine_bound(const std::vector<ad::Var>& critic, const ad::Var& eps, Rng& rng);

struct LossTerms {
    ad::Var total;
    double recon = 0, kl = 0, l_ind = 0, l1 = 0, penalty = 0, lambda3 = 0;
};

/// Full composite loss on one batch:
/// -ELBO + lambda1 * L_ind + lambda2 * |sigmoid(gamma)|_1 + lambda3 * penalty.
/// The independence term joins after cfg.mine_warmup epochs. Throws
/// StructuralError with per-term diagnostics when any term is non-finite.
LossTerms loss_total(const Eigen::MatrixXd& batch, ModelState& state, int epoch,
                     const TrainConfig& cfg, Rng& rng);

/// Trains a standalone critic on the given samples and returns the final
/// dependence estimate (sanity probe for the independence loss).
double mine_independence(const Eigen::MatrixXd& samples, int epochs, std::uint64_t seed);

struct RestartSummary {
    std::uint64_t seed = 0;
    double final_loss = 0;
    bool diverged = false;
};

struct TrainResult {
    ModelState state;
    double best_loss = 0;
    std::vector<RestartSummary> restarts;
    std::vector<double> epoch_losses;  // loss curve of the winning restart
};

/// Multi-restart training; keeps the restart with the lowest final loss.
/// A diverged restart is logged and skipped; all diverging is an error.
TrainResult train(const Eigen::MatrixXd& data, const TrainConfig& cfg);

/// Thresholds sigmoid(gamma) at `threshold`, drops all-zero latent rows,
/// and truncates above the first empty layer.
HierGraph extract_structure(const MaskLogits& mask, double threshold);

/// Checkpoint: all parameters + config, versioned JSON.
void save_checkpoint(const ModelState& state, const TrainConfig& cfg, const std::string& path);
struct Checkpoint {
    ModelState state;
    TrainConfig cfg;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lhcm
