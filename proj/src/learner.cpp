#include "lhcm/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace lhcm {

namespace {

using nlohmann::json;

constexpr int kEncH1 = 64, kEncH2 = 32;
constexpr int kDecHidden = 32;
constexpr int kCriticHidden = 64;

Eigen::MatrixXd he_init(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    const double s = std::sqrt(1.0 / std::max(1, rows));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * nd(rng);
    return m;
}

std::vector<ad::Var> make_mlp(const std::vector<int>& dims, Rng& rng) {
    std::vector<ad::Var> p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        p.push_back(ad::param(he_init(dims[l], dims[l + 1], rng)));
        p.push_back(ad::param(Eigen::MatrixXd::Zero(1, dims[l + 1])));
    }
    return p;
}

/// tanh-hidden MLP forward over {W,b,W,b,...}; linear output layer.
ad::Var mlp_forward(const std::vector<ad::Var>& p, ad::Var h) {
    for (std::size_t l = 0; l < p.size(); l += 2) {
        h = ad::add_rowvec(ad::matmul(h, p[l]), p[l + 1]);
        if (l + 2 < p.size()) h = ad::tanh_(h);
    }
    return h;
}

ad::Var batch_mean_sum(const ad::Var& m) {
    // Sum over coordinates, mean over batch rows.
    return ad::scale(ad::sum(m), 1.0 / static_cast<double>(m.rows()));
}

std::vector<std::vector<int>> column_perms(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::vector<std::vector<int>> perms(static_cast<std::size_t>(cols));
    for (auto& p : perms) {
        p.resize(static_cast<std::size_t>(rows));
        std::iota(p.begin(), p.end(), 0);
        std::shuffle(p.begin(), p.end(), rng);
    }
    return perms;
}

json mat_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Eigen::MatrixXd mat_from_json(const json& j) {
    Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != m.size())
        throw ParseError("checkpoint matrix size mismatch");
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

json params_json(const std::vector<ad::Var>& ps) {
    json arr = json::array();
    for (const auto& p : ps) arr.push_back(mat_json(p.value()));
    return arr;
}

std::vector<ad::Var> params_from_json(const json& arr) {
    std::vector<ad::Var> out;
    for (const auto& j : arr) out.push_back(ad::param(mat_from_json(j)));
    return out;
}

}  // namespace

std::vector<int> layer_capacities(int n_x) {
    if (n_x < 2) throw ArgumentError("layer_capacities: need at least 2 measured variables");
    std::vector<int> bottom_up;
    for (int cap = n_x / 2;; cap /= 2) {
        bottom_up.push_back(std::max(1, cap));
        if (cap <= 1) break;
    }
    return {bottom_up.rbegin(), bottom_up.rend()};
}

void TrainConfig::check() const {
    if (!(lr > 0)) throw ArgumentError("lr must be positive");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch < 1) throw ArgumentError("batch must be >= 1");
    if (!(temperature > 0)) throw ArgumentError("temperature must be positive");
    if (lambda1 < 0 || lambda2 < 0) throw ArgumentError("loss weights must be non-negative");
    if (restarts < 1) throw ArgumentError("restarts must be >= 1");
    if (mine_warmup < 0) throw ArgumentError("mine_warmup must be >= 0");
    if (!(threshold > 0 && threshold < 1)) throw ArgumentError("threshold must be in (0, 1)");
}

double lambda3_schedule(int epoch) { return std::pow(10.0, -3.0 + epoch / 100.0); }

int ModelState::noise_dim() const {
    int d = n_x;
    for (int c : mask.capacities) d += c;
    return d;
}

std::vector<ad::Var> ModelState::model_params() const {
    std::vector<ad::Var> out = encoder;
    for (const auto& layer : decoder)
        for (const auto& node : layer) out.insert(out.end(), node.begin(), node.end());
    out.insert(out.end(), mask.gamma.begin(), mask.gamma.end());
    return out;
}

std::vector<ad::Var> ModelState::critic_params() const { return critic; }

ModelState init_model(int n_x, const TrainConfig& cfg, Rng& rng) {
    cfg.check();
    ModelState s;
    s.n_x = n_x;
    s.mask.n_x = n_x;
    s.mask.capacities = layer_capacities(n_x);
    const auto& caps = s.mask.capacities;
    const int L = static_cast<int>(caps.size());
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int b = 0; b < L; ++b) {
        const int rows = caps[static_cast<std::size_t>(b)];
        const int cols = b + 1 < L ? caps[static_cast<std::size_t>(b + 1)] : n_x;
        Eigen::MatrixXd g(rows, cols);
        // Give each child exactly one random parent "on" (p ~ 0.88, rest
        // ~0.12) with small symmetry-breaking noise. A pure single-parent
        // assignment starts the purity penalty near zero, so early training
        // is driven by reconstruction reassigning children between rows
        // instead of the penalty pruning whole rows; a dense or random init
        // lets the penalty collapse everything onto one latent before the
        // other loss terms have a say.
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const Eigen::Index on = static_cast<Eigen::Index>(rng() % g.rows());
            for (Eigen::Index i = 0; i < g.rows(); ++i)
                g(i, j) = (i == on ? 2.0 : -2.0) + 0.1 * nd(rng);
        }
        s.mask.gamma.push_back(ad::param(std::move(g)));
    }

    const int d = s.noise_dim();
    s.encoder = make_mlp({n_x, kEncH1, kEncH2}, rng);
    s.encoder.push_back(ad::param(he_init(kEncH2, d, rng)));  // mu head
    s.encoder.push_back(ad::param(Eigen::MatrixXd::Zero(1, d)));
    s.encoder.push_back(ad::param(he_init(kEncH2, d, rng)));  // logvar head
    // Bias the posterior toward low variance at the start so the noise code
    // carries information immediately; otherwise the decoders learn to
    // ignore their parent inputs before the encoder becomes useful.
    s.encoder.push_back(ad::param(Eigen::MatrixXd::Constant(1, d, -2.0)));

    // Generation steps: top latents (no parents), lower latent layers, then
    // the measured layer; each node owns a one-hidden-layer net.
    for (int k = 0; k <= L; ++k) {
        const int count = k < L ? caps[static_cast<std::size_t>(k)] : n_x;
        const int parent_dim = k == 0 ? 0 : caps[static_cast<std::size_t>(k - 1)];
        std::vector<std::vector<ad::Var>> layer;
        for (int j = 0; j < count; ++j) layer.push_back(make_mlp({parent_dim + 1, kDecHidden, 1}, rng));
        s.decoder.push_back(std::move(layer));
    }

    s.critic = make_mlp({d, kCriticHidden, kCriticHidden, 1}, rng);
    return s;
}

std::vector<ad::Var> sample_mask(const MaskLogits& mask, double temperature, Rng& rng) {
    if (!(temperature > 0)) throw ArgumentError("temperature must be positive");
    std::uniform_real_distribution<double> uni(1e-12, 1.0 - 1e-12);
    std::vector<ad::Var> out;
    for (const auto& g : mask.gamma) {
        Eigen::MatrixXd logistic(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < logistic.size(); ++i) {
            const double u = uni(rng);
            logistic.data()[i] = std::log(u) - std::log1p(-u);
        }
        out.push_back(ad::sigmoid(
            ad::scale(ad::add(g, ad::constant(std::move(logistic))), 1.0 / temperature)));
    }
    return out;
}

ad::Var decode(const ad::Var& eps, const std::vector<ad::Var>& masks, const ModelState& state) {
    const auto& caps = state.mask.capacities;
    const int L = static_cast<int>(caps.size());
    if (static_cast<int>(masks.size()) != L) throw StructuralError("decode: mask count mismatch");
    if (eps.cols() != state.noise_dim()) throw StructuralError("decode: eps width mismatch");
    const int B = static_cast<int>(eps.rows());

    int offset = 0;
    ad::Var above;  // values of the layer just generated
    for (int k = 0; k <= L; ++k) {
        const int count = k < L ? caps[static_cast<std::size_t>(k)] : state.n_x;
        std::vector<ad::Var> nodes;
        for (int j = 0; j < count; ++j) {
            const ad::Var noise = ad::slice(eps, 0, B, offset + j, 1);
            ad::Var in = noise;
            if (k > 0) {
                const auto& m = masks[static_cast<std::size_t>(k - 1)];
                const ad::Var mrow =
                    ad::transpose(ad::slice(m, 0, static_cast<int>(m.rows()), j, 1));
                in = ad::concat_cols({ad::mul_rowvec(above, mrow), noise});
            }
            nodes.push_back(mlp_forward(state.decoder[static_cast<std::size_t>(k)]
                                                     [static_cast<std::size_t>(j)],
                                        in));
        }
        above = ad::concat_cols(nodes);
        offset += count;
    }
    return above;  // the measured layer
}

ad::Var encode_eps(const ModelState& state, const ad::Var& x, Rng& rng, ad::Var* mu_out,
                   ad::Var* logvar_out) {
    ad::Var h = ad::tanh_(ad::add_rowvec(ad::matmul(x, state.encoder[0]), state.encoder[1]));
    h = ad::tanh_(ad::add_rowvec(ad::matmul(h, state.encoder[2]), state.encoder[3]));
    const ad::Var mu = ad::add_rowvec(ad::matmul(h, state.encoder[4]), state.encoder[5]);
    const ad::Var logvar = ad::add_rowvec(ad::matmul(h, state.encoder[6]), state.encoder[7]);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd eta(x.rows(), mu.cols());
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta.data()[i] = nd(rng);
    if (mu_out) *mu_out = mu;
    if (logvar_out) *logvar_out = logvar;
    return ad::add(mu, ad::mul(ad::exp_(ad::scale(logvar, 0.5)), ad::constant(std::move(eta))));
}

ad::Var structural_penalty(const std::vector<ad::Var>& masks) {
    ad::Var total = ad::scalar(0.0);
    for (const auto& m : masks) {
        const int rows = static_cast<int>(m.rows());
        const int cols = static_cast<int>(m.cols());
        const ad::Var ones = ad::constant(Eigen::MatrixXd::Ones(1, cols));
        for (int i = 0; i < rows; ++i) {
            const ad::Var row = ad::slice(m, i, 1, 0, cols);
            ad::Var unclaimed = ones;  // product over siblings of (1 - M_j)
            for (int j = 0; j < rows; ++j) {
                if (j == i) continue;
                unclaimed = ad::mul(unclaimed, ad::sub(ones, ad::slice(m, j, 1, 0, cols)));
            }
            const ad::Var pure = ad::sum(ad::mul(row, unclaimed));
            const ad::Var hinge =
                ad::relu(ad::mul(ad::sum(row), ad::add_const(ad::scale(pure, -1.0), 2.0)));
            total = ad::add(total, hinge);
        }
    }
    return ad::square(total);
}

ad::Var mine_bound(const std::vector<ad::Var>& critic, const ad::Var& eps, Rng& rng) {
    const ad::Var joint = batch_mean_sum(mlp_forward(critic, eps));
    const ad::Var shuffled =
        ad::shuffle_rows_per_col(eps, column_perms(eps.rows(), eps.cols(), rng));
    const ad::Var log_mean_exp = ad::add_const(ad::logsumexp(mlp_forward(critic, shuffled)),
                                               -std::log(static_cast<double>(eps.rows())));
    return ad::sub(joint, log_mean_exp);
}

LossTerms loss_total(const Eigen::MatrixXd& batch, ModelState& state, int epoch,
                     const TrainConfig& cfg, Rng& rng) {
    if (batch.cols() != state.n_x) throw StructuralError("loss_total: batch width mismatch");
    const double B = static_cast<double>(batch.rows());

    const ad::Var x = ad::constant(batch);
    ad::Var mu, logvar;
    const ad::Var eps = encode_eps(state, x, rng, &mu, &logvar);
    const auto masks = sample_mask(state.mask, cfg.temperature, rng);
    const ad::Var xhat = decode(eps, masks, state);

    const ad::Var recon = ad::scale(ad::sum(ad::square(ad::sub(xhat, x))), 0.5 / B);
    const ad::Var kl = ad::scale(
        ad::sum(ad::add_const(
            ad::sub(ad::add(ad::exp_(logvar), ad::square(mu)), logvar), -1.0)),
        0.5 / B);

    ad::Var l1 = ad::scalar(0.0);
    for (const auto& g : state.mask.gamma) l1 = ad::add(l1, ad::sum(ad::sigmoid(g)));
    const ad::Var pen = structural_penalty(masks);

    LossTerms t;
    t.recon = recon.value()(0, 0);
    t.kl = kl.value()(0, 0);
    t.l1 = l1.value()(0, 0);
    t.penalty = pen.value()(0, 0);
    t.lambda3 = lambda3_schedule(epoch);

    ad::Var total = ad::add(ad::add(recon, kl),
                            ad::add(ad::scale(l1, cfg.lambda2), ad::scale(pen, t.lambda3)));
    if (epoch >= cfg.mine_warmup && cfg.lambda1 > 0) {
        const ad::Var ind = mine_bound(state.critic, eps, rng);
        t.l_ind = ind.value()(0, 0);
        total = ad::add(total, ad::scale(ind, cfg.lambda1));
    }
    t.total = total;

    const double v = total.value()(0, 0);
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite loss: recon=" << t.recon << " kl=" << t.kl << " l_ind=" << t.l_ind
            << " l1=" << t.l1 << " penalty=" << t.penalty << " lambda3=" << t.lambda3;
        throw StructuralError(msg.str());
    }
    return t;
}

double mine_independence(const Eigen::MatrixXd& samples, int epochs, std::uint64_t seed) {
    if (samples.rows() < 16) throw ArgumentError("mine_independence: too few samples");
    Rng rng(seed);
    const int d = static_cast<int>(samples.cols());
    auto critic = make_mlp({d, kCriticHidden, kCriticHidden, 1}, rng);
    ad::Adam opt(critic, 1e-3);
    const ad::Var x = ad::constant(samples);
    for (int e = 0; e < epochs; ++e) {
        const ad::Var bound = mine_bound(critic, x, rng);
        ad::backward(ad::scale(bound, -1.0));  // ascend the bound
        opt.step();
    }
    // Average over fresh shuffles to take the permutation noise out.
    double acc = 0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) acc += mine_bound(critic, x, rng).value()(0, 0);
    return acc / reps;
}

TrainResult train(const Eigen::MatrixXd& data, const TrainConfig& cfg) {
    cfg.check();
    if (data.rows() < cfg.batch) throw ArgumentError("train: fewer rows than one batch");

    // Center each column and scale it to a common large standard deviation.
    // The reconstruction term uses a fixed unit-variance likelihood, so the
    // data scale sets how much of each variable the model must actually
    // encode. At unit scale it is cheaper to discard the dependent residuals
    // than to pay their KL cost, and every mask structure then scores alike;
    // at a large common std the model has to route shared factors through latent parents,
    // which is what makes the mask identifiable. Column scaling does not
    // change the structure being recovered.
    Eigen::MatrixXd scaled = data;
    {
        const Eigen::RowVectorXd mean = scaled.colwise().mean();
        scaled.rowwise() -= mean;
        const Eigen::RowVectorXd sd = scaled.array().square().colwise().mean().sqrt();
        for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
            if (sd(j) < 1e-12)
                throw ArgumentError("train: column " + std::to_string(j) + " is constant");
            scaled.col(j) *= 20.0 / sd(j);
        }
    }

    TrainResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    bool found = false;
    std::string last_failure;

    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t restart_seed = fnv1a("restart" + std::to_string(r), cfg.seed);
        Rng rng(restart_seed);
        RestartSummary summary;
        summary.seed = restart_seed;
        try {
            ModelState state = init_model(static_cast<int>(scaled.cols()), cfg, rng);
            // Fold input standardization into the first encoder layer so the
            // tanh units start in their linear range regardless of data
            // scale; the folded weights remain ordinary trainable parameters.
            {
                const Eigen::RowVectorXd mean = scaled.colwise().mean();
                const Eigen::RowVectorXd sd =
                    ((scaled.rowwise() - mean).array().square().colwise().mean().sqrt() + 1e-12)
                        .matrix();
                Eigen::MatrixXd& w1 = state.encoder[0].mutable_value();
                Eigen::MatrixXd& b1 = state.encoder[1].mutable_value();
                w1.array().colwise() /= sd.transpose().array();
                b1 -= mean * w1;
            }
            ad::Adam model_opt(state.model_params(), cfg.lr);
            ad::Adam critic_opt(state.critic_params(), cfg.lr);

            std::vector<int> order(static_cast<std::size_t>(scaled.rows()));
            std::iota(order.begin(), order.end(), 0);
            std::vector<double> curve;
            double epoch_loss = 0;
            for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
                std::shuffle(order.begin(), order.end(), rng);
                double acc = 0;
                int nb = 0;
                for (Eigen::Index start = 0; start < scaled.rows(); start += cfg.batch) {
                    const auto bsz = std::min<Eigen::Index>(cfg.batch, scaled.rows() - start);
                    Eigen::MatrixXd batch(bsz, scaled.cols());
                    for (Eigen::Index i = 0; i < bsz; ++i)
                        batch.row(i) = scaled.row(order[static_cast<std::size_t>(start + i)]);

                    // Critic ascent on detached noise samples.
                    {
                        const ad::Var x = ad::constant(batch);
                        const ad::Var eps = encode_eps(state, x, rng);
                        const ad::Var eps_d = ad::constant(eps.value());
                        const ad::Var bound = mine_bound(state.critic, eps_d, rng);
                        ad::backward(ad::scale(bound, -1.0));
                        critic_opt.step();
                    }

                    const LossTerms t = loss_total(batch, state, epoch, cfg, rng);
                    ad::backward(t.total);
                    model_opt.step();
                    acc += t.total.value()(0, 0);
                    ++nb;
                }
                epoch_loss = acc / nb;
                curve.push_back(epoch_loss);
            }
            summary.final_loss = epoch_loss;
            if (!std::isfinite(epoch_loss)) throw StructuralError("non-finite final loss");
            if (epoch_loss < result.best_loss) {
                result.best_loss = epoch_loss;
                result.state = std::move(state);
                result.epoch_losses = std::move(curve);
                found = true;
            }
        } catch (const StructuralError& e) {
            summary.diverged = true;
            summary.final_loss = std::numeric_limits<double>::quiet_NaN();
            last_failure = e.what();
        }
        result.restarts.push_back(summary);
    }
    if (!found)
        throw StructuralError("all " + std::to_string(cfg.restarts) +
                              " training restarts diverged; last failure: " + last_failure);
    return result;
}

HierGraph extract_structure(const MaskLogits& mask, double threshold) {
    if (!(threshold > 0 && threshold < 1)) throw ArgumentError("threshold must be in (0, 1)");
    const int L = static_cast<int>(mask.gamma.size());

    // Threshold the mask probabilities into binary blocks (top first).
    std::vector<BinMatrix> bin(static_cast<std::size_t>(L));
    for (int b = 0; b < L; ++b) {
        const auto& g = mask.gamma[static_cast<std::size_t>(b)].value();
        BinMatrix m(static_cast<std::size_t>(g.rows()), BinRow(static_cast<std::size_t>(g.cols()), 0));
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j)
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    1.0 / (1.0 + std::exp(-g(i, j))) > threshold ? 1 : 0;
        bin[static_cast<std::size_t>(b)] = std::move(m);
    }

    // Walk bottom-up, keeping rows with surviving children; a row dropped at
    // one layer removes its column from the layer above.
    std::vector<BinMatrix> kept_blocks;  // bottom-up
    std::vector<int> kept_cols;          // identity for the measured layer
    kept_cols.resize(static_cast<std::size_t>(mask.n_x));
    std::iota(kept_cols.begin(), kept_cols.end(), 0);
    for (int b = L - 1; b >= 0; --b) {
        const auto& src = bin[static_cast<std::size_t>(b)];
        BinMatrix pruned;
        std::vector<int> kept_rows;
        for (std::size_t i = 0; i < src.size(); ++i) {
            BinRow row;
            for (int c : kept_cols) row.push_back(src[i][static_cast<std::size_t>(c)]);
            if (std::any_of(row.begin(), row.end(), [](std::uint8_t v) { return v != 0; })) {
                pruned.push_back(std::move(row));
                kept_rows.push_back(static_cast<int>(i));
            }
        }
        if (pruned.empty()) break;  // nothing survives: this and higher layers vanish
        kept_blocks.push_back(std::move(pruned));
        kept_cols = std::move(kept_rows);
    }

    HierGraph g;
    g.num_measured = mask.n_x;
    if (kept_blocks.empty()) {
        // Degenerate all-pruned mask: one disconnected latent keeps the
        // graph well formed.
        g.layer_sizes = {1};
        g.blocks = {BinMatrix(1, BinRow(static_cast<std::size_t>(mask.n_x), 0))};
        return g;
    }
    for (auto it = kept_blocks.rbegin(); it != kept_blocks.rend(); ++it) {
        g.layer_sizes.push_back(static_cast<int>(it->size()));
        g.blocks.push_back(*it);
    }
    g.check_well_formed();
    return g;
}

void save_checkpoint(const ModelState& state, const TrainConfig& cfg, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["n_x"] = state.n_x;
    j["capacities"] = state.mask.capacities;
    j["config"] = {{"lr", cfg.lr},
                   {"epochs", cfg.epochs},
                   {"batch", cfg.batch},
                   {"temperature", cfg.temperature},
                   {"lambda1", cfg.lambda1},
                   {"lambda2", cfg.lambda2},
                   {"restarts", cfg.restarts},
                   {"mine_warmup", cfg.mine_warmup},
                   {"threshold", cfg.threshold},
                   {"seed", cfg.seed}};
    j["gamma"] = params_json(state.mask.gamma);
    j["encoder"] = params_json(state.encoder);
    json dec = json::array();
    for (const auto& layer : state.decoder) {
        json jl = json::array();
        for (const auto& node : layer) jl.push_back(params_json(node));
        dec.push_back(jl);
    }
    j["decoder"] = dec;
    j["critic"] = params_json(state.critic);
    std::ofstream f(path);
    if (!f) throw ParseError("cannot write checkpoint: " + path);
    f << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot read checkpoint: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ParseError("malformed checkpoint " + path + ": " + e.what());
    }
    if (j.value("format_version", 0) != 1)
        throw ParseError("unsupported checkpoint format version in " + path);

    Checkpoint out;
    const auto& c = j.at("config");
    out.cfg.lr = c.at("lr").get<double>();
    out.cfg.epochs = c.at("epochs").get<int>();
    out.cfg.batch = c.at("batch").get<int>();
    out.cfg.temperature = c.at("temperature").get<double>();
    out.cfg.lambda1 = c.at("lambda1").get<double>();
    out.cfg.lambda2 = c.at("lambda2").get<double>();
    out.cfg.restarts = c.at("restarts").get<int>();
    out.cfg.mine_warmup = c.at("mine_warmup").get<int>();
    out.cfg.threshold = c.at("threshold").get<double>();
    out.cfg.seed = c.at("seed").get<std::uint64_t>();

    out.state.n_x = j.at("n_x").get<int>();
    out.state.mask.n_x = out.state.n_x;
    out.state.mask.capacities = j.at("capacities").get<std::vector<int>>();
    out.state.mask.gamma = params_from_json(j.at("gamma"));
    out.state.encoder = params_from_json(j.at("encoder"));
    for (const auto& jl : j.at("decoder")) {
        std::vector<std::vector<ad::Var>> layer;
        for (const auto& jn : jl) layer.push_back(params_from_json(jn));
        out.state.decoder.push_back(std::move(layer));
    }
    out.state.critic = params_from_json(j.at("critic"));
    return out;
}

}  // namespace lhcm
