#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "paraflame/dataset.hpp"
#include "paraflame/gradcheck.hpp"
#include "paraflame/models.hpp"

// Optimization of a model under the recurrent 1-to-n objective
//   loss = (1/n) sum_k ||p_k - t_k||_2 / ||t_k||_2,  p_k = model(p_{k-1}, gamma)
// with gradients flowing through the whole rollout. Batch members are
// processed sequentially in index order, so training is bit-reproducible for
// a given (seed, config, dataset).

namespace paraflame::training {

struct TrainConfig {
    int horizon = 20;  // n successive predictions per input
    int epochs = 1000;
    std::size_t batch_size = 800;
    double lr0 = 0.0025;
    double weight_decay = 1e-4;
    int lr_step = 100;
    double lr_gamma = 0.5;
    double clip_norm = 50.0;  // <= 0 disables clipping
    std::uint32_t stride = 1;
    std::uint64_t seed = 0;
    bool decoupled_decay = false;

    void validate() const {
        if (horizon < 1) throw ConfigError("TrainConfig: horizon must be >= 1");
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (lr0 < 0 || weight_decay < 0) throw ConfigError("TrainConfig: negative lr or decay");
        if (lr_step < 1 || lr_gamma <= 0) throw ConfigError("TrainConfig: bad scheduler");
    }
};

inline double lr_at(const TrainConfig& cfg, int epoch) {
    return cfg.lr0 * std::pow(cfg.lr_gamma, epoch / cfg.lr_step);
}

/// Rollout loss graph: every prediction feeds the next model application.
inline ad::NodeRef recurrent_loss(models::Model& model, const Field& input, double gamma,
                                  const std::vector<Field>& targets) {
    if (targets.empty()) throw ContractError("recurrent_loss: need at least one target");
    const auto n = static_cast<std::int64_t>(input.size());
    ad::NodeRef p = ad::constant(Tensor::from({1, n}, input.values));
    ad::NodeRef loss;
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    for (const Field& target : targets) {
        p = model.forward(p, gamma);
        double t_norm = 0.0;
        for (double v : target.values) t_norm += v * v;
        t_norm = std::sqrt(t_norm);
        const double denom = std::max(t_norm, 1e-12);
        auto diff = ad::sub(p, ad::constant(Tensor::from({1, n}, target.values)));
        auto term = ad::scale(ad::l2_norm(diff), inv_n / denom);
        loss = loss ? ad::add(loss, term) : term;
    }
    return loss;
}

/// Forward-only rollout loss (validation metric; same definition).
inline double rollout_loss_value(models::Model& model, const Field& input, double gamma,
                                 const std::vector<Field>& targets) {
    ad::NoGradGuard guard;
    return recurrent_loss(model, input, gamma, targets)->value.data[0];
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamState {
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
    std::int64_t step = 0;
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

/// Scales all gradients by max_norm/norm when the global L2 norm exceeds
/// max_norm. Returns the pre-clip norm.
inline double clip_gradients(ad::GradMap& grads, double max_norm = 50.0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& [name, g] : grads)
            for (double& v : g.data) v *= s;
    }
    return norm;
}

/// One Adam update. The L2 term enters the gradient before the moments
/// (coupled form) unless decoupled is set, in which case it is applied
/// directly to the weights.
inline void adam_step(std::vector<ad::Parameter>& params, const ad::GradMap& grads,
                      AdamState& state, double lr, double weight_decay = 0.0,
                      bool decoupled = false) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (auto& p : params) {
        if (!p.trainable()) continue;
        auto it = grads.find(p.name());
        Tensor& theta = p.tensor();
        Tensor zero;
        const Tensor* g = nullptr;
        if (it == grads.end()) {
            zero = Tensor::zeros(theta.shape, theta.dtype);
            g = &zero;  // unreachable parameter: zero gradient
        } else {
            g = &it->second;
        }
        if (!g->data.empty() && g->data.size() != theta.data.size())
            throw ContractError("adam_step: gradient shape mismatch for '" + p.name() + "'");
        auto& m = state.first_moment.try_emplace(p.name(), Tensor::zeros(theta.shape, theta.dtype))
                      .first->second;
        auto& v = state.second_moment.try_emplace(p.name(), Tensor::zeros(theta.shape, theta.dtype))
                      .first->second;
        for (std::size_t i = 0; i < theta.data.size(); ++i) {
            double gi = g->data[i];
            if (!std::isfinite(gi))
                throw TrainingDivergence("adam_step: non-finite gradient in '" + p.name() + "'");
            if (!decoupled) gi += weight_decay * theta.data[i];
            m.data[i] = kAdamBeta1 * m.data[i] + (1.0 - kAdamBeta1) * gi;
            v.data[i] = kAdamBeta2 * v.data[i] + (1.0 - kAdamBeta2) * gi * gi;
            const double m_hat = m.data[i] / bc1;
            const double v_hat = v.data[i] / bc2;
            theta.data[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
            if (decoupled) theta.data[i] -= lr * weight_decay * theta.data[i];
        }
    }
}

// ---------------------------------------------------------------------------
// training loop

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_valid = 0.0;
    std::string best_checkpoint;  // serialized bytes of the best-validation model
};

inline void write_history(const std::vector<EpochStats>& rows,
                          const std::filesystem::path& path) {
    std::string out = "epoch,lr,train_loss,valid_loss\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.train_loss,
                      r.valid_loss);
        out += buf;
    }
    io::atomic_write(path, out);
}

/// Runs the optimization; history covers epochs [start_epoch, cfg.epochs).
/// The returned checkpoint is the best-validation snapshot.
inline TrainResult train(models::Model& model, const data::TrajectorySet& train_set,
                         const data::TrajectorySet& valid_set, const TrainConfig& cfg,
                         int start_epoch = 0) {
    cfg.validate();
    if (train_set.records.empty() || valid_set.records.empty())
        throw ConfigError("train: training and validation sets must be non-empty");

    TrainResult result;
    AdamState opt;
    auto& params = model.parameters();

    data::PairStream valid_stream(valid_set, cfg.horizon, cfg.stride,
                                  derive_seed(cfg.seed, 0x7A11Dull), cfg.batch_size);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        data::PairStream stream(train_set, cfg.horizon, cfg.stride,
                                derive_seed(cfg.seed, 1000003ull + epoch), cfg.batch_size);
        if (stream.pair_count() == 0)
            throw ConfigError("train: no training pairs (records shorter than horizon?)");

        double loss_sum = 0.0;
        std::size_t pair_count = 0;
        for (std::size_t b = 0; b < stream.batch_count(); ++b) {
            data::PairBatch batch = stream.batch(b);
            ad::GradMap acc;
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
                auto loss = recurrent_loss(model, batch.inputs[i].first, batch.inputs[i].second,
                                           batch.targets[i]);
                const double value = loss->value.data[0];
                if (!std::isfinite(value))
                    throw TrainingDivergence("train: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(b) + ", member " + std::to_string(i));
                batch_loss += value;
                ad::GradMap grads = ad::backward(loss);
                for (auto& [name, g] : grads) {
                    auto [it, fresh] = acc.try_emplace(name, g);
                    if (!fresh)
                        for (std::size_t j = 0; j < g.data.size(); ++j)
                            it->second.data[j] += g.data[j];
                }
            }
            const double inv = 1.0 / static_cast<double>(batch.inputs.size());
            for (auto& [name, g] : acc)
                for (double& v : g.data) v *= inv;
            clip_gradients(acc, cfg.clip_norm);
            adam_step(params, acc, opt, lr, cfg.weight_decay, cfg.decoupled_decay);
            loss_sum += batch_loss;
            pair_count += batch.inputs.size();
        }

        double valid_sum = 0.0;
        std::size_t valid_count = 0;
        for (std::size_t b = 0; b < valid_stream.batch_count(); ++b) {
            data::PairBatch batch = valid_stream.batch(b);
            for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
                valid_sum += rollout_loss_value(model, batch.inputs[i].first,
                                                batch.inputs[i].second, batch.targets[i]);
                ++valid_count;
            }
        }
        if (valid_count == 0) throw ConfigError("train: no validation pairs");

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = loss_sum / static_cast<double>(pair_count);
        stats.valid_loss = valid_sum / static_cast<double>(valid_count);
        result.history.push_back(stats);

        if (result.best_epoch < 0 || stats.valid_loss < result.best_valid) {
            result.best_epoch = epoch;
            result.best_valid = stats.valid_loss;
            result.best_checkpoint = models::serialize_checkpoint(model);
        }
    }
    return result;
}

}  // namespace paraflame::training
