// paraflame: data generation, training, and evaluation for parametric
// time-advancement operators of the MS and KS front equations.
//
// Exit codes: 0 success, 1 selftest failure, 2 numeric failure,
//             3 training divergence, 64 usage/config error.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "paraflame/config.hpp"
#include "paraflame/eval.hpp"
#include "paraflame/gradcheck.hpp"
#include "paraflame/training.hpp"

namespace pf = paraflame;
namespace fs = std::filesystem;

namespace {

pf::solver::Equation equation_from(const std::string& name) {
    if (name == "ms") return pf::solver::Equation::MS;
    if (name == "ks") return pf::solver::Equation::KS;
    throw pf::ConfigError("equation must be 'ms' or 'ks', got '" + name + "'");
}

pf::data::GenerationPlan build_plan(const pf::config::RunConfig& cfg, const std::string& scale) {
    pf::data::GenerationPlan plan;
    if (scale == "paper") {
        plan = equation_from(cfg.equation) == pf::solver::Equation::MS
                   ? pf::data::paper_ms_plan()
                   : pf::data::paper_ks_plan();
    } else if (scale == "desk") {
        plan.equation = equation_from(cfg.equation);
        for (double g : cfg.gammas)
            plan.entries.push_back({g, static_cast<std::uint32_t>(cfg.sequences),
                                    static_cast<std::uint32_t>(cfg.frames)});
    } else {
        throw pf::ConfigError("--scale must be 'paper' or 'desk'");
    }
    plan.grid_size = static_cast<std::uint32_t>(cfg.grid);
    plan.dt = cfg.dt;
    plan.abs_tol = cfg.abs_tol;
    plan.rel_tol = cfg.rel_tol;
    plan.dealias = cfg.dealias;
    plan.base_seed = cfg.dataset_seed;
    plan.ic_low = cfg.ic_low;
    plan.ic_high = cfg.ic_high;
    return plan;
}

void print_plan_summary(const pf::data::GenerationPlan& plan) {
    std::map<double, std::pair<std::uint64_t, std::uint64_t>> per_gamma;  // records, frames
    for (const auto& e : plan.entries) {
        per_gamma[e.gamma].first += e.sequences;
        per_gamma[e.gamma].second += static_cast<std::uint64_t>(e.sequences) * e.frames;
    }
    std::uint64_t records = 0, frames = 0;
    for (const auto& [gamma, counts] : per_gamma) {
        std::printf("  gamma=%-8g records=%-6llu frames=%llu\n", gamma,
                    static_cast<unsigned long long>(counts.first),
                    static_cast<unsigned long long>(counts.second));
        records += counts.first;
        frames += counts.second;
    }
    std::printf("  total: %llu records, %llu frames (grid %u, dt %g)\n",
                static_cast<unsigned long long>(records),
                static_cast<unsigned long long>(frames), plan.grid_size, plan.dt);
}

std::unique_ptr<pf::models::Model> build_model(const pf::config::RunConfig& cfg,
                                               double gamma_min, double gamma_max) {
    pf::models::ParamEmbedding emb;
    emb.mode = cfg.embed == "linear" ? pf::models::ParamEmbedding::Mode::Linear
                                     : pf::models::ParamEmbedding::Mode::Log;
    emb.range_min = cfg.embed_min > 0.0 ? cfg.embed_min : gamma_min;
    emb.range_max = cfg.embed_max > 0.0 ? cfg.embed_max : gamma_max;

    const auto kind = pf::models::kind_from_name(cfg.kind);
    pf::models::PfnoSpec fno;
    fno.levels = cfg.levels;
    fno.width = cfg.width;
    fno.kmax = cfg.kmax;
    fno.n_gamma = cfg.n_gamma;
    fno.share_weights = cfg.share_weights;
    fno.use_skip = cfg.use_skip;
    fno.p_hidden = cfg.p_hidden;
    fno.q_hidden = cfg.q_hidden;
    fno.d_hidden = cfg.d_hidden;
    fno.embedding = emb;

    pf::models::PcnnSpec cnn;
    cnn.levels = cfg.pcnn_levels;
    cnn.channels.clear();
    for (double c : cfg.pcnn_channels) cnn.channels.push_back(static_cast<int>(c));
    cnn.channels.resize(static_cast<std::size_t>(cfg.pcnn_levels),
                        cnn.channels.empty() ? 16 : cnn.channels.back());
    cnn.param_levels = cfg.param_levels;
    cnn.convs_per_block = cfg.convs_per_block;
    cnn.use_inception = cfg.use_inception;
    cnn.d_hidden = cfg.d_hidden;
    cnn.embedding = emb;

    return pf::models::make_model(kind, fno, cnn, cfg.model_seed);
}

std::pair<double, double> gamma_range(const pf::data::TrajectorySet& set) {
    if (set.records.empty()) throw pf::ConfigError("dataset has no records");
    double lo = set.records.front().gamma, hi = lo;
    for (const auto& r : set.records) {
        lo = std::min(lo, r.gamma);
        hi = std::max(hi, r.gamma);
    }
    return {lo, hi};
}

int count_history_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::string line;
    int rows = 0;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (!line.empty()) ++rows;
    }
    return rows;
}

// ---------------------------------------------------------------------------

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 const std::string& scale, std::uint64_t seed_override, bool has_seed,
                 bool validation, bool plan_only, const std::string& csv_path, int csv_record) {
    auto cfg = pf::config::load(config_path);
    auto plan = build_plan(cfg, scale);
    if (has_seed) plan.base_seed = seed_override;
    if (validation) plan = pf::data::validation_plan(plan);

    std::printf("%s plan (%s):\n", scale.c_str(), validation ? "validation" : "training");
    print_plan_summary(plan);
    if (plan_only) return 0;

    auto set = pf::data::generate(plan);
    pf::data::save(set, out_path);
    std::uint64_t frames = 0;
    for (const auto& r : set.records) frames += r.frames.size();
    std::printf("wrote %s: %zu records, %llu frames\n", out_path.c_str(), set.records.size(),
                static_cast<unsigned long long>(frames));
    if (!csv_path.empty()) {
        pf::data::export_csv(set, static_cast<std::size_t>(csv_record), csv_path);
        std::printf("exported record %d to %s\n", csv_record, csv_path.c_str());
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& valid_path, const std::string& out_path,
              std::uint64_t seed_override, bool has_seed, const std::string& resume_path,
              std::string history_path) {
    auto cfg = pf::config::load(config_path);
    if (history_path.empty()) history_path = out_path + ".history.csv";

    auto train_set = pf::data::load(data_path);
    auto valid_set = pf::data::load(valid_path);
    if (train_set.grid_size != valid_set.grid_size)
        throw pf::ConfigError("train/validation grid sizes differ");

    pf::training::TrainConfig tc;
    tc.horizon = cfg.horizon;
    tc.epochs = cfg.epochs;
    tc.batch_size = static_cast<std::size_t>(cfg.batch);
    tc.lr0 = cfg.lr0;
    tc.weight_decay = cfg.weight_decay;
    tc.lr_step = cfg.lr_step;
    tc.lr_gamma = cfg.lr_gamma;
    tc.clip_norm = cfg.clip;
    tc.stride = static_cast<std::uint32_t>(cfg.stride);
    tc.seed = has_seed ? seed_override : cfg.train_seed;
    tc.decoupled_decay = cfg.decoupled_decay;

    std::unique_ptr<pf::models::Model> model;
    int start_epoch = 0;
    std::vector<pf::training::EpochStats> old_rows;
    if (!resume_path.empty()) {
        model = pf::models::load_checkpoint(resume_path);
        start_epoch = count_history_rows(history_path);
        std::ifstream in(history_path);
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (header || line.empty()) {
                header = false;
                continue;
            }
            pf::training::EpochStats row;
            if (std::sscanf(line.c_str(), "%d,%lg,%lg,%lg", &row.epoch, &row.lr, &row.train_loss,
                            &row.valid_loss) == 4)
                old_rows.push_back(row);
        }
        std::printf("resuming from %s at epoch %d\n", resume_path.c_str(), start_epoch);
    } else {
        auto [lo, hi] = gamma_range(train_set);
        model = build_model(cfg, lo, hi);
    }

    std::printf("training %s: %zu parameters, %d epochs, horizon %d\n",
                pf::models::kind_name(model->kind()), model->parameter_count(), tc.epochs,
                tc.horizon);
    auto result = pf::training::train(*model, train_set, valid_set, tc, start_epoch);

    pf::io::atomic_write(out_path, result.best_checkpoint);
    old_rows.insert(old_rows.end(), result.history.begin(), result.history.end());
    pf::training::write_history(old_rows, history_path);

    std::printf("done: best valid %.6g at epoch %d; checkpoint %s, history %s\n",
                result.best_valid, result.best_epoch, out_path.c_str(), history_path.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path, bool solver_reference,
             const std::vector<std::string>& metrics, const std::string& out_dir,
             const std::string& config_path, double gamma_override, bool has_gamma,
             std::uint64_t seed_override, bool has_seed) {
    pf::config::RunConfig cfg;
    if (!config_path.empty()) cfg = pf::config::load(config_path);
    if (metrics.empty()) throw pf::ConfigError("--metrics requires at least one of err,len,corr");
    for (const auto& m : metrics)
        if (m != "err" && m != "len" && m != "corr")
            throw pf::ConfigError("unknown metric '" + m + "' (expected err, len, corr)");
    if (data_path.empty() && !solver_reference)
        throw pf::ConfigError("eval needs --data or --solver-reference");

    const std::uint64_t seed = has_seed ? seed_override : cfg.eval_seed;

    std::vector<pf::Field> reference;
    double gamma = has_gamma ? gamma_override : cfg.eval_gamma;
    double dt = cfg.dt;
    std::uint32_t grid = static_cast<std::uint32_t>(cfg.grid);
    pf::solver::Equation equation = equation_from(cfg.equation);

    if (!data_path.empty()) {
        auto set = pf::data::load(data_path);
        if (cfg.record < 0 || static_cast<std::size_t>(cfg.record) >= set.records.size())
            throw pf::ConfigError("record index out of range");
        auto& rec = set.records[static_cast<std::size_t>(cfg.record)];
        reference = std::move(rec.frames);
        if (!has_gamma) gamma = rec.gamma;
        dt = rec.dt;
        grid = set.grid_size;
        equation = set.equation;
    }

    pf::solver::SolverConfig scfg;
    scfg.equation = equation;
    scfg.gamma = gamma;
    scfg.dt = dt;
    scfg.abs_tol = cfg.abs_tol;
    scfg.rel_tol = cfg.rel_tol;
    scfg.dealias = cfg.dealias;

    // the literal checkpoint name "solver" wraps the reference solver as the
    // stepper (oracle mode)
    std::unique_ptr<pf::models::Model> model;
    pf::eval::Stepper stepper;
    std::string label;
    if (checkpoint == "solver") {
        stepper = pf::eval::solver_stepper(scfg);
        label = "solver";
    } else {
        model = pf::models::load_checkpoint(checkpoint);
        stepper = pf::eval::model_stepper(*model);
        label = pf::models::kind_name(model->kind());
    }

    if (reference.empty()) {
        auto ref_stepper = pf::eval::solver_stepper(scfg);
        pf::Field ic = pf::data::sample_initial_condition(grid, seed, cfg.ic_low, cfg.ic_high);
        reference.push_back(ic);
        for (int k = 0; k < cfg.eval_steps; ++k)
            reference.push_back(ref_stepper(reference.back(), gamma));
    }

    fs::create_directories(out_dir);
    for (const auto& metric : metrics) {
        const fs::path path = fs::path(out_dir) / (metric == "err"   ? "err.csv"
                                                   : metric == "len" ? "length.csv"
                                                                     : "corr.csv");
        if (metric == "err") {
            auto series = pf::eval::error_vs_time(stepper, reference, gamma, dt, label);
            pf::eval::write_series_csv(series, path, "t,e", label, gamma, seed);
        } else if (metric == "len") {
            pf::eval::MetricSeries series;
            series.times.push_back(0.0);
            series.values.push_back(pf::eval::front_length(reference.front()));
            auto roll = pf::eval::rollout(stepper, reference.front(), gamma,
                                          static_cast<int>(reference.size()) - 1);
            for (std::size_t k = 0; k < roll.frames.size(); ++k) {
                series.times.push_back(static_cast<double>(k + 1) * dt);
                series.values.push_back(pf::eval::front_length(roll.frames[k]));
            }
            pf::eval::write_series_csv(series, path, "t,L", label, gamma, seed);
        } else {
            auto stats = pf::eval::long_term_stats(stepper, gamma, grid, cfg.burn_in,
                                                   cfg.samples, cfg.sample_every, seed);
            pf::eval::write_corr_csv(stats.correlation, path, label, gamma, seed);
            std::printf("mean front length over %d frames: %.6g%s\n", stats.frames_used,
                        stats.mean_front_length, stats.complete ? "" : " (partial)");
        }
        std::printf("wrote %s\n", path.string().c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// selftest

struct Check {
    std::string name;
    double max_err = 0.0;
    double tol = 0.0;
    bool pass() const { return max_err <= tol; }
};

double selftest_fft_roundtrip() {
    pf::StreamRng rng(101);
    std::vector<double> x(128);
    for (auto& v : x) v = rng.uniform(-1, 1);
    auto back = pf::fft::synthesize(pf::fft::analyze(x));
    double err = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) err = std::max(err, std::abs(back[j] - x[j]));
    return err;
}

double selftest_fft_vs_direct() {
    const std::size_t n = 64;
    pf::StreamRng rng(103);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1, 1);
    auto spec = pf::fft::analyze(x);
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> want = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double a = -2.0 * M_PI * double(j) * double(k) / double(n);
            want += x[j] * std::complex<double>(std::cos(a), std::sin(a));
        }
        err = std::max(err, std::abs(spec[k] - want));
    }
    return err;
}

double selftest_gamma_eigenmodes() {
    const std::size_t n = 128;
    double err = 0.0;
    for (int k = 1; k <= 5; ++k) {
        auto f = pf::sample_cosine(n, k, 1.0);
        auto g = pf::solver::gamma_op(f);
        for (std::size_t j = 0; j < n; ++j)
            err = std::max(err, std::abs(g[j] - k * std::cos(k * f.x(j))));
    }
    return err;
}

double selftest_spectral_derivative() {
    const std::size_t n = 128;
    auto f = pf::sample_cosine(n, 3, 1.0, 0.3);
    auto d = pf::fft::spectral_derivative(f.values, 1);
    double err = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        err = std::max(err, std::abs(d[j] + 3.0 * std::sin(3 * f.x(j) + 0.3)));
    return err;
}

double selftest_spectral_identity() {
    const std::int64_t n = 64;
    pf::StreamRng rng(107);
    pf::Tensor x = pf::Tensor::zeros({2, n});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    auto xn = pf::ad::constant(x);
    auto y = pf::ad::irfft_pad(pf::ad::rfft_truncate(xn, n / 2), n, pf::ad::spatial_mean(xn));
    double err = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i)
        err = std::max(err, std::abs(y->value.data[i] - x.data[i]));
    return err;
}

double selftest_rfft_adjoint() {
    const std::int64_t n = 64, kmax = 20;
    pf::StreamRng rng(109);
    pf::Tensor x = pf::Tensor::zeros({1, n});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    pf::Tensor y = pf::Tensor::zeros({kmax, 1}, pf::Dtype::Complex);
    for (auto& v : y.data) v = rng.uniform(-1, 1);

    auto xv = pf::ad::variable(x);
    auto fx = pf::ad::rfft_truncate(xv, kmax);
    double lhs = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) lhs += fx->value.data[i] * y.data[i];
    auto probe =
        pf::ad::make_node("probe", pf::Tensor::scalar(0.0), {fx}, [&y](pf::ad::Node& self) {
            for (std::size_t i = 0; i < y.data.size(); ++i)
                self.parents[0]->grad.data[i] += y.data[i] * self.grad.data[0];
        });
    pf::ad::backward(probe);
    double rhs = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * xv->grad.data[i];
    return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

double selftest_band_partition() {
    double bad = 0.0;
    for (std::int64_t kmax : {16, 64, 128}) {
        for (int ng = 0; ng <= 5; ++ng) {
            if (kmax < (std::int64_t(1) << ng)) continue;
            for (std::int64_t k = 1; k <= kmax; ++k) {
                const int band = pf::ad::band_of(k, kmax, ng);
                if (band < 0 || band > ng) bad += 1.0;
            }
        }
    }
    return bad;
}

double selftest_gradient_primitives() {
    pf::StreamRng rng(113);
    auto rnd = [&rng](std::vector<std::int64_t> shape, pf::Dtype d = pf::Dtype::Real) {
        pf::Tensor t = pf::Tensor::zeros(std::move(shape), d);
        for (auto& v : t.data) v = 0.6 * rng.uniform(-1, 1);
        return t;
    };
    pf::ad::Parameter k("k", rnd({2, 2, 3}));
    pf::ad::Parameter w("w", rnd({2, 2}));
    pf::ad::Parameter b("b", rnd({2}));
    pf::ad::Parameter r("r", rnd({4, 2, 2}, pf::Dtype::Complex));
    pf::ad::Parameter d("d", rnd({3}));
    pf::Tensor x = rnd({2, 16});
    pf::Tensor target = rnd({2, 16});
    std::vector<pf::ad::Parameter> params{k, w, b, r, d};
    auto build = [&]() {
        auto h = pf::ad::relu(pf::ad::conv1d_periodic(pf::ad::constant(x), k.node, b.node));
        h = pf::ad::channel_linear(h, w.node, b.node);
        auto spec = pf::ad::rfft_truncate(h, 4);
        auto scale = pf::ad::band_map(pf::ad::softplus(d.node), 4, 2);
        auto mixed = pf::ad::complex_mode_mix(pf::ad::mode_scale(spec, scale), r.node);
        auto out = pf::ad::irfft_pad(mixed, 16, pf::ad::spatial_mean(h));
        out = pf::ad::add(out, pf::ad::upsample1d(pf::ad::maxpool1d(out)));
        return pf::ad::l2_norm(pf::ad::sub(out, pf::ad::constant(target)));
    };
    return pf::ad::gradient_check(build, params);
}

double selftest_gradient_model(pf::models::ModelKind kind) {
    if (kind == pf::models::ModelKind::Pcnn) {
        pf::models::PcnnSpec spec;
        spec.levels = 3;
        spec.channels = {3, 4, 5};
        spec.param_levels = 2;
        spec.d_hidden = 8;
        spec.embedding.range_min = 6.0;
        spec.embedding.range_max = 24.0;
        pf::models::PcnnModel model(spec, 53);
        pf::StreamRng rng(4053);
        for (auto& p : model.parameters())
            for (auto& v : p.tensor().data) v = 0.4 * rng.uniform(-1, 1);
        pf::StreamRng frng(59);
        pf::Tensor v = pf::Tensor::zeros({1, 32}), target = pf::Tensor::zeros({1, 32});
        for (auto& x : v.data) x = 0.4 * frng.uniform(-1, 1);
        pf::StreamRng trng(60);
        for (auto& x : target.data) x = trng.uniform(-1, 1);
        auto build = [&]() {
            return pf::ad::l2_norm(
                pf::ad::sub(model.forward(pf::ad::constant(v), 12.0), pf::ad::constant(target)));
        };
        return pf::ad::gradient_check(build, model.parameters());
    }
    pf::models::PfnoSpec spec;
    spec.levels = 2;
    spec.width = 3;
    spec.kmax = 4;
    spec.n_gamma = 1;
    spec.d_hidden = 8;
    spec.embedding.range_min = 6.0;
    spec.embedding.range_max = 24.0;
    pf::models::PfnoModel model(spec, kind, 43);
    pf::StreamRng rng(kind == pf::models::ModelKind::Pfno ? 5043 : 1143);
    for (auto& p : model.parameters())
        for (auto& v : p.tensor().data) v = 0.5 * rng.uniform(-1, 1);
    pf::StreamRng frng(47);
    pf::Tensor v = pf::Tensor::zeros({1, 16}), target = pf::Tensor::zeros({1, 16});
    for (auto& x : v.data) x = 0.4 * frng.uniform(-1, 1);
    pf::StreamRng trng(48);
    for (auto& x : target.data) x = trng.uniform(-1, 1);
    auto build = [&]() {
        return pf::ad::l2_norm(
            pf::ad::sub(model.forward(pf::ad::constant(v), 9.0), pf::ad::constant(target)));
    };
    return pf::ad::gradient_check(build, model.parameters());
}

double selftest_maxpool_routing() {
    auto x = pf::ad::variable(pf::Tensor::from({1, 4}, {1, 3, 2, 2}));
    pf::ad::backward(pf::ad::sum(pf::ad::maxpool1d(x)));
    const std::vector<double> want{0, 1, 1, 0};
    double err = 0.0;
    for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(x->grad.data[i] - want[i]));
    return err;
}

int cmd_selftest(double inject_fft_scale) {
    if (inject_fft_scale != 1.0) {
        std::printf("test hook: injecting synthesis scale %.6g\n", inject_fft_scale);
        pf::fft::synthesis_scale_hook() = inject_fft_scale;
    }
    std::vector<Check> checks;
    checks.push_back({"fft_roundtrip", selftest_fft_roundtrip(), 1e-12});
    checks.push_back({"fft_vs_direct_dft", selftest_fft_vs_direct(), 1e-10});
    checks.push_back({"gamma_op_eigenmodes", selftest_gamma_eigenmodes(), 1e-10});
    checks.push_back({"spectral_derivative", selftest_spectral_derivative(), 1e-10});
    checks.push_back({"spectral_roundtrip_identity", selftest_spectral_identity(), 1e-12});
    checks.push_back({"rfft_adjoint", selftest_rfft_adjoint(), 1e-10});
    checks.push_back({"band_map_partition", selftest_band_partition(), 0.0});
    checks.push_back({"maxpool_tie_routing", selftest_maxpool_routing(), 0.0});
    checks.push_back({"gradient_primitives", selftest_gradient_primitives(), 1e-5});
    checks.push_back({"gradient_pfno", selftest_gradient_model(pf::models::ModelKind::Pfno), 1e-5});
    checks.push_back(
        {"gradient_pfno_star", selftest_gradient_model(pf::models::ModelKind::PfnoStar), 1e-5});
    checks.push_back({"gradient_pcnn", selftest_gradient_model(pf::models::ModelKind::Pcnn), 1e-5});

    int failures = 0;
    for (const auto& c : checks) {
        std::printf("[%s] %-28s max_err=%.3e (tol %.1e)\n", c.pass() ? "PASS" : "FAIL",
                    c.name.c_str(), c.max_err, c.tol);
        if (!c.pass()) ++failures;
    }
    if (failures) {
        std::printf("selftest: %d of %zu checks failed\n", failures, checks.size());
        return 1;
    }
    std::printf("selftest: all %zu checks passed\n", checks.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parametric time-advancement operator learning for 1D flame-front equations"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "integrate trajectories and write a dataset");
    std::string gen_config, gen_out, gen_scale = "desk";
    std::uint64_t gen_seed = 0;
    bool gen_validation = false, gen_plan_only = false;
    gen->add_option("config", gen_config, "run configuration file")->required();
    gen->add_option("--out", gen_out, "output dataset path");
    gen->add_option("--scale", gen_scale, "plan scale: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override [dataset].seed");
    gen->add_flag("--validation", gen_validation, "emit the 10% validation companion set");
    gen->add_flag("--plan-only", gen_plan_only, "print the plan summary and exit");
    std::string gen_csv;
    int gen_csv_record = 0;
    gen->add_option("--export-csv", gen_csv, "also export one record as CSV");
    gen->add_option("--export-record", gen_csv_record, "record index for --export-csv");

    auto* tr = app.add_subcommand("train", "optimize a model on a dataset");
    std::string tr_config, tr_data, tr_valid, tr_out, tr_resume, tr_history;
    std::uint64_t tr_seed = 0;
    tr->add_option("config", tr_config, "run configuration file")->required();
    tr->add_option("--data", tr_data, "training dataset")->required();
    tr->add_option("--valid", tr_valid, "validation dataset")->required();
    tr->add_option("--out", tr_out, "output checkpoint path")->required();
    auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "override [train].seed");
    tr->add_option("--resume", tr_resume, "checkpoint to continue from");
    tr->add_option("--history", tr_history, "history csv path (default <out>.history.csv)");

    auto* ev = app.add_subcommand("eval", "roll out a checkpoint and write metric CSVs");
    std::string ev_ckpt, ev_data, ev_out = ".", ev_config;
    std::vector<std::string> ev_metrics;
    bool ev_solver_ref = false;
    double ev_gamma = 0.0;
    std::uint64_t ev_seed = 0;
    ev->add_option("checkpoint", ev_ckpt, "checkpoint path, or 'solver' for the oracle")
        ->required();
    ev->add_option("--data", ev_data, "dataset with the reference trajectory");
    ev->add_flag("--solver-reference", ev_solver_ref,
                 "generate the reference with the solver instead of --data");
    ev->add_option("--metrics", ev_metrics, "any of: err len corr")->delimiter(',');
    ev->add_option("--out", ev_out, "output directory");
    ev->add_option("--config", ev_config, "run configuration file");
    auto* ev_gamma_opt = ev->add_option("--gamma", ev_gamma, "override the PDE parameter");
    auto* ev_seed_opt = ev->add_option("--seed", ev_seed, "override [eval].seed");

    auto* st = app.add_subcommand("selftest", "run built-in numerical checks");
    double st_inject = 1.0;
    st->add_option("--inject-fft-scale", st_inject,
                   "test hook: corrupt the synthesis scale to prove failure detection");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    try {
        if (gen->parsed()) {
            if (gen_out.empty() && !gen_plan_only)
                throw pf::ConfigError("generate: --out is required unless --plan-only");
            return cmd_generate(gen_config, gen_out, gen_scale, gen_seed, !gen_seed_opt->empty(),
                                gen_validation, gen_plan_only, gen_csv, gen_csv_record);
        }
        if (tr->parsed())
            return cmd_train(tr_config, tr_data, tr_valid, tr_out, tr_seed,
                             !tr_seed_opt->empty(), tr_resume, tr_history);
        if (ev->parsed())
            return cmd_eval(ev_ckpt, ev_data, ev_solver_ref, ev_metrics, ev_out, ev_config,
                            ev_gamma, !ev_gamma_opt->empty(), ev_seed, !ev_seed_opt->empty());
        if (st->parsed()) return cmd_selftest(st_inject);
    } catch (const pf::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 64;
    } catch (const pf::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 64;
    } catch (const pf::TrainingDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const pf::IntegrationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
