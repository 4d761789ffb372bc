#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "paraflame/dataset.hpp"
#include "paraflame/models.hpp"

// Rollout generation and the reported statistics: relative L2 error curves,
// front slope and length, and the long-term autocorrelation R(r).

namespace paraflame::eval {

/// One time-advancement step: either a trained model or the reference solver.
using Stepper = std::function<Field(const Field&, double gamma)>;

inline Stepper model_stepper(models::Model& m) {
    return [&m](const Field& f, double gamma) { return m.step(f, gamma); };
}

inline Stepper solver_stepper(solver::SolverConfig cfg) {
    return [cfg](const Field& f, double gamma) mutable {
        cfg.gamma = gamma;
        return solver::integrate(f, cfg, 1).front();
    };
}

struct RolloutResult {
    std::vector<Field> frames;
    bool truncated = false;  // hit a non-finite state
    int steps_completed = 0;
};

/// p_k = step(p_{k-1}); stops early (with the step index) on a non-finite
/// state instead of propagating garbage.
inline RolloutResult rollout(const Stepper& step, const Field& phi0, double gamma, int steps) {
    if (steps < 1) throw ContractError("rollout: steps must be >= 1");
    RolloutResult out;
    out.frames.reserve(static_cast<std::size_t>(steps));
    Field p = phi0;
    for (int k = 1; k <= steps; ++k) {
        p = step(p, gamma);
        if (!p.all_finite()) {
            out.truncated = true;
            std::cerr << "warning: rollout diverged at step " << k << "; truncating\n";
            return out;
        }
        out.frames.push_back(p);
        out.steps_completed = k;
    }
    return out;
}

inline double relative_l2(const Field& pred, const Field& ref) {
    if (pred.size() != ref.size())
        throw ContractError("relative_l2: size mismatch " + std::to_string(pred.size()) +
                            " vs " + std::to_string(ref.size()));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < ref.size(); ++j) {
        const double d = pred[j] - ref[j];
        num += d * d;
        den += ref[j] * ref[j];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Spectral derivative of the front displacement.
inline Field front_slope(const Field& phi) {
    return Field(fft::spectral_derivative(phi.values, 1));
}

/// Quadrature half of the front-length computation, exposed so slope fields
/// can be fed directly: (1/2pi) Integral sqrt(slope^2 + 1) dx, trapezoid on
/// the periodic grid.
inline double front_length_from_slope(const Field& slope) {
    double s = 0.0;
    for (double v : slope.values) s += std::sqrt(v * v + 1.0);
    return s / static_cast<double>(slope.size());
}

/// Normalized total front length of a displacement field.
inline double front_length(const Field& phi) {
    return front_length_from_slope(front_slope(phi));
}

struct CorrelationCurve {
    std::vector<double> lags;    // r over [-pi, pi)
    std::vector<double> values;  // R(r)
};

/// Ensemble-averaged normalized circular autocorrelation, computed via FFT.
/// Each member has its spatial mean removed first (the long-time fronts carry
/// a large drifting mean that would otherwise flatten R to 1); zero-variance
/// members are excluded with a warning.
inline CorrelationCurve autocorrelation(const std::vector<Field>& ensemble) {
    if (ensemble.empty()) throw ContractError("autocorrelation: empty ensemble");
    const std::size_t n = ensemble.front().size();
    std::vector<double> acc(n, 0.0);
    std::size_t used = 0;
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
        const Field& f = ensemble[m];
        if (f.size() != n) throw ContractError("autocorrelation: mixed grid sizes");
        double mean = 0.0;
        for (double v : f.values) mean += v;
        mean /= static_cast<double>(n);
        std::vector<double> centered(n);
        for (std::size_t j = 0; j < n; ++j) centered[j] = f.values[j] - mean;

        auto spec = fft::analyze(centered);
        std::vector<std::complex<double>> power(n);
        for (std::size_t k = 0; k < n; ++k) power[k] = std::norm(spec[k]);
        auto corr = fft::synthesize(power);  // corr[r] = sum_j f*_j f*_{j-r}
        if (corr[0] <= 1e-24) {
            std::cerr << "warning: autocorrelation member " << m
                      << " has zero variance; excluded\n";
            continue;
        }
        for (std::size_t r = 0; r < n; ++r) acc[r] += corr[r] / corr[0];
        ++used;
    }
    if (used == 0) throw ContractError("autocorrelation: all members had zero variance");

    CorrelationCurve out;
    out.lags.resize(n);
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.lags[i] = -M_PI + 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
        const std::size_t shift = (i + n - n / 2) % n;  // lag r = 2*pi*shift/N
        out.values[i] = acc[shift] / static_cast<double>(used);
    }
    return out;
}

struct MetricSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::string label;
    double gamma = 0.0;
};

/// Relative L2 error of the model rollout against each reference frame;
/// entry 0 compares the shared initial state and is 0 by construction.
inline MetricSeries error_vs_time(const Stepper& step, const std::vector<Field>& reference,
                                  double gamma, double dt, const std::string& label = "") {
    if (reference.size() < 2)
        throw ContractError("error_vs_time: reference trajectory needs at least 2 frames");
    MetricSeries out;
    out.label = label;
    out.gamma = gamma;
    Field p = reference.front();
    out.times.push_back(0.0);
    out.values.push_back(0.0);
    for (std::size_t k = 1; k < reference.size(); ++k) {
        p = step(p, gamma);
        if (!p.all_finite()) {
            std::cerr << "warning: error_vs_time rollout diverged at step " << k << "\n";
            break;
        }
        out.times.push_back(static_cast<double>(k) * dt);
        out.values.push_back(relative_l2(p, reference[k]));
    }
    return out;
}

struct LongTermStats {
    CorrelationCurve correlation;
    double mean_front_length = 0.0;
    int frames_used = 0;
    bool complete = true;  // false when the rollout diverged early
};

/// Rolls out from a fresh random initial condition, discards burn_in frames,
/// then samples every sample_every-th frame into the statistics ensemble.
inline LongTermStats long_term_stats(const Stepper& step, double gamma, std::uint32_t grid_size,
                                     int burn_in, int samples, int sample_every,
                                     std::uint64_t seed) {
    if (burn_in < 0 || samples < 1 || sample_every < 1)
        throw ContractError("long_term_stats: bad burn_in/samples/sample_every");
    Field p = data::sample_initial_condition(grid_size, seed);
    LongTermStats out;
    std::vector<Field> ensemble;
    ensemble.reserve(static_cast<std::size_t>(samples));
    double length_sum = 0.0;
    const int total = burn_in + samples * sample_every;
    for (int k = 1; k <= total; ++k) {
        p = step(p, gamma);
        if (!p.all_finite()) {
            std::cerr << "warning: long_term_stats rollout diverged at step " << k
                      << "; partial result\n";
            out.complete = false;
            break;
        }
        if (k > burn_in && (k - burn_in) % sample_every == 0) {
            ensemble.push_back(p);
            length_sum += front_length(p);
        }
    }
    if (ensemble.empty())
        throw IntegrationError("long_term_stats: no frames survived burn-in", 0.0);
    out.frames_used = static_cast<int>(ensemble.size());
    out.mean_front_length = length_sum / static_cast<double>(ensemble.size());
    out.correlation = autocorrelation(ensemble);
    return out;
}

// ---------------------------------------------------------------------------
// CSV emitters; each file carries one metadata comment line

namespace detail {

inline std::string metadata_line(const std::string& model, double gamma, std::uint64_t seed) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "# model=%s gamma=%.17g seed=%llu\n", model.c_str(), gamma,
                  static_cast<unsigned long long>(seed));
    return buf;
}

inline void write_two_column(const std::filesystem::path& path, const std::string& meta,
                             const char* header, const std::vector<double>& a,
                             const std::vector<double>& b) {
    std::string out = meta;
    out += header;
    out += "\n";
    char buf[80];
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", a[i], b[i]);
        out += buf;
    }
    io::atomic_write(path, out);
}

}  // namespace detail

/// Rows are emitted in shift order starting at r = 0 (so the first row is
/// always "0,1"), wrapping through the positive lags before the negative half.
inline void write_corr_csv(const CorrelationCurve& curve, const std::filesystem::path& path,
                           const std::string& model, double gamma, std::uint64_t seed) {
    const std::size_t n = curve.lags.size();
    std::vector<double> lags(n), values(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = (s + n / 2) % n;
        lags[s] = curve.lags[idx];
        values[s] = curve.values[idx];
    }
    detail::write_two_column(path, detail::metadata_line(model, gamma, seed), "r,R", lags, values);
}

inline void write_series_csv(const MetricSeries& series, const std::filesystem::path& path,
                             const char* header, const std::string& model, double gamma,
                             std::uint64_t seed) {
    detail::write_two_column(path, detail::metadata_line(model, gamma, seed), header,
                             series.times, series.values);
}

}  // namespace paraflame::eval
