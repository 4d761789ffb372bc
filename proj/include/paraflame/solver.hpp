#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "paraflame/field.hpp"

// Pseudo-spectral reference solver for the two front-evolution equations
//   MS:  phi_t = -1/2 (phi_x)^2 + nu phi_xx + Gamma(phi)
//   KS:  phi_t = -1/(2 b^2) (phi_x)^2 - 1/b^2 phi_xx - 1/b^4 phi_xxxx
// on [-pi, pi) periodic, with Gamma the |k| Fourier multiplier. Quadratic
// terms are dealiased by the 2/3 rule. Time integration is an adaptive
// Dormand-Prince 5(4) embedded pair with PI step-size control, sampling by
// integrating exactly to each multiple of dt (step clipping, no dense output).

namespace paraflame::solver {

enum class Equation { MS, KS };

inline const char* equation_name(Equation e) { return e == Equation::MS ? "ms" : "ks"; }

struct SolverConfig {
    Equation equation = Equation::KS;
    double gamma = 9.0;  // nu for MS, beta for KS
    double dt = 0.015;
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
    bool dealias = true;
    // test hooks: drop individual RHS terms to expose closed-form dynamics
    bool disable_nonlinear = false;
    bool disable_gamma = false;

    void validate() const {
        if (gamma <= 0.0) throw ContractError("SolverConfig: gamma must be > 0");
        if (dt <= 0.0) throw ContractError("SolverConfig: dt must be > 0");
        if (abs_tol <= 0.0 || rel_tol <= 0.0)
            throw ContractError("SolverConfig: tolerances must be > 0");
    }
};

/// Gamma(phi) = F^-1(|k| F(phi)), the linear singular non-local operator.
inline Field gamma_op(const Field& phi) {
    return Field(fft::apply_abs_multiplier(phi.values, [](long k) {
        return static_cast<double>(k);
    }));
}

namespace detail {

// (phi_x)^2 with optional 2/3-rule dealiasing of both the factor and the
// product spectrum. Also returns phi's full spectrum for the linear terms.
inline void quadratic_term(const std::vector<double>& phi, bool dealias,
                           std::vector<std::complex<double>>& phi_spec,
                           std::vector<std::complex<double>>& sq_spec) {
    const std::size_t n = phi.size();
    const long kc = static_cast<long>(n) / 3;
    phi_spec = fft::analyze(phi);
    auto deriv = phi_spec;
    for (std::size_t k = 0; k < n; ++k) {
        if (2 * k == n) {
            deriv[k] = 0.0;  // odd derivative: Nyquist sign is ambiguous
            continue;
        }
        const double kk = static_cast<double>(fft::signed_wavenumber(k, n));
        deriv[k] *= std::complex<double>(0.0, kk);
    }
    if (dealias) fft::truncate_above(deriv, kc);
    auto u = fft::synthesize(deriv);
    for (auto& v : u) v *= v;
    sq_spec = fft::analyze(u);
    if (dealias) fft::truncate_above(sq_spec, kc);
}

}  // namespace detail

/// MS right-hand side: -1/2 (phi_x)^2 + nu phi_xx + Gamma(phi).
inline Field ms_rhs(const Field& phi, double nu, bool dealias = true,
                    bool disable_nonlinear = false, bool disable_gamma = false) {
    if (nu <= 0.0) throw ContractError("ms_rhs: nu must be > 0");
    const std::size_t n = phi.size();
    std::vector<std::complex<double>> spec, sq;
    detail::quadratic_term(phi.values, dealias, spec, sq);
    std::vector<std::complex<double>> rhs(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = std::abs(static_cast<double>(fft::signed_wavenumber(k, n)));
        std::complex<double> lin = -nu * kk * kk * spec[k];
        if (!disable_gamma) lin += kk * spec[k];
        rhs[k] = lin - (disable_nonlinear ? 0.0 : 0.5) * sq[k];
    }
    return Field(fft::synthesize(rhs));
}

/// KS right-hand side: -1/(2 b^2) (phi_x)^2 - 1/b^2 phi_xx - 1/b^4 phi_xxxx.
inline Field ks_rhs(const Field& phi, double beta, bool dealias = true,
                    bool disable_nonlinear = false) {
    if (beta <= 0.0) throw ContractError("ks_rhs: beta must be > 0");
    const std::size_t n = phi.size();
    const double b2 = beta * beta, b4 = b2 * b2;
    std::vector<std::complex<double>> spec, sq;
    detail::quadratic_term(phi.values, dealias, spec, sq);
    std::vector<std::complex<double>> rhs(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = std::abs(static_cast<double>(fft::signed_wavenumber(k, n)));
        const double k2 = kk * kk;
        rhs[k] = (k2 / b2 - k2 * k2 / b4) * spec[k] -
                 (disable_nonlinear ? 0.0 : 0.5 / b2) * sq[k];
    }
    return Field(fft::synthesize(rhs));
}

inline Field pde_rhs(const Field& phi, const SolverConfig& cfg) {
    if (cfg.equation == Equation::MS)
        return ms_rhs(phi, cfg.gamma, cfg.dealias, cfg.disable_nonlinear, cfg.disable_gamma);
    return ks_rhs(phi, cfg.gamma, cfg.dealias, cfg.disable_nonlinear);
}

namespace detail {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
// 5th-minus-4th order error weights
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

}  // namespace detail

/// Advances phi0 and returns samples at t = dt, 2 dt, ..., steps * dt.
/// Deterministic for a given (phi0, config); throws IntegrationError on
/// step-size underflow or a non-finite state.
inline std::vector<Field> integrate(const Field& phi0, const SolverConfig& cfg, int steps) {
    cfg.validate();
    if (steps < 1) throw ContractError("integrate: steps must be >= 1");
    if (!phi0.all_finite()) throw ContractError("integrate: initial condition is not finite");

    const std::size_t n = phi0.size();
    using Vec = std::vector<double>;
    const auto rhs = [&](const Vec& y, Vec& dy) {
        Field f(y);
        dy = pde_rhs(f, cfg).values;
    };
    const auto err_norm = [&](const Vec& e, const Vec& y0, const Vec& y1) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
            const double q = e[i] / sc;
            s += q * q;
        }
        return std::sqrt(s / static_cast<double>(n));
    };

    Vec y = phi0.values;
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), errv(n);
    rhs(y, k1);

    // Hairer-style initial step guess from the first two derivative scales.
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / n);
        d1 = std::sqrt(d1 / n);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, cfg.dt);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h0 * k1[i];
        rhs(ytmp, k2);
        double d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
            const double q = (k2[i] - k1[i]) / sc;
            d2 += q * q;
        }
        d2 = std::sqrt(d2 / n) / h0;
        const double dmax = std::max(d1, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                        : std::pow(0.01 / dmax, 0.2);
        h = std::min({100.0 * h0, h1, cfg.dt});
    }

    constexpr double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
    constexpr double facc1 = 5.0, facc2 = 0.1;  // growth/shrink clamps (1/fac1, 1/fac2)
    double facold = 1e-4;
    bool rejected = false;
    double t = 0.0;

    std::vector<Field> out;
    out.reserve(static_cast<std::size_t>(steps));

    for (int s = 1; s <= steps; ++s) {
        const double t_target = static_cast<double>(s) * cfg.dt;
        while (t < t_target) {
            const double h_used = std::min(h, t_target - t);
            if (h_used < 1e-14 * std::max(1.0, std::abs(t)))
                throw IntegrationError("integrate: step size underflow", t);

            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h_used * detail::A21 * k1[i];
            rhs(ytmp, k2);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h_used * (detail::A31 * k1[i] + detail::A32 * k2[i]);
            rhs(ytmp, k3);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h_used * (detail::A41 * k1[i] + detail::A42 * k2[i] +
                                           detail::A43 * k3[i]);
            rhs(ytmp, k4);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h_used * (detail::A51 * k1[i] + detail::A52 * k2[i] +
                                           detail::A53 * k3[i] + detail::A54 * k4[i]);
            rhs(ytmp, k5);
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h_used * (detail::A61 * k1[i] + detail::A62 * k2[i] +
                                           detail::A63 * k3[i] + detail::A64 * k4[i] +
                                           detail::A65 * k5[i]);
            rhs(ytmp, k6);
            for (std::size_t i = 0; i < n; ++i)
                ynew[i] = y[i] + h_used * (detail::B1 * k1[i] + detail::B3 * k3[i] +
                                           detail::B4 * k4[i] + detail::B5 * k5[i] +
                                           detail::B6 * k6[i]);
            rhs(ynew, k7);
            for (std::size_t i = 0; i < n; ++i)
                errv[i] = h_used * (detail::E1 * k1[i] + detail::E3 * k3[i] +
                                    detail::E4 * k4[i] + detail::E5 * k5[i] +
                                    detail::E6 * k6[i] + detail::E7 * k7[i]);

            double err = err_norm(errv, y, ynew);
            if (!std::isfinite(err)) err = 1e10;

            if (err <= 1.0) {
                t += h_used;
                std::swap(y, ynew);
                std::swap(k1, k7);  // FSAL
                const double fac11 = std::pow(std::max(err, 1e-16), expo1);
                double fac = fac11 / std::pow(facold, beta);
                fac = std::max(facc2, std::min(facc1, fac / safe));
                double hnew = h_used / fac;
                if (rejected) hnew = std::min(hnew, h_used);
                facold = std::max(err, 1e-4);
                rejected = false;
                h = hnew;
            } else {
                const double fac11 = std::pow(err, expo1);
                h = h_used / std::min(facc1, fac11 / safe);
                rejected = true;
            }
        }
        Field sample(y);
        if (!sample.all_finite())
            throw IntegrationError("integrate: non-finite state", t);
        out.push_back(std::move(sample));
    }
    return out;
}

}  // namespace paraflame::solver
