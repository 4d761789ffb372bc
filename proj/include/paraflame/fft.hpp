#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "paraflame/common.hpp"

// Radix-2 FFT for the power-of-two grids used throughout. Conventions:
//   analysis    X_k = sum_j x_j exp(-2*pi*i*j*k/N)      (unnormalized)
//   synthesis   x_j = (1/N) sum_k X_k exp(+2*pi*i*j*k/N)
// Signed wavenumbers map bins k > N/2 to k - N.

namespace paraflame::fft {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Deliberate-fault hook for the CLI selftest: scales synthesis output so the
// selftest can demonstrate that it detects a broken transform. Always 1.0 in
// normal operation.
inline double& synthesis_scale_hook() {
    static double s = 1.0;
    return s;
}

namespace detail {

struct Twiddles {
    std::vector<double> cos_tab, sin_tab;  // e^{-2*pi*i*k/n} for k < n/2
};

inline const Twiddles& twiddles(std::size_t n) {
    thread_local std::unordered_map<std::size_t, Twiddles> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        Twiddles t;
        t.cos_tab.resize(n / 2);
        t.sin_tab.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            double a = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
            t.cos_tab[k] = std::cos(a);
            t.sin_tab[k] = std::sin(a);
        }
        it = cache.emplace(n, std::move(t)).first;
    }
    return it->second;
}

}  // namespace detail

/// In-place complex FFT over interleaved (re, im) data of n elements.
/// inverse=true conjugates the twiddles and applies the 1/n factor.
inline void transform(double* data, std::size_t n, bool inverse) {
    if (!is_pow2(n)) throw ContractError("fft: length " + std::to_string(n) + " is not a power of two");
    if (n == 1) return;
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(data[2 * i], data[2 * j]);
            std::swap(data[2 * i + 1], data[2 * j + 1]);
        }
    }
    const auto& tw = detail::twiddles(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        const std::size_t half = len / 2;
        for (std::size_t base = 0; base < n; base += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const double wr = tw.cos_tab[k * stride];
                const double wi = inverse ? -tw.sin_tab[k * stride] : tw.sin_tab[k * stride];
                double* a = data + 2 * (base + k);
                double* b = data + 2 * (base + k + half);
                const double tr = b[0] * wr - b[1] * wi;
                const double ti = b[0] * wi + b[1] * wr;
                b[0] = a[0] - tr;
                b[1] = a[1] - ti;
                a[0] += tr;
                a[1] += ti;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < 2 * n; ++i) data[i] *= inv;
    }
}

/// Full complex spectrum of a real field.
inline std::vector<std::complex<double>> analyze(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> buf(2 * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) buf[2 * j] = x[j];
    transform(buf.data(), n, false);
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = {buf[2 * k], buf[2 * k + 1]};
    return out;
}

/// Real part of the inverse transform of a full spectrum.
inline std::vector<double> synthesize(const std::vector<std::complex<double>>& spectrum) {
    const std::size_t n = spectrum.size();
    std::vector<double> buf(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        buf[2 * k] = spectrum[k].real();
        buf[2 * k + 1] = spectrum[k].imag();
    }
    transform(buf.data(), n, true);
    std::vector<double> out(n);
    const double scale = synthesis_scale_hook();
    for (std::size_t j = 0; j < n; ++j) out[j] = buf[2 * j] * scale;
    return out;
}

/// Signed wavenumber of bin k on an N-point grid (the Nyquist bin maps to -N/2).
inline long signed_wavenumber(std::size_t k, std::size_t n) {
    return 2 * k < n ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// d^order/dx^order via the spectral multiplier (i*k)^order on [-pi, pi).
/// Odd orders zero the Nyquist bin (its sign is ambiguous on the grid).
inline std::vector<double> spectral_derivative(const std::vector<double>& x, int order) {
    auto spec = analyze(x);
    const std::size_t n = x.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (order % 2 != 0 && 2 * k == n) {
            spec[k] = 0.0;
            continue;
        }
        double kk = static_cast<double>(signed_wavenumber(k, n));
        spec[k] *= std::pow(std::complex<double>(0.0, kk), order);
    }
    return synthesize(spec);
}

/// Applies a real multiplier m(|k|) to each mode.
template <typename Fn>
inline std::vector<double> apply_abs_multiplier(const std::vector<double>& x, Fn&& m) {
    auto spec = analyze(x);
    const std::size_t n = x.size();
    for (std::size_t k = 0; k < n; ++k) spec[k] *= m(std::labs(signed_wavenumber(k, n)));
    return synthesize(spec);
}

/// Zeroes all modes with |k| > cutoff (in place on a full spectrum).
inline void truncate_above(std::vector<std::complex<double>>& spec, long cutoff) {
    const std::size_t n = spec.size();
    for (std::size_t k = 0; k < n; ++k)
        if (std::labs(signed_wavenumber(k, n)) > cutoff) spec[k] = 0.0;
}

}  // namespace paraflame::fft
