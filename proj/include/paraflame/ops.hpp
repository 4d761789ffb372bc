#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "paraflame/fft.hpp"
#include "paraflame/graph.hpp"

// Differentiable primitives. Fields are [channels x N] row-major; spectral
// tensors are mode-major [kmax x channels] complex, matching the index
// convention out[k,i] = sum_j W[k,i,j] * modes[k,j] of the mode mix.
// Every backward is the exact adjoint of its forward (pair-of-reals
// convention for complex data).

namespace paraflame::ad {

namespace detail {
inline std::int64_t wrap(std::int64_t j, std::int64_t n) { return ((j % n) + n) % n; }
}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise / structural

inline NodeRef add(const NodeRef& a, const NodeRef& b) {
    if (!a->value.same_shape(b->value))
        throw ContractError("add: shape " + a->value.shape_string() + " vs " +
                            b->value.shape_string());
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    return make_node("add", std::move(out), {a, b}, [](Node& self) {
        for (int p = 0; p < 2; ++p) {
            auto& g = self.parents[p]->grad.data;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
        }
    });
}

inline NodeRef sub(const NodeRef& a, const NodeRef& b) {
    if (!a->value.same_shape(b->value))
        throw ContractError("sub: shape " + a->value.shape_string() + " vs " +
                            b->value.shape_string());
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
    return make_node("sub", std::move(out), {a, b}, [](Node& self) {
        auto& ga = self.parents[0]->grad.data;
        auto& gb = self.parents[1]->grad.data;
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += self.grad.data[i];
            gb[i] -= self.grad.data[i];
        }
    });
}

inline NodeRef scale(const NodeRef& a, double c) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= c;
    return make_node("scale", std::move(out), {a}, [c](Node& self) {
        auto& g = self.parents[0]->grad.data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad.data[i];
    });
}

/// out = a + b * s with s a scalar node (the pCNN encoder combination).
inline NodeRef axpy_scalar(const NodeRef& a, const NodeRef& b, const NodeRef& s) {
    if (!a->value.same_shape(b->value))
        throw ContractError("axpy_scalar: shape " + a->value.shape_string() + " vs " +
                            b->value.shape_string());
    if (s->value.numel() != 1 || s->value.dtype != Dtype::Real)
        throw ContractError("axpy_scalar: scale must be a real scalar");
    const double sv = s->value.data[0];
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += sv * b->value.data[i];
    return make_node("axpy_scalar", std::move(out), {a, b, s}, [sv](Node& self) {
        auto& ga = self.parents[0]->grad.data;
        auto& gb = self.parents[1]->grad.data;
        const auto& bv = self.parents[1]->value.data;
        double gs = 0.0;
        for (std::size_t i = 0; i < ga.size(); ++i) {
            const double g = self.grad.data[i];
            ga[i] += g;
            gb[i] += sv * g;
            gs += g * bv[i];
        }
        self.parents[2]->grad.data[0] += gs;
    });
}

/// Elementwise max(0, x); the subgradient at exactly 0 is 0.
inline NodeRef relu(const NodeRef& x) {
    require_dtype(x->value, Dtype::Real, "relu", "input");
    Tensor out = x->value;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return make_node("relu", std::move(out), {x}, [](Node& self) {
        const auto& xv = self.parents[0]->value.data;
        auto& gx = self.parents[0]->grad.data;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (xv[i] > 0.0) gx[i] += self.grad.data[i];
    });
}

/// Elementwise ln(1 + e^x), numerically stable for large |x|.
inline NodeRef softplus(const NodeRef& x) {
    require_dtype(x->value, Dtype::Real, "softplus", "input");
    Tensor out = x->value;
    for (auto& v : out.data) v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    return make_node("softplus", std::move(out), {x}, [](Node& self) {
        const auto& xv = self.parents[0]->value.data;
        auto& gx = self.parents[0]->grad.data;
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += self.grad.data[i] / (1.0 + std::exp(-xv[i]));
    });
}

inline NodeRef concat_channels(const NodeRef& a, const NodeRef& b) {
    require_rank(a->value, 2, "concat_channels", "a");
    require_rank(b->value, 2, "concat_channels", "b");
    if (a->value.shape[1] != b->value.shape[1])
        throw ContractError("concat_channels: spatial extent " +
                            std::to_string(a->value.shape[1]) + " vs " +
                            std::to_string(b->value.shape[1]));
    const auto c1 = a->value.shape[0], c2 = b->value.shape[0], n = a->value.shape[1];
    Tensor out = Tensor::zeros({c1 + c2, n}, a->value.dtype);
    std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
    std::copy(b->value.data.begin(), b->value.data.end(), out.data.begin() + a->value.data.size());
    return make_node("concat_channels", std::move(out), {a, b}, [](Node& self) {
        auto& ga = self.parents[0]->grad.data;
        auto& gb = self.parents[1]->grad.data;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad.data[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad.data[ga.size() + i];
    });
}

inline NodeRef slice_channels(const NodeRef& x, std::int64_t from, std::int64_t count) {
    require_rank(x->value, 2, "slice_channels", "input");
    const auto c = x->value.shape[0], n = x->value.shape[1];
    if (from < 0 || count < 0 || from + count > c)
        throw ContractError("slice_channels: range [" + std::to_string(from) + ", " +
                            std::to_string(from + count) + ") outside " + std::to_string(c) +
                            " channels");
    const std::size_t w = x->value.reals_per_elem() * static_cast<std::size_t>(n);
    Tensor out = Tensor::zeros({count, n}, x->value.dtype);
    std::copy_n(x->value.data.begin() + static_cast<std::size_t>(from) * w,
                static_cast<std::size_t>(count) * w, out.data.begin());
    return make_node("slice_channels", std::move(out), {x}, [from, w](Node& self) {
        auto& gx = self.parents[0]->grad.data;
        const std::size_t off = static_cast<std::size_t>(from) * w;
        for (std::size_t i = 0; i < self.grad.data.size(); ++i) gx[off + i] += self.grad.data[i];
    });
}

// ---------------------------------------------------------------------------
// spatial ops

/// Periodic convolution, kernel size 3, stride 1.
/// out[o,j] = bias[o] + sum_{i,k in {-1,0,1}} kernel[o,i,k+1] * input[i,(j+k) mod N]
inline NodeRef conv1d_periodic(const NodeRef& input, const NodeRef& kernel, const NodeRef& bias) {
    const Tensor& x = input->value;
    const Tensor& w = kernel->value;
    const Tensor& b = bias->value;
    require_rank(x, 2, "conv1d_periodic", "input");
    require_rank(w, 3, "conv1d_periodic", "kernel");
    require_rank(b, 1, "conv1d_periodic", "bias");
    require_dtype(x, Dtype::Real, "conv1d_periodic", "input");
    const auto c_in = x.shape[0], n = x.shape[1];
    const auto c_out = w.shape[0];
    if (n < 3) throw ContractError("conv1d_periodic: spatial extent must be >= 3, got " + std::to_string(n));
    if (w.shape[1] != c_in)
        throw ContractError("conv1d_periodic: kernel c_in = " + std::to_string(w.shape[1]) +
                            " but input has " + std::to_string(c_in) + " channels");
    if (w.shape[2] != 3)
        throw ContractError("conv1d_periodic: kernel taps = " + std::to_string(w.shape[2]) +
                            ", expected 3");
    if (b.shape[0] != c_out)
        throw ContractError("conv1d_periodic: bias extent = " + std::to_string(b.shape[0]) +
                            " but kernel has c_out = " + std::to_string(c_out));
    Tensor out = Tensor::zeros({c_out, n});
    for (std::int64_t o = 0; o < c_out; ++o) {
        double* yo = out.data.data() + o * n;
        for (std::int64_t j = 0; j < n; ++j) yo[j] = b.data[o];
        for (std::int64_t i = 0; i < c_in; ++i) {
            const double* xi = x.data.data() + i * n;
            const double k0 = w.data[(o * c_in + i) * 3 + 0];
            const double k1 = w.data[(o * c_in + i) * 3 + 1];
            const double k2 = w.data[(o * c_in + i) * 3 + 2];
            yo[0] += k0 * xi[n - 1] + k1 * xi[0] + k2 * xi[1];
            for (std::int64_t j = 1; j < n - 1; ++j)
                yo[j] += k0 * xi[j - 1] + k1 * xi[j] + k2 * xi[j + 1];
            yo[n - 1] += k0 * xi[n - 2] + k1 * xi[n - 1] + k2 * xi[0];
        }
    }
    return make_node("conv1d_periodic", std::move(out), {input, kernel, bias},
                     [c_in, c_out, n](Node& self) {
                         const auto& xv = self.parents[0]->value.data;
                         const auto& wv = self.parents[1]->value.data;
                         auto& gx = self.parents[0]->grad.data;
                         auto& gw = self.parents[1]->grad.data;
                         auto& gb = self.parents[2]->grad.data;
                         for (std::int64_t o = 0; o < c_out; ++o) {
                             const double* go = self.grad.data.data() + o * n;
                             for (std::int64_t j = 0; j < n; ++j) gb[o] += go[j];
                             for (std::int64_t i = 0; i < c_in; ++i) {
                                 const double* xi = xv.data() + i * n;
                                 double* gxi = gx.data() + i * n;
                                 const std::size_t wo = (o * c_in + i) * 3;
                                 double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
                                 for (std::int64_t j = 0; j < n; ++j) {
                                     const std::int64_t jm = j == 0 ? n - 1 : j - 1;
                                     const std::int64_t jp = j == n - 1 ? 0 : j + 1;
                                     const double g = go[j];
                                     acc0 += g * xi[jm];
                                     acc1 += g * xi[j];
                                     acc2 += g * xi[jp];
                                     gxi[jm] += g * wv[wo + 0];
                                     gxi[j] += g * wv[wo + 1];
                                     gxi[jp] += g * wv[wo + 2];
                                 }
                                 gw[wo + 0] += acc0;
                                 gw[wo + 1] += acc1;
                                 gw[wo + 2] += acc2;
                             }
                         }
                     });
}

/// Pointwise-in-x affine map over channels (kernel-size-1 convolution).
inline NodeRef channel_linear(const NodeRef& input, const NodeRef& weight, const NodeRef& bias) {
    const Tensor& x = input->value;
    const Tensor& w = weight->value;
    const Tensor& b = bias->value;
    require_rank(x, 2, "channel_linear", "input");
    require_rank(w, 2, "channel_linear", "weight");
    require_rank(b, 1, "channel_linear", "bias");
    require_dtype(x, Dtype::Real, "channel_linear", "input");
    const auto c_in = x.shape[0], n = x.shape[1];
    const auto c_out = w.shape[0];
    if (w.shape[1] != c_in)
        throw ContractError("channel_linear: weight c_in = " + std::to_string(w.shape[1]) +
                            " but input has " + std::to_string(c_in) + " channels");
    if (b.shape[0] != c_out)
        throw ContractError("channel_linear: bias extent = " + std::to_string(b.shape[0]) +
                            " but weight has c_out = " + std::to_string(c_out));
    Tensor out = Tensor::zeros({c_out, n});
    for (std::int64_t o = 0; o < c_out; ++o) {
        double* yo = out.data.data() + o * n;
        for (std::int64_t j = 0; j < n; ++j) yo[j] = b.data[o];
        for (std::int64_t i = 0; i < c_in; ++i) {
            const double wv = w.data[o * c_in + i];
            const double* xi = x.data.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) yo[j] += wv * xi[j];
        }
    }
    return make_node("channel_linear", std::move(out), {input, weight, bias},
                     [c_in, c_out, n](Node& self) {
                         const auto& xv = self.parents[0]->value.data;
                         const auto& wv = self.parents[1]->value.data;
                         auto& gx = self.parents[0]->grad.data;
                         auto& gw = self.parents[1]->grad.data;
                         auto& gb = self.parents[2]->grad.data;
                         for (std::int64_t o = 0; o < c_out; ++o) {
                             const double* go = self.grad.data.data() + o * n;
                             for (std::int64_t j = 0; j < n; ++j) gb[o] += go[j];
                             for (std::int64_t i = 0; i < c_in; ++i) {
                                 const double* xi = xv.data() + i * n;
                                 double* gxi = gx.data() + i * n;
                                 const double wval = wv[o * c_in + i];
                                 double acc = 0.0;
                                 for (std::int64_t j = 0; j < n; ++j) {
                                     acc += go[j] * xi[j];
                                     gxi[j] += go[j] * wval;
                                 }
                                 gw[o * c_in + i] += acc;
                             }
                         }
                     });
}

/// Size-2 max pooling. Gradient routes to the argmax; ties go to the lower index.
inline NodeRef maxpool1d(const NodeRef& input) {
    const Tensor& x = input->value;
    require_rank(x, 2, "maxpool1d", "input");
    require_dtype(x, Dtype::Real, "maxpool1d", "input");
    const auto c = x.shape[0], n = x.shape[1];
    if (n % 2 != 0)
        throw ContractError("maxpool1d: spatial extent " + std::to_string(n) + " is odd");
    Tensor out = Tensor::zeros({c, n / 2});
    for (std::int64_t i = 0; i < c; ++i)
        for (std::int64_t j = 0; j < n / 2; ++j) {
            const double a = x.data[i * n + 2 * j], b = x.data[i * n + 2 * j + 1];
            out.data[i * (n / 2) + j] = a >= b ? a : b;
        }
    return make_node("maxpool1d", std::move(out), {input}, [c, n](Node& self) {
        const auto& xv = self.parents[0]->value.data;
        auto& gx = self.parents[0]->grad.data;
        for (std::int64_t i = 0; i < c; ++i)
            for (std::int64_t j = 0; j < n / 2; ++j) {
                const std::int64_t lo = i * n + 2 * j;
                const std::int64_t pick = xv[lo] >= xv[lo + 1] ? lo : lo + 1;
                gx[pick] += self.grad.data[i * (n / 2) + j];
            }
    });
}

/// Nearest-neighbor doubling; backward sums the paired gradients.
inline NodeRef upsample1d(const NodeRef& input) {
    const Tensor& x = input->value;
    require_rank(x, 2, "upsample1d", "input");
    const auto c = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros({c, 2 * n});
    for (std::int64_t i = 0; i < c; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            out.data[i * 2 * n + 2 * j] = x.data[i * n + j];
            out.data[i * 2 * n + 2 * j + 1] = x.data[i * n + j];
        }
    return make_node("upsample1d", std::move(out), {input}, [c, n](Node& self) {
        auto& gx = self.parents[0]->grad.data;
        for (std::int64_t i = 0; i < c; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                gx[i * n + j] += self.grad.data[i * 2 * n + 2 * j] +
                                 self.grad.data[i * 2 * n + 2 * j + 1];
    });
}

// ---------------------------------------------------------------------------
// spectral ops

/// Per-channel spatial mean (the DC content of each channel).
inline NodeRef spatial_mean(const NodeRef& input) {
    const Tensor& x = input->value;
    require_rank(x, 2, "spatial_mean", "input");
    require_dtype(x, Dtype::Real, "spatial_mean", "input");
    const auto c = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros({c});
    for (std::int64_t i = 0; i < c; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < n; ++j) s += x.data[i * n + j];
        out.data[i] = s / static_cast<double>(n);
    }
    return make_node("spatial_mean", std::move(out), {input}, [c, n](Node& self) {
        auto& gx = self.parents[0]->grad.data;
        const double inv = 1.0 / static_cast<double>(n);
        for (std::int64_t i = 0; i < c; ++i)
            for (std::int64_t j = 0; j < n; ++j) gx[i * n + j] += self.grad.data[i] * inv;
    });
}

/// Unnormalized DFT bins k = 1..kmax of each channel, mode-major [kmax x c].
/// The DC bin is not part of the output; it travels separately (spatial_sum).
inline NodeRef rfft_truncate(const NodeRef& input, std::int64_t kmax) {
    const Tensor& x = input->value;
    require_rank(x, 2, "rfft_truncate", "input");
    require_dtype(x, Dtype::Real, "rfft_truncate", "input");
    const auto c = x.shape[0], n = x.shape[1];
    if (n % 2 != 0) throw ContractError("rfft_truncate: N = " + std::to_string(n) + " must be even");
    if (kmax < 1 || kmax > n / 2)
        throw ContractError("rfft_truncate: kmax = " + std::to_string(kmax) +
                            " outside [1, N/2] with N = " + std::to_string(n));
    Tensor out = Tensor::zeros({kmax, c}, Dtype::Complex);
    std::vector<double> buf(2 * static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < c; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            buf[2 * j] = x.data[i * n + j];
            buf[2 * j + 1] = 0.0;
        }
        fft::transform(buf.data(), static_cast<std::size_t>(n), false);
        for (std::int64_t k = 1; k <= kmax; ++k) {
            out.re((k - 1) * c + i) = buf[2 * k];
            out.im((k - 1) * c + i) = buf[2 * k + 1];
        }
    }
    return make_node("rfft_truncate", std::move(out), {input}, [c, n, kmax](Node& self) {
        // adjoint: gx_j = Re( sum_{k=1..kmax} G_k e^{+2*pi*i*j*k/N} )
        auto& gx = self.parents[0]->grad.data;
        std::vector<double> buf(2 * static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < c; ++i) {
            std::fill(buf.begin(), buf.end(), 0.0);
            for (std::int64_t k = 1; k <= kmax; ++k) {
                buf[2 * k] = self.grad.re((k - 1) * c + i);
                buf[2 * k + 1] = self.grad.im((k - 1) * c + i);
            }
            fft::transform(buf.data(), static_cast<std::size_t>(n), true);
            for (std::int64_t j = 0; j < n; ++j)
                gx[i * n + j] += buf[2 * j] * static_cast<double>(n);
        }
    });
}

/// Inverse of rfft_truncate: zero-pads modes above kmax, inserts the DC
/// channel (given as the spatial mean), and synthesizes a real field. The
/// Nyquist bin (k = N/2, reached when kmax = N/2) enters at half weight so
/// the kmax = N/2 round trip is exact.
inline NodeRef irfft_pad(const NodeRef& modes, std::int64_t n, const NodeRef& dc) {
    const Tensor& m = modes->value;
    require_rank(m, 2, "irfft_pad", "modes");
    require_dtype(m, Dtype::Complex, "irfft_pad", "modes");
    const auto kmax = m.shape[0], c = m.shape[1];
    if (n % 2 != 0 || kmax > n / 2)
        throw ContractError("irfft_pad: kmax = " + std::to_string(kmax) +
                            " incompatible with N = " + std::to_string(n));
    require_shape(dc->value, {c}, "irfft_pad", "dc");
    Tensor out = Tensor::zeros({c, n});
    std::vector<double> buf(2 * static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < c; ++i) {
        std::fill(buf.begin(), buf.end(), 0.0);
        buf[0] = dc->value.data[i] * static_cast<double>(n);
        for (std::int64_t k = 1; k <= kmax; ++k) {
            const double re = m.re((k - 1) * c + i), im = m.im((k - 1) * c + i);
            if (2 * k == n) {
                buf[2 * k] = re;  // self-conjugate bin keeps its real part only
            } else {
                buf[2 * k] = re;
                buf[2 * k + 1] = im;
                buf[2 * (n - k)] = re;
                buf[2 * (n - k) + 1] = -im;
            }
        }
        fft::transform(buf.data(), static_cast<std::size_t>(n), true);
        for (std::int64_t j = 0; j < n; ++j) out.data[i * n + j] = buf[2 * j];
    }
    return make_node("irfft_pad", std::move(out), {modes, dc}, [kmax, c, n](Node& self) {
        auto& gm = self.parents[0]->grad;
        auto& gdc = self.parents[1]->grad.data;
        std::vector<double> buf(2 * static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < c; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                buf[2 * j] = self.grad.data[i * n + j];
                buf[2 * j + 1] = 0.0;
            }
            fft::transform(buf.data(), static_cast<std::size_t>(n), false);
            gdc[i] += buf[0];
            for (std::int64_t k = 1; k <= kmax; ++k) {
                const double s = (2 * k == n) ? 1.0 : 2.0;
                gm.re((k - 1) * c + i) += s * buf[2 * k] / static_cast<double>(n);
                if (2 * k != n) gm.im((k - 1) * c + i) += s * buf[2 * k + 1] / static_cast<double>(n);
            }
        }
    });
}

/// Per-mode channel mixing: out[k,i] = sum_j weights[k,i,j] * modes[k,j].
inline NodeRef complex_mode_mix(const NodeRef& modes, const NodeRef& weights) {
    const Tensor& m = modes->value;
    const Tensor& w = weights->value;
    require_rank(m, 2, "complex_mode_mix", "modes");
    require_rank(w, 3, "complex_mode_mix", "weights");
    require_dtype(m, Dtype::Complex, "complex_mode_mix", "modes");
    require_dtype(w, Dtype::Complex, "complex_mode_mix", "weights");
    const auto kmax = m.shape[0], c = m.shape[1];
    if (w.shape[0] != kmax || w.shape[1] != c || w.shape[2] != c)
        throw ContractError("complex_mode_mix: weights " + w.shape_string() +
                            " do not match modes " + m.shape_string());
    Tensor out = Tensor::zeros({kmax, c}, Dtype::Complex);
    for (std::int64_t k = 0; k < kmax; ++k) {
        const double* mk = m.data.data() + 2 * k * c;
        double* ok = out.data.data() + 2 * k * c;
        for (std::int64_t i = 0; i < c; ++i) {
            const double* wk = w.data.data() + 2 * ((k * c + i) * c);
            double sr = 0.0, si = 0.0;
            for (std::int64_t j = 0; j < c; ++j) {
                const double wr = wk[2 * j], wi = wk[2 * j + 1];
                const double mr = mk[2 * j], mi = mk[2 * j + 1];
                sr += wr * mr - wi * mi;
                si += wr * mi + wi * mr;
            }
            ok[2 * i] = sr;
            ok[2 * i + 1] = si;
        }
    }
    return make_node("complex_mode_mix", std::move(out), {modes, weights},
                     [kmax, c](Node& self) {
                         const auto& mv = self.parents[0]->value.data;
                         const auto& wv = self.parents[1]->value.data;
                         auto& gm = self.parents[0]->grad.data;
                         auto& gw = self.parents[1]->grad.data;
                         for (std::int64_t k = 0; k < kmax; ++k) {
                             const double* mk = mv.data() + 2 * k * c;
                             double* gmk = gm.data() + 2 * k * c;
                             const double* gk = self.grad.data.data() + 2 * k * c;
                             for (std::int64_t i = 0; i < c; ++i) {
                                 const double gr = gk[2 * i], gi = gk[2 * i + 1];
                                 const std::size_t wo = 2 * ((k * c + i) * c);
                                 for (std::int64_t j = 0; j < c; ++j) {
                                     const double wr = wv[wo + 2 * j], wi = wv[wo + 2 * j + 1];
                                     const double mr = mk[2 * j], mi = mk[2 * j + 1];
                                     // g_modes += conj(W)^T g ; g_W += g * conj(modes)
                                     gmk[2 * j] += wr * gr + wi * gi;
                                     gmk[2 * j + 1] += wr * gi - wi * gr;
                                     gw[wo + 2 * j] += gr * mr + gi * mi;
                                     gw[wo + 2 * j + 1] += gi * mr - gr * mi;
                                 }
                             }
                         }
                     });
}

/// Scales every channel of mode k by the real factor scale[k].
inline NodeRef mode_scale(const NodeRef& modes, const NodeRef& scale_vec) {
    const Tensor& m = modes->value;
    const Tensor& s = scale_vec->value;
    require_rank(m, 2, "mode_scale", "modes");
    require_dtype(m, Dtype::Complex, "mode_scale", "modes");
    require_dtype(s, Dtype::Real, "mode_scale", "scale");
    const auto kmax = m.shape[0], c = m.shape[1];
    require_shape(s, {kmax}, "mode_scale", "scale");
    Tensor out = m;
    for (std::int64_t k = 0; k < kmax; ++k)
        for (std::int64_t i = 0; i < 2 * c; ++i) out.data[2 * k * c + i] *= s.data[k];
    return make_node("mode_scale", std::move(out), {modes, scale_vec}, [kmax, c](Node& self) {
        const auto& mv = self.parents[0]->value.data;
        const auto& sv = self.parents[1]->value.data;
        auto& gm = self.parents[0]->grad.data;
        auto& gs = self.parents[1]->grad.data;
        for (std::int64_t k = 0; k < kmax; ++k) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < 2 * c; ++i) {
                const std::size_t idx = 2 * k * c + i;
                gm[idx] += sv[k] * self.grad.data[idx];
                acc += self.grad.data[idx] * mv[idx];
            }
            gs[k] += acc;
        }
    });
}

// ---------------------------------------------------------------------------
// wavenumber-band scatter

/// Band index of wavenumber k under the hierarchical partition:
/// band i covers (kmax/2^{i+1}, kmax/2^i] for i < n_gamma, and the final band
/// n_gamma covers (0, kmax/2^{n_gamma}]. Exact integer arithmetic.
inline int band_of(std::int64_t k, std::int64_t kmax, int n_gamma) {
    for (int i = 0; i < n_gamma; ++i) {
        // k > kmax/2^{i+1}  <=>  k * 2^{i+1} > kmax
        if (k * (std::int64_t(1) << (i + 1)) > kmax) return i;
    }
    return n_gamma;
}

inline void validate_band_partition(std::int64_t kmax, int n_gamma) {
    if (n_gamma < 0) throw ContractError("band_map: n_gamma must be >= 0");
    if (n_gamma >= 63 || kmax < (std::int64_t(1) << n_gamma))
        throw ContractError("band_map: kmax = " + std::to_string(kmax) +
                            " leaves band " + std::to_string(n_gamma) +
                            " empty (kmax < 2^n_gamma)");
}

/// Expands N_D = n_gamma + 1 band values into a per-wavenumber vector of
/// length kmax; entry k-1 belongs to wavenumber k.
inline NodeRef band_map(const NodeRef& d, std::int64_t kmax, int n_gamma) {
    validate_band_partition(kmax, n_gamma);
    const Tensor& dv = d->value;
    require_rank(dv, 1, "band_map", "d");
    if (dv.shape[0] != n_gamma + 1)
        throw ContractError("band_map: expected N_D = " + std::to_string(n_gamma + 1) +
                            " values, got " + std::to_string(dv.shape[0]));
    Tensor out = Tensor::zeros({kmax});
    for (std::int64_t k = 1; k <= kmax; ++k)
        out.data[k - 1] = dv.data[band_of(k, kmax, n_gamma)];
    return make_node("band_map", std::move(out), {d}, [kmax, n_gamma](Node& self) {
        auto& gd = self.parents[0]->grad.data;
        for (std::int64_t k = 1; k <= kmax; ++k)
            gd[band_of(k, kmax, n_gamma)] += self.grad.data[k - 1];
    });
}

// ---------------------------------------------------------------------------
// reductions and MLP

inline NodeRef sum(const NodeRef& x) {
    require_dtype(x->value, Dtype::Real, "sum", "input");
    double s = 0.0;
    for (double v : x->value.data) s += v;
    return make_node("sum", Tensor::scalar(s), {x}, [](Node& self) {
        auto& gx = self.parents[0]->grad.data;
        for (auto& g : gx) g += self.grad.data[0];
    });
}

/// Euclidean norm as a scalar node. Gradient at the origin is defined as 0.
inline NodeRef l2_norm(const NodeRef& x) {
    require_dtype(x->value, Dtype::Real, "l2_norm", "input");
    double s = 0.0;
    for (double v : x->value.data) s += v * v;
    const double nrm = std::sqrt(s);
    return make_node("l2_norm", Tensor::scalar(nrm), {x}, [nrm](Node& self) {
        if (nrm == 0.0) return;
        const auto& xv = self.parents[0]->value.data;
        auto& gx = self.parents[0]->grad.data;
        const double g = self.grad.data[0] / nrm;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * xv[i];
    });
}

enum class Activation { Identity, Relu, Softplus };

inline NodeRef apply_activation(const NodeRef& x, Activation a) {
    switch (a) {
        case Activation::Relu: return relu(x);
        case Activation::Softplus: return softplus(x);
        default: return x;
    }
}

struct MlpLayer {
    Parameter weight;  // [c_out x c_in]
    Parameter bias;    // [c_out]
    Activation act = Activation::Identity;
};

/// Affine + activation chain. Rank-2 inputs [c x N] are transformed pointwise
/// in x; rank-1 inputs are treated as a single column.
inline NodeRef mlp(const NodeRef& input, const std::vector<MlpLayer>& layers) {
    NodeRef h = input;
    const bool vector_in = input->value.shape.size() == 1;
    if (vector_in) {
        Tensor lifted = Tensor::from({input->value.shape[0], 1}, input->value.data);
        h = make_node("lift_column", std::move(lifted), {input}, [](Node& self) {
            auto& g = self.parents[0]->grad.data;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
        });
    }
    for (const auto& layer : layers)
        h = apply_activation(channel_linear(h, layer.weight.node, layer.bias.node), layer.act);
    if (vector_in) {
        Tensor squeezed = Tensor::from({h->value.shape[0]}, h->value.data);
        h = make_node("squeeze_column", std::move(squeezed), {h}, [](Node& self) {
            auto& g = self.parents[0]->grad.data;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
        });
    }
    return h;
}

}  // namespace paraflame::ad
