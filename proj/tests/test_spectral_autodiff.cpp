#include <catch2/catch_amalgamated.hpp>

#include "paraflame/gradcheck.hpp"
#include "paraflame/ops.hpp"
#include "paraflame/rng.hpp"

#include "oracles.hpp"

using namespace paraflame;
using namespace paraflame::ad;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed,
                     Dtype dtype = Dtype::Real, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), dtype);
    StreamRng rng(seed);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double pair_dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace

TEST_CASE("rfft_truncate: constant field has no retained modes") {
    auto x = constant(Tensor::from({1, 16}, std::vector<double>(16, 3.7)));
    auto m = rfft_truncate(x, 8);
    for (double v : m->value.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("rfft_truncate: cos(2x) on N=16 puts magnitude N/2 in mode 2") {
    const std::size_t n = 16;
    Tensor x = Tensor::zeros({1, (std::int64_t)n});
    for (std::size_t j = 0; j < n; ++j)
        x.data[j] = std::cos(2.0 * (-M_PI + 2.0 * M_PI * j / n));
    auto m = rfft_truncate(constant(x), 8);
    for (std::int64_t k = 1; k <= 8; ++k) {
        const double mag = std::hypot(m->value.re(k - 1), m->value.im(k - 1));
        if (k == 2)
            CHECK(mag == Catch::Approx(8.0).margin(1e-12));
        else
            CHECK(mag < 1e-12);
    }
}

TEST_CASE("rfft_truncate: Parseval over the full untruncated spectrum") {
    const std::int64_t n = 32;
    Tensor x = random_tensor({1, n}, 201);
    auto m = rfft_truncate(constant(x), n / 2);
    auto mean = spatial_mean(constant(x));
    // reconstruct sum over all bins from modes 1..N/2 plus DC
    double modal = mean->value.data[0] * n * mean->value.data[0] * n;
    for (std::int64_t k = 1; k <= n / 2; ++k) {
        const double p = m->value.re(k - 1) * m->value.re(k - 1) +
                         m->value.im(k - 1) * m->value.im(k - 1);
        modal += (2 * k == n) ? p : 2.0 * p;  // conjugate bins mirror k < N/2
    }
    double phys = 0.0;
    for (double v : x.data) phys += v * v;
    CHECK(phys == Catch::Approx(modal / double(n)).epsilon(1e-12));

    // cross-check against the naive full DFT oracle
    auto full = oracle::naive_dft_real(x.data);
    double modal_oracle = 0.0;
    for (auto& s : full) modal_oracle += std::norm(s);
    CHECK(phys == Catch::Approx(modal_oracle / double(n)).epsilon(1e-12));
}

TEST_CASE("rfft_truncate validates kmax") {
    auto x = constant(random_tensor({1, 16}, 202));
    CHECK_THROWS_AS(rfft_truncate(x, 9), ContractError);
    CHECK_THROWS_AS(rfft_truncate(x, 0), ContractError);
}

TEST_CASE("irfft_pad: zero modes with dc give the constant field") {
    auto modes = constant(Tensor::zeros({4, 2}, Dtype::Complex));
    auto dc = constant(Tensor::from({2}, {1.5, -0.25}));
    auto y = irfft_pad(modes, 16, dc);
    for (int j = 0; j < 16; ++j) {
        CHECK(y->value.data[j] == Catch::Approx(1.5).margin(1e-13));
        CHECK(y->value.data[16 + j] == Catch::Approx(-0.25).margin(1e-13));
    }
}

TEST_CASE("irfft_pad composed with rfft_truncate at kmax=N/2 is the identity") {
    const std::int64_t n = 32;
    Tensor x = random_tensor({2, n}, 203);
    auto xn = constant(x);
    auto y = irfft_pad(rfft_truncate(xn, n / 2), n, spatial_mean(xn));
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(y->value.data[i] == Catch::Approx(x.data[i]).margin(1e-12));
}

TEST_CASE("truncated round trip equals the ideal low-pass filter") {
    const std::int64_t n = 32;
    Tensor x = random_tensor({1, n}, 204);
    auto xn = constant(x);
    auto y = irfft_pad(rfft_truncate(xn, n / 4), n, spatial_mean(xn));

    auto full = oracle::naive_dft_real(x.data);
    for (std::size_t k = 0; k < (std::size_t)n; ++k) {
        long kk = std::labs(fft::signed_wavenumber(k, n));
        if (kk > n / 4) full[k] = 0.0;
    }
    auto want = oracle::naive_idft(full);
    for (std::int64_t j = 0; j < n; ++j)
        CHECK(y->value.data[j] == Catch::Approx(want[j].real()).margin(1e-10));
}

TEST_CASE("rfft_truncate is adjoint-consistent: <Fx, y> = <x, F*y>") {
    const std::int64_t n = 64, kmax = 20;
    Tensor x = random_tensor({2, n}, 205);
    Tensor y = random_tensor({kmax, 2}, 206, Dtype::Complex);

    auto xv = variable(x);
    auto fx = rfft_truncate(xv, kmax);
    const double lhs = pair_dot(fx->value, y);

    // F*y via the backward pass seeded with y
    auto probe = make_node("probe", Tensor::scalar(0.0), {fx}, [&y](Node& self) {
        for (std::size_t i = 0; i < y.data.size(); ++i)
            self.parents[0]->grad.data[i] += y.data[i] * self.grad.data[0];
    });
    backward(probe);
    const double rhs = pair_dot(x, xv->grad);
    CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("irfft_pad is adjoint-consistent") {
    const std::int64_t n = 32, kmax = 16;
    Tensor m = random_tensor({kmax, 1}, 207, Dtype::Complex);
    Tensor dc = random_tensor({1}, 208);
    Tensor y = random_tensor({1, n}, 209);

    auto mv = variable(m);
    auto dcv = variable(dc);
    auto fx = irfft_pad(mv, n, dcv);
    const double lhs = pair_dot(fx->value, y);

    auto probe = make_node("probe", Tensor::scalar(0.0), {fx}, [&y](Node& self) {
        for (std::size_t i = 0; i < y.data.size(); ++i)
            self.parents[0]->grad.data[i] += y.data[i] * self.grad.data[0];
    });
    backward(probe);
    const double rhs = pair_dot(m, mv->grad) + pair_dot(dc, dcv->grad);
    CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("complex_mode_mix: identities, doubling, oracle, linearity") {
    const std::int64_t kmax = 4, c = 3;
    Tensor m = random_tensor({kmax, c}, 211, Dtype::Complex);
    Tensor eye = Tensor::zeros({kmax, c, c}, Dtype::Complex);
    for (std::int64_t k = 0; k < kmax; ++k)
        for (std::int64_t i = 0; i < c; ++i) eye.re((k * c + i) * c + i) = 1.0;

    auto same = complex_mode_mix(constant(m), constant(eye));
    for (std::size_t i = 0; i < m.data.size(); ++i)
        CHECK(same->value.data[i] == Catch::Approx(m.data[i]).margin(1e-14));

    Tensor two = eye;
    for (auto& v : two.data) v *= 2.0;
    auto dbl = complex_mode_mix(constant(m), constant(two));
    for (std::size_t i = 0; i < m.data.size(); ++i)
        CHECK(dbl->value.data[i] == Catch::Approx(2.0 * m.data[i]).margin(1e-14));

    Tensor w = random_tensor({kmax, c, c}, 212, Dtype::Complex);
    auto y = complex_mode_mix(constant(m), constant(w));
    std::vector<std::complex<double>> mc(kmax * c), wc(kmax * c * c);
    for (std::int64_t i = 0; i < kmax * c; ++i) mc[i] = {m.re(i), m.im(i)};
    for (std::int64_t i = 0; i < kmax * c * c; ++i) wc[i] = {w.re(i), w.im(i)};
    auto want = oracle::direct_mode_mix(mc, kmax, c, wc);
    for (std::int64_t i = 0; i < kmax * c; ++i) {
        CHECK(y->value.re(i) == Catch::Approx(want[i].real()).margin(1e-12));
        CHECK(y->value.im(i) == Catch::Approx(want[i].imag()).margin(1e-12));
    }

    // linearity in the modes
    Tensor m2 = random_tensor({kmax, c}, 213, Dtype::Complex);
    Tensor mix = m;
    for (std::size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = 0.3 * m.data[i] - 1.1 * m2.data[i];
    auto fmix = complex_mode_mix(constant(mix), constant(w));
    auto f2 = complex_mode_mix(constant(m2), constant(w));
    for (std::size_t i = 0; i < mix.data.size(); ++i)
        CHECK(fmix->value.data[i] ==
              Catch::Approx(0.3 * y->value.data[i] - 1.1 * f2->value.data[i]).margin(1e-12));
}

TEST_CASE("complex-valued gradients flow through the mode mix (pairs of reals)") {
    const std::int64_t n = 16, kmax = 4, c = 2;
    Parameter w("w", random_tensor({kmax, c, c}, 214, Dtype::Complex, -0.5, 0.5));
    Tensor x = random_tensor({c, n}, 215);
    std::vector<Parameter> params{w};
    auto build = [&]() {
        auto xn = constant(x);
        auto spec = rfft_truncate(xn, kmax);
        auto mixed = complex_mode_mix(spec, w.node);
        return l2_norm(irfft_pad(mixed, n, spatial_mean(xn)));
    };
    CHECK(gradient_check(build, params) < 1e-5);
}

TEST_CASE("mode_scale scales per wavenumber and differentiates both ways") {
    const std::int64_t kmax = 5, c = 2;
    Parameter s("s", random_tensor({kmax}, 221, Dtype::Real, 0.2, 1.5));
    Parameter m("m", random_tensor({kmax, c}, 222, Dtype::Complex));
    auto y = mode_scale(m.node, s.node);
    for (std::int64_t k = 0; k < kmax; ++k)
        for (std::int64_t i = 0; i < c; ++i) {
            CHECK(y->value.re(k * c + i) ==
                  Catch::Approx(s.tensor().data[k] * m.tensor().re(k * c + i)).margin(1e-14));
        }
    std::vector<Parameter> params{s, m};
    auto build2 = [&]() {
        auto scaled = mode_scale(m.node, s.node);
        return make_node("pair_sumsq", Tensor::scalar(pair_dot(scaled->value, scaled->value)),
                         {scaled}, [](Node& self) {
                             const auto& v = self.parents[0]->value.data;
                             auto& g = self.parents[0]->grad.data;
                             for (std::size_t i = 0; i < v.size(); ++i)
                                 g[i] += 2.0 * v[i] * self.grad.data[0];
                         });
    };
    CHECK(gradient_check(build2, params) < 1e-5);
}

TEST_CASE("band_map follows the hierarchical wavenumber partition") {
    SECTION("kmax=8, n_gamma=2 example") {
        auto d = constant(Tensor::vector({10.0, 20.0, 30.0}));
        auto y = band_map(d, 8, 2);
        // k in {5..8} -> a, {3,4} -> b, {1,2} -> c
        std::vector<double> want{30, 30, 20, 20, 10, 10, 10, 10};
        CHECK(y->value.data == want);
    }
    SECTION("n_gamma=0 maps every wavenumber to the single value") {
        auto y = band_map(constant(Tensor::vector({4.2})), 16, 0);
        for (double v : y->value.data) CHECK(v == 4.2);
    }
    SECTION("piecewise-constant plateaus count n_gamma+1 when values are distinct") {
        const std::int64_t kmax = 64;
        const int ng = 4;
        Tensor d = Tensor::zeros({ng + 1});
        for (int i = 0; i <= ng; ++i) d.data[i] = 1.0 + i;
        auto y = band_map(constant(d), kmax, ng);
        int plateaus = 1;
        for (std::int64_t k = 1; k < kmax; ++k)
            if (y->value.data[k] != y->value.data[k - 1]) ++plateaus;
        CHECK(plateaus == ng + 1);
    }
    SECTION("every wavenumber is assigned exactly once") {
        for (std::int64_t kmax : {16, 64, 128}) {
            for (int ng = 0; ng <= 5; ++ng) {
                if (kmax < (std::int64_t(1) << ng)) {
                    CHECK_THROWS_AS(validate_band_partition(kmax, ng), ContractError);
                    continue;
                }
                std::vector<int> hits(kmax, 0);
                for (std::int64_t k = 1; k <= kmax; ++k) {
                    int band = band_of(k, kmax, ng);
                    REQUIRE(band >= 0);
                    REQUIRE(band <= ng);
                    ++hits[k - 1];
                }
                for (int h : hits) CHECK(h == 1);
            }
        }
    }
    SECTION("empty band is rejected") {
        CHECK_THROWS_AS(band_map(constant(Tensor::vector({1, 2, 3, 4, 5, 6})), 16, 5),
                        ContractError);
    }
    SECTION("gradient scatters back to band entries") {
        Parameter d("d", Tensor::vector({0.5, 1.5, 2.5}));
        std::vector<Parameter> params{d};
        auto build = [&]() { return sum(band_map(d.node, 8, 2)); };
        CHECK(gradient_check(build, params) < 1e-9);
        auto grads = backward(build());
        // band sizes: 4 (i=0), 2 (i=1), 2 (i=2)
        CHECK(grads.at("d").data == std::vector<double>{4, 2, 2});
    }
}

TEST_CASE("full spectral pipeline passes a finite-difference check") {
    const std::int64_t n = 16, kmax = 6, c = 2;
    Parameter w("w", random_tensor({kmax, c, c}, 231, Dtype::Complex, -0.4, 0.4));
    Parameter ws("ws", random_tensor({kmax, c, c}, 232, Dtype::Complex, -0.4, 0.4));
    Parameter d("d", random_tensor({3}, 233));
    Tensor x = random_tensor({c, n}, 234);
    std::vector<Parameter> params{w, ws, d};
    auto build = [&]() {
        auto xn = constant(x);
        auto spec = rfft_truncate(xn, kmax);
        auto base = complex_mode_mix(spec, w.node);
        auto scaled = complex_mode_mix(mode_scale(spec, band_map(softplus(d.node), kmax, 2)),
                                       ws.node);
        auto out = irfft_pad(add(base, scaled), n, spatial_mean(xn));
        return l2_norm(relu(out));
    };
    CHECK(gradient_check(build, params) < 1e-5);
}
