#pragma once

#include <cmath>
#include <vector>

#include "paraflame/common.hpp"
#include "paraflame/fft.hpp"

namespace paraflame {

// Real-valued periodic grid function on N equispaced points over [-pi, pi),
// x_j = -pi + 2*pi*j/N. N must be a power of two.
struct Field {
    std::vector<double> values;

    Field() = default;
    explicit Field(std::size_t n) : values(n, 0.0) { check_size(); }
    explicit Field(std::vector<double> v) : values(std::move(v)) { check_size(); }

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t j) const { return values[j]; }
    double& operator[](std::size_t j) { return values[j]; }

    static double grid_x(std::size_t n, std::size_t j) {
        return -M_PI + 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n);
    }
    double x(std::size_t j) const { return grid_x(size(), j); }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Cyclic shift by s grid points: out[j] = in[(j - s) mod N].
    Field shifted(long s) const {
        const long n = static_cast<long>(size());
        Field out(size());
        for (long j = 0; j < n; ++j) out.values[j] = values[((j - s) % n + n) % n];
        return out;
    }

  private:
    void check_size() const {
        if (!fft::is_pow2(values.size()))
            throw ContractError("Field: grid size " + std::to_string(values.size()) +
                                " is not a power of two");
    }
};

inline Field sample_cosine(std::size_t n, int k, double amplitude, double phase = 0.0) {
    Field f(n);
    for (std::size_t j = 0; j < n; ++j)
        f.values[j] = amplitude * std::cos(k * Field::grid_x(n, j) + phase);
    return f;
}

}  // namespace paraflame
