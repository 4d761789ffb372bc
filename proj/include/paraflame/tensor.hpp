#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "paraflame/common.hpp"

namespace paraflame {

enum class Dtype { Real, Complex };

// Dense row-major tensor. Complex values are stored interleaved (re, im);
// this choice is fixed repo-wide and round-trips all serialization losslessly.
struct Tensor {
    std::vector<std::int64_t> shape;
    Dtype dtype = Dtype::Real;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, Dtype dtype = Dtype::Real) {
        Tensor t;
        t.shape = std::move(shape);
        t.dtype = dtype;
        t.data.assign(static_cast<std::size_t>(t.numel()) * t.reals_per_elem(), 0.0);
        return t;
    }

    static Tensor from(std::vector<std::int64_t> shape, std::vector<double> values,
                       Dtype dtype = Dtype::Real) {
        Tensor t;
        t.shape = std::move(shape);
        t.dtype = dtype;
        t.data = std::move(values);
        if (t.data.size() != static_cast<std::size_t>(t.numel()) * t.reals_per_elem())
            throw ContractError("tensor data length " + std::to_string(t.data.size()) +
                                " does not match shape " + t.shape_string());
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    static Tensor vector(std::vector<double> values) {
        auto n = static_cast<std::int64_t>(values.size());
        return from({n}, std::move(values));
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto e : shape) n *= e;
        return n;
    }

    std::size_t reals_per_elem() const { return dtype == Dtype::Complex ? 2 : 1; }

    std::int64_t extent(std::size_t axis) const {
        return axis < shape.size() ? shape[axis] : 1;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape && dtype == o.dtype; }

    // Complex accessors by flat element index.
    double re(std::int64_t i) const { return data[2 * static_cast<std::size_t>(i)]; }
    double im(std::int64_t i) const { return data[2 * static_cast<std::size_t>(i) + 1]; }
    double& re(std::int64_t i) { return data[2 * static_cast<std::size_t>(i)]; }
    double& im(std::int64_t i) { return data[2 * static_cast<std::size_t>(i) + 1]; }

    void fill(double v) { data.assign(data.size(), v); }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += " x ";
            s += std::to_string(shape[i]);
        }
        s += dtype == Dtype::Complex ? ", complex]" : "]";
        return s;
    }
};

inline void require_shape(const Tensor& t, const std::vector<std::int64_t>& shape,
                          const char* op, const char* arg) {
    if (t.shape != shape) {
        Tensor want;
        want.shape = shape;
        want.dtype = t.dtype;
        throw ContractError(std::string(op) + ": " + arg + " has shape " + t.shape_string() +
                            ", expected " + want.shape_string());
    }
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* arg) {
    if (t.shape.size() != rank)
        throw ContractError(std::string(op) + ": " + arg + " has rank " +
                            std::to_string(t.shape.size()) + ", expected " +
                            std::to_string(rank));
}

inline void require_dtype(const Tensor& t, Dtype d, const char* op, const char* arg) {
    if (t.dtype != d)
        throw ContractError(std::string(op) + ": " + arg + " must be " +
                            (d == Dtype::Real ? "real" : "complex"));
}

}  // namespace paraflame
