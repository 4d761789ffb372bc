#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "paraflame/graph.hpp"

namespace paraflame::ad {

/// Rebuilds a scalar loss node from the current parameter values.
using LossBuilder = std::function<NodeRef()>;

struct GradCheckDetail {
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Max over all parameter components of
///   |analytic - central_fd| / max(|analytic|, |fd|, 1e-12)
/// with the finite difference taken at step h. Parameters are perturbed in
/// place and restored.
inline double gradient_check(const LossBuilder& build, std::vector<Parameter>& params,
                             double h = 1e-5, GradCheckDetail* detail = nullptr) {
    NodeRef loss = build();
    GradMap grads = backward(loss);
    const auto eval = [&build]() {
        NoGradGuard guard;
        return build()->value.data[0];
    };
    double max_rel = 0.0;
    for (auto& p : params) {
        if (!p.trainable()) continue;
        auto it = grads.find(p.name());
        auto& data = p.tensor().data;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + h;
            const double fp = eval();
            data[i] = saved - h;
            const double fm = eval();
            data[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double analytic = it == grads.end() ? 0.0 : it->second.data[i];
            const double rel = std::abs(analytic - fd) /
                               std::max({std::abs(analytic), std::abs(fd), 1e-12});
            if (rel > max_rel) {
                max_rel = rel;
                if (detail) *detail = {p.name(), i, analytic, fd};
            }
        }
    }
    return max_rel;
}

}  // namespace paraflame::ad
