#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "slu/tensor.hpp"

namespace slu {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference check of reverse-mode gradients, double precision only.
// loss_value evaluates the loss at the store's current values; loss_grad
// returns analytic gradients at the current values. Both must be
// deterministic.
inline GradCheckResult finite_difference_check(ParamStore<double>& params,
                                               const std::function<double()>& loss_value,
                                               const std::function<GradMap<double>()>& loss_grad,
                                               double epsilon = 1e-5) {
    GradMap<double> analytic = loss_grad();
    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<double>& p = params[pi];
        if (!p.requires_grad) continue;
        const std::vector<double>& ag = analytic.at(p.name);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double saved = p.value.data[i];
            p.value.data[i] = saved + epsilon;
            double f_plus = loss_value();
            p.value.data[i] = saved - epsilon;
            double f_minus = loss_value();
            p.value.data[i] = saved;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw NumericError("non-finite loss while checking parameter " + p.name);
            double numeric = (f_plus - f_minus) / (2.0 * epsilon);
            double a = ag[i];
            double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = p.name;
                result.worst_index = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace slu
