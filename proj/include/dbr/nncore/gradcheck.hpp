#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dbr/nncore/graph.hpp"

namespace dbr::nn {

struct GradcheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Denominator floor so that near-zero gradients are compared absolutely.
    double floor = 1e-6;
    /// Entries checked per tensor; larger tensors are sampled.
    std::size_t max_entries = 64;
    std::uint64_t seed = 0;
};

struct GradcheckResult {
    std::string name;
    double max_error = 0.0;
    std::size_t checked = 0;
    bool passed = true;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Builds a scalar loss from leaves holding `inputs`.
using LeafLoss = std::function<Var(Graph&, std::span<const Var>)>;
GradcheckResult check_input_gradients(const std::string& name, const LeafLoss& loss, std::vector<Tensor> inputs,
                                      const GradcheckOptions& options = {});

/// Builds a scalar loss whose graph binds `params` via Graph::param.
using ParamLoss = std::function<Var(Graph&)>;
GradcheckResult check_parameter_gradients(const std::string& name, const ParamLoss& loss,
                                          std::span<Parameter* const> params, const GradcheckOptions& options = {});

}  // namespace dbr::nn
