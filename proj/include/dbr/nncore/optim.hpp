#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dbr/nncore/graph.hpp"

namespace dbr::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates for one parameter.
struct AdamMoments {
    Tensor m;
    Tensor v;
};

/// Adam with bias correction. The effective step for a parameter is
/// rate * parameter.lr_multiplier; gradients are zeroed after each step.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, AdamConfig config = {});

    void step(double rate);
    void zero_grad();

    std::uint64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }
    const AdamMoments& moments(std::size_t i) const { return moments_.at(i); }
    std::size_t parameter_count() const noexcept { return params_.size(); }

private:
    std::vector<Parameter*> params_;
    std::vector<AdamMoments> moments_;
    AdamConfig config_;
    std::uint64_t t_ = 0;
};

/// Step decay: initial_rate * decay_factor^floor(epoch / decay_period).
struct LrSchedule {
    double initial_rate = 0.1;
    double decay_factor = 0.5;
    int decay_period = 50;

    double rate(int epoch) const;
    void validate() const;
};

inline double schedule_rate(const LrSchedule& schedule, int epoch) { return schedule.rate(epoch); }

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& tensor, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace dbr::nn
