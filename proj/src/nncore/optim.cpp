#include "dbr/nncore/optim.hpp"

#include <cmath>
#include <string>

#include "dbr/errors.hpp"

namespace dbr::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    moments_.reserve(params_.size());
    for (auto* p : params_) {
        if (!p) throw StateError("Adam: null parameter");
        moments_.push_back({Tensor(p->value.shape(), 0.0), Tensor(p->value.shape(), 0.0)});
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void Adam::step(double rate) {
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        if (p.lr_multiplier == 0.0) continue;  // frozen: value and moments untouched
        auto& m = moments_[k].m;
        auto& v = moments_[k].v;
        const double step = rate * p.lr_multiplier;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p.value[i] -= step * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
    zero_grad();
}

double LrSchedule::rate(int epoch) const {
    if (epoch < 0) throw ValidationError("schedule epoch must be >= 0");
    return initial_rate * std::pow(decay_factor, static_cast<double>(epoch / decay_period));
}

void LrSchedule::validate() const {
    if (!(initial_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay factor must be in (0, 1]");
    if (decay_period < 1) throw ConfigError("decay period must be a positive number of epochs");
}

void glorot_uniform(Tensor& tensor, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : tensor.values()) v = dist(rng);
}

}  // namespace dbr::nn
