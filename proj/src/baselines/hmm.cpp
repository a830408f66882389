#include "dbr/baselines/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "dbr/errors.hpp"
#include "dbr/seed.hpp"

namespace dbr::baselines {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

void check_sequence(const HmmModel& model, const nn::Tensor& seq) {
    if (seq.rank() != 2 || seq.dim(1) != model.width()) {
        throw DimensionError("hmm expects T x " + std::to_string(model.width()) + ", got " +
                             nn::shape_string(seq.shape()));
    }
    if (seq.dim(0) == 0) throw ValidationError("hmm: empty sequence");
}

/// Per-step emission log-densities [T x S].
std::vector<double> emission_table(const HmmModel& model, const nn::Tensor& seq) {
    const auto steps = seq.dim(0), states = model.states(), width = model.width();
    std::vector<double> out(steps * states);
    for (std::size_t t = 0; t < steps; ++t) {
        const std::span<const double> x(seq.data() + t * width, width);
        for (std::size_t s = 0; s < states; ++s) out[t * states + s] = emission_log_density(model, s, x);
    }
    return out;
}

struct Posteriors {
    double log_likelihood = 0.0;
    std::vector<double> gamma;  // [T x S]
    std::vector<double> xi;     // [S x S] summed over t
};

Posteriors forward_backward(const HmmModel& model, const nn::Tensor& seq) {
    const auto steps = seq.dim(0), states = model.states();
    const auto lb = emission_table(model, seq);
    std::vector<double> log_a(states * states), log_pi(states);
    for (std::size_t i = 0; i < states * states; ++i) log_a[i] = safe_log(model.transition[i]);
    for (std::size_t i = 0; i < states; ++i) log_pi[i] = safe_log(model.initial[i]);

    std::vector<double> alpha(steps * states), beta(steps * states, 0.0), terms(states);
    for (std::size_t s = 0; s < states; ++s) alpha[s] = log_pi[s] + lb[s];
    for (std::size_t t = 1; t < steps; ++t) {
        for (std::size_t j = 0; j < states; ++j) {
            for (std::size_t i = 0; i < states; ++i) terms[i] = alpha[(t - 1) * states + i] + log_a[i * states + j];
            alpha[t * states + j] = log_sum_exp(terms) + lb[t * states + j];
        }
    }
    for (std::size_t t = steps - 1; t-- > 0;) {
        for (std::size_t i = 0; i < states; ++i) {
            for (std::size_t j = 0; j < states; ++j) {
                terms[j] = log_a[i * states + j] + lb[(t + 1) * states + j] + beta[(t + 1) * states + j];
            }
            beta[t * states + i] = log_sum_exp(terms);
        }
    }
    Posteriors p;
    p.log_likelihood = log_sum_exp(std::span<const double>(alpha.data() + (steps - 1) * states, states));
    if (!std::isfinite(p.log_likelihood)) throw ValidationError("hmm: sequence has zero likelihood under the model");
    p.gamma.resize(steps * states);
    for (std::size_t k = 0; k < steps * states; ++k) p.gamma[k] = std::exp(alpha[k] + beta[k] - p.log_likelihood);
    p.xi.assign(states * states, 0.0);
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        for (std::size_t i = 0; i < states; ++i) {
            for (std::size_t j = 0; j < states; ++j) {
                p.xi[i * states + j] += std::exp(alpha[t * states + i] + log_a[i * states + j] +
                                                 lb[(t + 1) * states + j] + beta[(t + 1) * states + j] -
                                                 p.log_likelihood);
            }
        }
    }
    return p;
}

/// Lloyd's algorithm from a k-means++ start. Returns false when a cluster ends up empty.
bool kmeans(const std::vector<const double*>& points, std::size_t width, std::size_t k, int iterations,
            std::mt19937_64& rng, std::vector<std::size_t>& assignment) {
    const auto n = points.size();
    auto dist2 = [width](const double* a, const double* b) {
        double s = 0.0;
        for (std::size_t d = 0; d < width; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        return s;
    };
    std::vector<double> centers;
    centers.reserve(k * width);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const double* first = points[pick(rng)];
    centers.insert(centers.end(), first, first + width);
    std::vector<double> nearest(n);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < c; ++q) best = std::min(best, dist2(points[i], centers.data() + q * width));
            nearest[i] = best;
            total += best;
        }
        std::size_t chosen = pick(rng);
        if (total > 0.0) {
            std::discrete_distribution<std::size_t> weighted(nearest.begin(), nearest.end());
            chosen = weighted(rng);
        }
        centers.insert(centers.end(), points[chosen], points[chosen] + width);
    }
    assignment.assign(n, 0);
    std::vector<std::size_t> counts(k);
    for (int it = 0; it <= iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < k; ++q) {
                const double d = dist2(points[i], centers.data() + q * width);
                if (d < best) {
                    best = d;
                    assignment[i] = q;
                }
            }
        }
        std::fill(counts.begin(), counts.end(), 0);
        for (auto a : assignment) ++counts[a];
        if (std::find(counts.begin(), counts.end(), 0) != counts.end()) return false;
        if (it == iterations) break;
        std::fill(centers.begin(), centers.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < width; ++d) centers[assignment[i] * width + d] += points[i][d];
        }
        for (std::size_t q = 0; q < k; ++q) {
            for (std::size_t d = 0; d < width; ++d) centers[q * width + d] /= static_cast<double>(counts[q]);
        }
    }
    return true;
}

HmmModel initial_model(std::span<const nn::Tensor> sequences, const HmmFitOptions& opt) {
    const auto width = sequences[0].dim(1), states = opt.states;
    std::vector<const double*> points;
    for (const auto& s : sequences) {
        for (std::size_t t = 0; t < s.dim(0); ++t) points.push_back(s.data() + t * width);
    }
    if (points.size() < states) throw ValidationError("hmm: fewer frames than states");
    std::vector<std::size_t> assignment;
    bool ok = false;
    for (std::uint64_t attempt = 0; attempt < 2 && !ok; ++attempt) {
        std::mt19937_64 rng(derive_seed(opt.seed, attempt));
        ok = kmeans(points, width, states, opt.kmeans_iterations, rng, assignment);
    }
    if (!ok) throw ValidationError("hmm: k-means left a cluster empty after re-seeding");

    HmmModel m;
    m.variance_floor = opt.variance_floor;
    m.initial = nn::Tensor({states}, 1.0 / static_cast<double>(states));
    m.means = nn::Tensor({states, width}, 0.0);
    m.variances = nn::Tensor({states, width}, 0.0);
    std::vector<double> counts(states, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        counts[assignment[i]] += 1.0;
        for (std::size_t d = 0; d < width; ++d) m.means[assignment[i] * width + d] += points[i][d];
    }
    for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t d = 0; d < width; ++d) m.means[s * width + d] /= counts[s];
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t d = 0; d < width; ++d) {
            const double e = points[i][d] - m.means[assignment[i] * width + d];
            m.variances[assignment[i] * width + d] += e * e;
        }
    }
    for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t d = 0; d < width; ++d) {
            auto& v = m.variances[s * width + d];
            v = std::max(v / counts[s], opt.variance_floor);
        }
    }
    // Transitions from consecutive cluster labels with add-one smoothing.
    m.transition = nn::Tensor({states, states}, 1.0);
    std::size_t offset = 0;
    for (const auto& s : sequences) {
        for (std::size_t t = 0; t + 1 < s.dim(0); ++t) {
            m.transition[assignment[offset + t] * states + assignment[offset + t + 1]] += 1.0;
        }
        offset += s.dim(0);
    }
    for (std::size_t i = 0; i < states; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < states; ++j) row += m.transition[i * states + j];
        for (std::size_t j = 0; j < states; ++j) m.transition[i * states + j] /= row;
    }
    return m;
}

struct EStep {
    double log_likelihood = 0.0;
    std::vector<Posteriors> posteriors;
};

EStep expectation(const HmmModel& model, std::span<const nn::Tensor> sequences) {
    EStep e;
    for (const auto& s : sequences) {
        e.posteriors.push_back(forward_backward(model, s));
        e.log_likelihood += e.posteriors.back().log_likelihood;
    }
    return e;
}

HmmModel maximization(const HmmModel& prev, std::span<const nn::Tensor> sequences, const EStep& e) {
    const auto states = prev.states(), width = prev.width();
    HmmModel m = prev;
    m.initial.fill(0.0);
    std::vector<double> xi(states * states, 0.0), occupancy(states, 0.0);
    nn::Tensor sums({states, width}, 0.0);
    for (std::size_t n = 0; n < sequences.size(); ++n) {
        const auto& p = e.posteriors[n];
        const auto& x = sequences[n];
        for (std::size_t s = 0; s < states; ++s) m.initial[s] += p.gamma[s];
        for (std::size_t k = 0; k < states * states; ++k) xi[k] += p.xi[k];
        for (std::size_t t = 0; t < x.dim(0); ++t) {
            for (std::size_t s = 0; s < states; ++s) {
                const double g = p.gamma[t * states + s];
                occupancy[s] += g;
                for (std::size_t d = 0; d < width; ++d) sums[s * width + d] += g * x[t * width + d];
            }
        }
    }
    double init_total = 0.0;
    for (std::size_t s = 0; s < states; ++s) init_total += m.initial[s];
    for (std::size_t s = 0; s < states; ++s) m.initial[s] /= init_total;
    for (std::size_t i = 0; i < states; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < states; ++j) row += xi[i * states + j];
        if (row <= 0.0) continue;  // state never left: keep the previous row
        for (std::size_t j = 0; j < states; ++j) m.transition[i * states + j] = xi[i * states + j] / row;
    }
    std::vector<bool> updated(states, false);
    for (std::size_t s = 0; s < states; ++s) {
        if (!(occupancy[s] > 1e-300)) continue;  // unoccupied: keep the previous emission
        updated[s] = true;
        for (std::size_t d = 0; d < width; ++d) m.means[s * width + d] = sums[s * width + d] / occupancy[s];
    }
    // Second pass around the new means.
    nn::Tensor sq({states, width}, 0.0);
    for (std::size_t n = 0; n < sequences.size(); ++n) {
        const auto& p = e.posteriors[n];
        const auto& x = sequences[n];
        for (std::size_t t = 0; t < x.dim(0); ++t) {
            for (std::size_t s = 0; s < states; ++s) {
                if (!updated[s]) continue;
                const double g = p.gamma[t * states + s];
                for (std::size_t d = 0; d < width; ++d) {
                    const double r = x[t * width + d] - m.means[s * width + d];
                    sq[s * width + d] += g * r * r;
                }
            }
        }
    }
    for (std::size_t s = 0; s < states; ++s) {
        if (!updated[s]) continue;
        for (std::size_t d = 0; d < width; ++d) {
            m.variances[s * width + d] = std::max(sq[s * width + d] / occupancy[s], m.variance_floor);
        }
    }
    return m;
}

}  // namespace

void HmmModel::validate() const {
    const auto s = states();
    if (s == 0 || transition.shape() != nn::Shape{s, s} || means.rank() != 2 || means.dim(0) != s ||
        variances.shape() != means.shape()) {
        throw DimensionError("hmm parameter shapes are inconsistent");
    }
    auto stochastic = [](std::span<const double> row) {
        double total = 0.0;
        for (double v : row) {
            if (v < 0.0) return false;
            total += v;
        }
        return std::abs(total - 1.0) <= 1e-9;
    };
    if (!stochastic(initial.values())) throw ValidationError("hmm initial distribution does not sum to 1");
    for (std::size_t i = 0; i < s; ++i) {
        if (!stochastic(transition.values().subspan(i * s, s))) {
            throw ValidationError("hmm transition row " + std::to_string(i) + " does not sum to 1");
        }
    }
    for (double v : variances.values()) {
        if (!(v >= variance_floor)) throw ValidationError("hmm variance below the floor");
    }
}

double emission_log_density(const HmmModel& model, std::size_t state, std::span<const double> x) {
    const auto width = model.width();
    double s = 0.0;
    for (std::size_t d = 0; d < width; ++d) {
        const double var = model.variances[state * width + d];
        const double r = x[d] - model.means[state * width + d];
        s += std::log(2.0 * std::numbers::pi * var) + r * r / var;
    }
    return -0.5 * s;
}

double hmm_log_likelihood(const HmmModel& model, const nn::Tensor& seq) {
    check_sequence(model, seq);
    const auto steps = seq.dim(0), states = model.states();
    const auto lb = emission_table(model, seq);
    std::vector<double> alpha(states), next(states), terms(states);
    for (std::size_t s = 0; s < states; ++s) alpha[s] = safe_log(model.initial[s]) + lb[s];
    for (std::size_t t = 1; t < steps; ++t) {
        for (std::size_t j = 0; j < states; ++j) {
            for (std::size_t i = 0; i < states; ++i) terms[i] = alpha[i] + safe_log(model.transition[i * states + j]);
            next[j] = log_sum_exp(terms) + lb[t * states + j];
        }
        alpha.swap(next);
    }
    return log_sum_exp(alpha);
}

HmmFitResult hmm_fit(std::span<const nn::Tensor> sequences, const HmmFitOptions& opt) {
    if (opt.states < 1) throw ConfigError("hmm needs at least one state");
    if (opt.iterations < 0 || !(opt.variance_floor > 0.0)) throw ConfigError("hmm iterations/variance floor invalid");
    if (sequences.empty()) throw ValidationError("hmm: no training sequences");
    for (const auto& s : sequences) {
        if (s.rank() != 2 || s.dim(1) != sequences[0].dim(1) || s.dim(0) == 0) {
            throw DimensionError("hmm training sequences must be non-empty T x D with a shared D");
        }
    }
    HmmFitResult r;
    r.model = initial_model(sequences, opt);
    auto e = expectation(r.model, sequences);
    r.log_likelihood.push_back(e.log_likelihood);
    for (int it = 0; it < opt.iterations; ++it) {
        r.model = maximization(r.model, sequences, e);
        e = expectation(r.model, sequences);
        const double prev = r.log_likelihood.back();
        r.log_likelihood.push_back(e.log_likelihood);
        if (e.log_likelihood - prev < opt.tolerance * std::max(1.0, std::abs(prev))) break;
    }
    return r;
}

int hmm_classify(std::span<const HmmModel> models, const nn::Tensor& seq) {
    if (models.empty()) throw ValidationError("hmm_classify: no class models");
    int best = 0;
    double best_ll = kNegInf;
    for (std::size_t k = 0; k < models.size(); ++k) {
        const double ll = hmm_log_likelihood(models[k], seq);
        if (ll > best_ll) {
            best_ll = ll;
            best = static_cast<int>(k);
        }
    }
    return best;
}

nn::Checkpoint to_checkpoint(std::span<const HmmModel> models, const std::string& method) {
    if (models.empty()) throw ValidationError("no hmm models to save");
    nlohmann::ordered_json cfg{{"classes", models.size()},
                               {"states", models[0].states()},
                               {"width", models[0].width()},
                               {"variance_floor", models[0].variance_floor}};
    nn::Checkpoint ck;
    ck.method = method;
    ck.config_json = cfg.dump();
    for (std::size_t k = 0; k < models.size(); ++k) {
        const auto p = "class" + std::to_string(k) + ".";
        ck.tensors.push_back({p + "initial", models[k].initial});
        ck.tensors.push_back({p + "transition", models[k].transition});
        ck.tensors.push_back({p + "means", models[k].means});
        ck.tensors.push_back({p + "variances", models[k].variances});
    }
    return ck;
}

std::vector<HmmModel> hmm_from_checkpoint(const nn::Checkpoint& ck) {
    std::size_t classes = 0;
    double floor = 0.0;
    try {
        const auto j = nlohmann::json::parse(ck.config_json);
        classes = j.at("classes").get<std::size_t>();
        floor = j.at("variance_floor").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("hmm checkpoint config: ") + e.what());
    }
    std::vector<HmmModel> out;
    for (std::size_t k = 0; k < classes; ++k) {
        const auto p = "class" + std::to_string(k) + ".";
        HmmModel m;
        m.initial = ck.get(p + "initial");
        m.transition = ck.get(p + "transition");
        m.means = ck.get(p + "means");
        m.variances = ck.get(p + "variances");
        m.variance_floor = floor;
        m.validate();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace dbr::baselines
