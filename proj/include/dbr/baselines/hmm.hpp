#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbr/nncore/serialize.hpp"
#include "dbr/nncore/tensor.hpp"

namespace dbr::baselines {

/// Hidden Markov model with diagonal-Gaussian emissions.
struct HmmModel {
    nn::Tensor initial;     // [S]
    nn::Tensor transition;  // [S x S], row-stochastic
    nn::Tensor means;       // [S x D]
    nn::Tensor variances;   // [S x D]
    double variance_floor = 1e-4;

    std::size_t states() const { return initial.size(); }
    std::size_t width() const { return means.dim(1); }
    void validate() const;
};

/// log N(x; mean_s, diag(variance_s)).
double emission_log_density(const HmmModel& model, std::size_t state, std::span<const double> x);

/// Forward-algorithm log p(x_1..x_T) in the log domain. `sequence` is T x D.
double hmm_log_likelihood(const HmmModel& model, const nn::Tensor& sequence);

struct HmmFitOptions {
    std::size_t states = 4;
    int iterations = 30;
    /// Stop once an iteration improves the total log-likelihood by less than this.
    double tolerance = 1e-6;
    double variance_floor = 1e-4;
    int kmeans_iterations = 10;
    std::uint64_t seed = 0;
};

struct HmmFitResult {
    HmmModel model;
    /// Training log-likelihood of the model before each re-estimation and after the last.
    std::vector<double> log_likelihood;
};

/// Baum-Welch from a seeded k-means start. Sequences are T_i x D.
HmmFitResult hmm_fit(std::span<const nn::Tensor> sequences, const HmmFitOptions& options);

/// Class whose model scores the sequence highest; ties go to the lowest index.
int hmm_classify(std::span<const HmmModel> models, const nn::Tensor& sequence);

nn::Checkpoint to_checkpoint(std::span<const HmmModel> models, const std::string& method);
std::vector<HmmModel> hmm_from_checkpoint(const nn::Checkpoint& checkpoint);

}  // namespace dbr::baselines
