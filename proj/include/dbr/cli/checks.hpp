#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dbr::cli {

/// Finite-difference agreement of one differentiable op over seeded instances.
struct OpCheck {
    std::string op;
    std::size_t instances = 0;
    std::size_t passed = 0;
    std::size_t entries = 0;
    double max_error = 0.0;

    bool ok() const noexcept { return instances > 0 && passed == instances; }
};

/// conv, pool, dense, activations, softmax-CE, LSTM cell, BiRNN layer and the
/// full decoder, each on `instances` random small problems.
std::vector<OpCheck> run_gradient_suite(std::size_t instances = 20, std::uint64_t seed = 0);

/// Largest |s_f(t) - s_b(T+1-t)| over tied-parameter layers fed palindromes.
double palindrome_max_deviation(std::size_t instances, std::uint64_t seed = 0);

}  // namespace dbr::cli
