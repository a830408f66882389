#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dbr/nncore/graph.hpp"

namespace dbr::temporal {

/// Gate blocks are stacked in the order forget, input, output, candidate:
/// input_weights [4h x D], recurrent_weights [4h x h], bias [4h].
struct LstmCellParams {
    LstmCellParams() = default;
    LstmCellParams(const std::string& prefix, std::size_t input_width, std::size_t hidden, std::mt19937_64& rng);

    nn::Parameter input_weights;
    nn::Parameter recurrent_weights;
    nn::Parameter bias;

    std::size_t hidden() const { return bias.value.size() / 4; }
    std::size_t input_width() const { return input_weights.value.dim(1); }
    std::vector<nn::Parameter*> parameters() { return {&input_weights, &recurrent_weights, &bias}; }
};

struct LstmStep {
    std::vector<double> state;   // s_t
    std::vector<double> memory;  // C_t
    std::vector<double> forget, input, output, candidate;
};

/// Tape-free reference evaluation of one cell step.
LstmStep lstm_cell_step(const LstmCellParams& params, std::span<const double> x, std::span<const double> state_prev,
                        std::span<const double> memory_prev);

/// One batched cell step on the tape. `projected` is U x + b ([N x 4h]);
/// `carry` packs [s_prev | C_prev] as [N x 2h]; the result packs [s_t | C_t].
nn::Var lstm_cell(nn::Var projected, nn::Var carry, nn::Var recurrent_weights);

}  // namespace dbr::temporal
