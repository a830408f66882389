#include "dbr/temporal/lstm.hpp"

#include <algorithm>

#include <cmath>
#include <memory>

#include "dbr/errors.hpp"
#include "dbr/nncore/eigen.hpp"
#include "dbr/nncore/optim.hpp"

namespace dbr::temporal {

using nn::Tensor;
using nn::Var;

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

LstmCellParams::LstmCellParams(const std::string& prefix, std::size_t input_width, std::size_t hidden,
                               std::mt19937_64& rng) {
    Tensor u({4 * hidden, input_width});
    Tensor w({4 * hidden, hidden});
    // Each gate block is initialized as its own h x D (or h x h) layer.
    nn::glorot_uniform(u, input_width, hidden, rng);
    nn::glorot_uniform(w, hidden, hidden, rng);
    input_weights = nn::Parameter(prefix + ".input_weights", std::move(u));
    recurrent_weights = nn::Parameter(prefix + ".recurrent_weights", std::move(w));
    // Forget-gate bias starts at 1 so memory is kept by default early in training.
    Tensor b({4 * hidden}, 0.0);
    std::fill(b.data(), b.data() + hidden, 1.0);
    bias = nn::Parameter(prefix + ".bias", std::move(b));
}

LstmStep lstm_cell_step(const LstmCellParams& p, std::span<const double> x, std::span<const double> s_prev,
                        std::span<const double> c_prev) {
    const auto h = p.hidden();
    const auto d = p.input_width();
    if (x.size() != d || s_prev.size() != h || c_prev.size() != h) {
        throw DimensionError("lstm_cell_step: expected x[" + std::to_string(d) + "], states[" + std::to_string(h) + "]");
    }
    const auto& u = p.input_weights.value;
    const auto& w = p.recurrent_weights.value;
    const auto& b = p.bias.value;
    auto pre = [&](std::size_t gate, std::size_t j) {
        const auto row = gate * h + j;
        double z = b[row];
        for (std::size_t k = 0; k < d; ++k) z += u[row * d + k] * x[k];
        for (std::size_t k = 0; k < h; ++k) z += w[row * h + k] * s_prev[k];
        return z;
    };
    LstmStep out;
    for (std::size_t j = 0; j < h; ++j) {
        out.forget.push_back(sigmoid(pre(0, j)));
        out.input.push_back(sigmoid(pre(1, j)));
        out.output.push_back(sigmoid(pre(2, j)));
        out.candidate.push_back(std::tanh(pre(3, j)));
        out.memory.push_back(out.forget[j] * c_prev[j] + out.input[j] * out.candidate[j]);
        out.state.push_back(out.output[j] * std::tanh(out.memory[j]));
    }
    return out;
}

Var lstm_cell(Var projected, Var carry, Var recurrent_weights) {
    const auto& pv = projected.value();
    const auto& cv = carry.value();
    const auto& wv = recurrent_weights.value();
    if (wv.rank() != 2 || wv.dim(0) != 4 * wv.dim(1)) throw DimensionError("lstm_cell: recurrent weights must be [4h x h]");
    const auto h = wv.dim(1);
    if (pv.rank() != 2 || pv.dim(1) != 4 * h || cv.rank() != 2 || cv.dim(1) != 2 * h || cv.dim(0) != pv.dim(0)) {
        throw DimensionError("lstm_cell: projected must be [N x 4h] and carry [N x 2h]");
    }
    const auto n = pv.dim(0);
    const auto hi = static_cast<Eigen::Index>(h);

    struct Saved {
        nn::RowMatrix gates;       // activated f, i, o, candidate
        nn::RowMatrix tanh_memory;
    };
    auto saved = std::make_shared<Saved>();
    auto& gates = saved->gates;
    gates = nn::as_matrix(pv);
    gates.noalias() += nn::as_matrix(cv).leftCols(hi) * nn::as_matrix(wv).transpose();
    gates.leftCols(3 * hi) = (1.0 + (-gates.leftCols(3 * hi).array()).exp()).inverse();
    gates.rightCols(hi) = gates.rightCols(hi).array().tanh();

    Tensor out({n, 2 * h});
    auto o = nn::as_matrix(out);
    const auto c_prev = nn::as_matrix(cv).rightCols(hi);
    o.rightCols(hi) = gates.leftCols(hi).array() * c_prev.array() +
                      gates.middleCols(hi, hi).array() * gates.rightCols(hi).array();
    saved->tanh_memory = o.rightCols(hi).array().tanh();
    o.leftCols(hi) = gates.middleCols(2 * hi, hi).array() * saved->tanh_memory.array();

    return projected.graph().record(std::move(out), {projected, carry, recurrent_weights},
                                    [saved, hi](nn::BackwardContext& ctx) {
        const auto dout = nn::as_matrix(ctx.out_grad());
        const auto& g = saved->gates;
        const auto& tc = saved->tanh_memory;
        const auto carry_in = nn::as_matrix(ctx.in_value(1));
        const auto f = g.leftCols(hi).array();
        const auto i = g.middleCols(hi, hi).array();
        const auto o = g.middleCols(2 * hi, hi).array();
        const auto cand = g.rightCols(hi).array();
        const auto ds = dout.leftCols(hi).array();
        const nn::RowMatrix dc = dout.rightCols(hi).array() + ds * o * (1.0 - tc.array().square());

        nn::RowMatrix dz(g.rows(), 4 * hi);
        dz.leftCols(hi) = dc.array() * carry_in.rightCols(hi).array() * f * (1.0 - f);
        dz.middleCols(hi, hi) = dc.array() * cand * i * (1.0 - i);
        dz.middleCols(2 * hi, hi) = ds * tc.array() * o * (1.0 - o);
        dz.rightCols(hi) = dc.array() * i * (1.0 - cand.square());

        if (auto* gp = ctx.in_grad(0)) nn::as_matrix(*gp) += dz;
        if (auto* gc = ctx.in_grad(1)) {
            auto gcm = nn::as_matrix(*gc);
            gcm.leftCols(hi).noalias() += dz * nn::as_matrix(ctx.in_value(2));
            gcm.rightCols(hi).array() += dc.array() * f;
        }
        if (auto* gw = ctx.in_grad(2)) nn::as_matrix(*gw).noalias() += dz.transpose() * carry_in.leftCols(hi);
    });
}

}  // namespace dbr::temporal
