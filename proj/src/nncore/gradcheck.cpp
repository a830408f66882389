#include "dbr/nncore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dbr::nn {
namespace {

std::vector<std::size_t> pick_entries(std::size_t size, std::size_t limit, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    if (size > limit) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(limit);
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

void record(GradcheckResult& r, double analytic, double numeric, const GradcheckOptions& o) {
    const double err = relative_error(analytic, numeric, o.floor);
    if (!std::isfinite(err) || err > o.tolerance) r.passed = false;
    r.max_error = std::max(r.max_error, std::isfinite(err) ? err : INFINITY);
    ++r.checked;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

GradcheckResult check_input_gradients(const std::string& name, const LeafLoss& loss, std::vector<Tensor> inputs,
                                      const GradcheckOptions& options) {
    auto evaluate = [&](std::vector<Tensor>& values, std::vector<Tensor>* grads) {
        Graph g;
        std::vector<Var> leaves;
        for (const auto& v : values) leaves.push_back(g.leaf(v));
        Var out = loss(g, leaves);
        if (grads) {
            g.backward(out);
            for (const auto& l : leaves) grads->push_back(g.grad(l));
        }
        return out.value()[0];
    };

    std::vector<Tensor> analytic;
    evaluate(inputs, &analytic);
    GradcheckResult result{name};
    std::mt19937_64 rng(options.seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (auto i : pick_entries(inputs[k].size(), options.max_entries, rng)) {
            const double saved = inputs[k][i];
            inputs[k][i] = saved + options.step;
            const double plus = evaluate(inputs, nullptr);
            inputs[k][i] = saved - options.step;
            const double minus = evaluate(inputs, nullptr);
            inputs[k][i] = saved;
            record(result, analytic[k][i], (plus - minus) / (2.0 * options.step), options);
        }
    }
    return result;
}

GradcheckResult check_parameter_gradients(const std::string& name, const ParamLoss& loss,
                                          std::span<Parameter* const> params, const GradcheckOptions& options) {
    for (auto* p : params) p->zero_grad();
    {
        Graph g;
        g.backward(loss(g));
    }
    std::vector<Tensor> analytic;
    for (auto* p : params) {
        analytic.push_back(p->grad);
        p->zero_grad();
    }
    auto value_only = [&] {
        Graph g;
        return loss(g).value()[0];
    };

    GradcheckResult result{name};
    std::mt19937_64 rng(options.seed);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value;
        for (auto i : pick_entries(value.size(), options.max_entries, rng)) {
            const double saved = value[i];
            value[i] = saved + options.step;
            const double plus = value_only();
            value[i] = saved - options.step;
            const double minus = value_only();
            value[i] = saved;
            record(result, analytic[k][i], (plus - minus) / (2.0 * options.step), options);
        }
    }
    return result;
}

}  // namespace dbr::nn
