#include "dbr/baselines/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbr/errors.hpp"

namespace dbr::baselines {

nn::Tensor hf_feature_sequence(const data::SequenceSample& seq) {
    return hf_feature_sequence(seq, {0, seq.frame_count()});
}

nn::Tensor hf_feature_sequence(const data::SequenceSample& seq, const data::FrameWindow& window) {
    if (seq.inside.size() != seq.frame_count() || seq.outside.size() != seq.frame_count()) {
        throw ValidationError("sequence " + seq.id + " lacks inside/outside feature streams for every frame");
    }
    if (window.end > seq.frame_count() || window.start >= window.end) {
        throw DimensionError("window [" + std::to_string(window.start) + ", " + std::to_string(window.end) +
                             ") outside sequence " + seq.id);
    }
    nn::Tensor out({window.length(), kHandFeatureWidth});
    double* row = out.data();
    for (std::size_t t = window.start; t < window.end; ++t, row += kHandFeatureWidth) {
        std::copy(seq.inside[t].begin(), seq.inside[t].end(), row);
        std::copy(seq.outside[t].begin(), seq.outside[t].end(), row + data::kInsideWidth);
    }
    return out;
}

nn::Tensor expand_statistics(const nn::Tensor& seq) {
    if (seq.rank() != 2) throw DimensionError("expand_statistics expects T x D, got " + nn::shape_string(seq.shape()));
    const auto steps = seq.dim(0), width = seq.dim(1);
    if (steps == 0) throw ValidationError("expand_statistics: empty sequence");
    nn::Tensor out({4 * width});
    for (std::size_t d = 0; d < width; ++d) {
        double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity(), sum = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double v = seq[t * width + d];
            hi = std::max(hi, v);
            lo = std::min(lo, v);
            sum += v;
        }
        const double mean = sum / static_cast<double>(steps);
        double sq = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double e = seq[t * width + d] - mean;
            sq += e * e;
        }
        out[4 * d] = hi;
        out[4 * d + 1] = lo;
        // Round-off can push the mean of a near-constant column just outside [min, max].
        out[4 * d + 2] = std::clamp(mean, lo, hi);
        out[4 * d + 3] = std::sqrt(sq / static_cast<double>(steps));
    }
    return out;
}

}  // namespace dbr::baselines
