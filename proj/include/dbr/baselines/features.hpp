#pragma once

#include "dbr/dataset/split.hpp"
#include "dbr/dataset/types.hpp"
#include "dbr/nncore/tensor.hpp"

namespace dbr::baselines {

inline constexpr std::size_t kHandFeatureWidth = data::kInsideWidth + data::kOutsideWidth;

/// Per-frame [inside ; outside] rows, T x 18.
nn::Tensor hf_feature_sequence(const data::SequenceSample& sequence);
nn::Tensor hf_feature_sequence(const data::SequenceSample& sequence, const data::FrameWindow& window);

/// Per-dimension (max, min, mean, population std) of a T x D sequence, laid out
/// as [max_0, min_0, mean_0, std_0, max_1, ...] (4D values).
nn::Tensor expand_statistics(const nn::Tensor& sequence);

}  // namespace dbr::baselines
