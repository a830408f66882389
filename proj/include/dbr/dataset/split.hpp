#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbr/dataset/types.hpp"
#include "dbr/errors.hpp"

namespace dbr::data {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Sequence-level seeded split; |train| = round(fraction * n); index lists sorted.
Split split_train_test(std::size_t n, double fraction, std::uint64_t seed);

/// Frames [start, end) of a sequence.
struct FrameWindow {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t length() const noexcept { return end - start; }
};

class SequenceTooShort : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Lane changes: the window ends anticipation seconds before the maneuver
/// (nearest frame). Lane keeping: the end is drawn from [length, frames]
/// with a stream keyed by (seed, sequence id).
FrameWindow window_extract(const SequenceSample& seq, double length_s, double anticipation_s, std::uint64_t seed);

struct WindowReport {
    /// Indexed like the dataset; skipped sequences have no entry in `usable`.
    std::vector<FrameWindow> windows;
    std::vector<std::size_t> usable;
    std::vector<std::string> skipped;
};

WindowReport extract_windows(const Dataset& dataset, double length_s, double anticipation_s, std::uint64_t seed);

}  // namespace dbr::data
