#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbr/analytics/metrics.hpp"
#include "dbr/dataset/types.hpp"

namespace dbr::analytics {

struct SequenceIntervals {
    std::string id;
    double initial = 0.0;  // first expression start - first mirror-check start, seconds
    double end = 0.0;      // last expression end - last mirror-check end, seconds
};

/// Only emotional lane-change sequences with both span kinds qualify.
struct IntervalStats {
    std::vector<SequenceIntervals> sequences;
    std::optional<MeanStd> initial;
    std::optional<MeanStd> end;

    bool empty() const noexcept { return sequences.empty(); }
};

IntervalStats interval_analysis(std::span<const data::SequenceSample> sequences);

struct IntentionProportion {
    std::size_t emotional = 0;
    std::size_t neutral = 0;
    double emotional_fraction = 0.0;
};

struct ProportionReport {
    std::array<IntentionProportion, data::kIntentionCount> by_intention{};
};

ProportionReport emotion_proportions(std::span<const data::SequenceSample> sequences);

nlohmann::ordered_json to_json(const IntervalStats& s);
nlohmann::ordered_json to_json(const ProportionReport& r);

}  // namespace dbr::analytics
