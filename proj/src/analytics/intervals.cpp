#include "dbr/analytics/intervals.hpp"

#include <algorithm>

namespace dbr::analytics {

IntervalStats interval_analysis(std::span<const data::SequenceSample> sequences) {
    IntervalStats s;
    for (const auto& seq : sequences) {
        if (seq.emotion != data::Emotion::emotional || seq.intention == data::Intention::lk) continue;
        if (seq.emotion_spans.empty() || seq.mirror_checks.empty()) continue;
        double e_first = seq.emotion_spans.front().start, e_last = seq.emotion_spans.front().end;
        for (const auto& sp : seq.emotion_spans) {
            e_first = std::min(e_first, sp.start);
            e_last = std::max(e_last, sp.end);
        }
        double m_first = seq.mirror_checks.front().start, m_last = seq.mirror_checks.front().end;
        for (const auto& mc : seq.mirror_checks) {
            m_first = std::min(m_first, mc.start);
            m_last = std::max(m_last, mc.end);
        }
        s.sequences.push_back({seq.id, e_first - m_first, e_last - m_last});
    }
    if (!s.empty()) {
        std::vector<double> initial, end;
        for (const auto& q : s.sequences) {
            initial.push_back(q.initial);
            end.push_back(q.end);
        }
        s.initial = mean_std(initial);
        s.end = mean_std(end);
    }
    return s;
}

ProportionReport emotion_proportions(std::span<const data::SequenceSample> sequences) {
    ProportionReport r;
    for (const auto& seq : sequences) {
        auto& p = r.by_intention[static_cast<std::size_t>(seq.intention)];
        if (seq.emotion == data::Emotion::emotional) {
            ++p.emotional;
        } else {
            ++p.neutral;
        }
    }
    for (auto& p : r.by_intention) {
        const auto n = p.emotional + p.neutral;
        p.emotional_fraction = n == 0 ? 0.0 : static_cast<double>(p.emotional) / static_cast<double>(n);
    }
    return r;
}

nlohmann::ordered_json to_json(const IntervalStats& s) {
    nlohmann::ordered_json j;
    j["qualifying_sequences"] = s.sequences.size();
    const auto stat = [](const std::optional<MeanStd>& m) -> nlohmann::ordered_json {
        if (!m) return nullptr;
        return {{"mean", m->mean}, {"std", m->std}};
    };
    j["initial_interval_s"] = stat(s.initial);
    j["end_interval_s"] = stat(s.end);
    auto rows = nlohmann::ordered_json::array();
    for (const auto& q : s.sequences) rows.push_back({{"id", q.id}, {"initial", q.initial}, {"end", q.end}});
    j["sequences"] = rows;
    return j;
}

nlohmann::ordered_json to_json(const ProportionReport& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < data::kIntentionCount; ++k) {
        const auto& p = r.by_intention[k];
        j[std::string(data::to_string(static_cast<data::Intention>(k)))] = {
            {"emotional", p.emotional}, {"neutral", p.neutral}, {"emotional_fraction", p.emotional_fraction}};
    }
    return j;
}

}  // namespace dbr::analytics
