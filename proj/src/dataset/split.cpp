#include "dbr/dataset/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dbr/seed.hpp"

namespace dbr::data {

Split split_train_test(std::size_t n, double fraction, std::uint64_t seed) {
    if (n < 2) throw ValidationError("cannot split fewer than 2 sequences");
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
    Split s{{idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k)},
            {idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end()}};
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

FrameWindow window_extract(const SequenceSample& seq, double length_s, double anticipation_s, std::uint64_t seed) {
    if (!(length_s > 0.0) || anticipation_s < 0.0) throw ConfigError("window length must be positive");
    const auto length = static_cast<std::size_t>(std::lround(length_s * seq.fps));
    const auto needed = static_cast<std::size_t>(std::lround((length_s + anticipation_s) * seq.fps));
    const auto n = seq.frame_count();
    if (n < needed) {
        throw SequenceTooShort("sequence " + seq.id + " has " + std::to_string(n) + " frames, needs " +
                               std::to_string(needed));
    }
    std::size_t end = 0;
    if (seq.intention == Intention::lk || !seq.maneuver_time) {
        std::mt19937_64 rng(derive_seed(seed, hash_string(seq.id)));
        end = std::uniform_int_distribution<std::size_t>(length, n)(rng);
    } else {
        const long e = std::lround((*seq.maneuver_time - anticipation_s) * seq.fps);
        if (e < static_cast<long>(length) || e > static_cast<long>(n)) {
            throw SequenceTooShort("sequence " + seq.id + " cannot fit a window before its maneuver");
        }
        end = static_cast<std::size_t>(e);
    }
    return {end - length, end};
}

WindowReport extract_windows(const Dataset& dataset, double length_s, double anticipation_s, std::uint64_t seed) {
    WindowReport r;
    r.windows.resize(dataset.sequences.size());
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
        try {
            r.windows[i] = window_extract(dataset.sequences[i], length_s, anticipation_s, seed);
            r.usable.push_back(i);
        } catch (const SequenceTooShort&) {
            r.skipped.push_back(dataset.sequences[i].id);
        }
    }
    return r;
}

}  // namespace dbr::data
