#include "dbr/dataset/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "dbr/dataset/manifest.hpp"
#include "dbr/errors.hpp"
#include "dbr/seed.hpp"

namespace dbr::data {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint8_t kBackground = 128;
constexpr std::uint8_t kBoxBase = 80;
constexpr std::uint8_t kMarker = 230;
constexpr std::uint8_t kMouthNeutral = 30;
constexpr std::uint8_t kMouthEmotional = 210;
constexpr int kJitter = 2;

struct FrameSpan {
    long start = 0;
    long end = 0;  // exclusive
};

struct Glance {
    FrameSpan span;
    Direction side = Direction::left;
};

struct Plan {
    Intention intention = Intention::lk;
    long frames = 0;
    std::optional<long> maneuver_frame;
    std::vector<Glance> glances;
    std::optional<FrameSpan> expression;
    std::array<double, 2> lanes{0.0, 0.0};
    std::uint64_t content_seed = 0;
    /// Per-frame inside rows supplied by an order-only triple; empty otherwise.
    std::vector<InsideFeature> inside;
    std::vector<OutsideFeature> outside;
};

long uniform_int(std::mt19937_64& rng, long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); }

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

long to_frames(double seconds, double fps) { return std::lround(seconds * fps); }

std::vector<Direction> frame_directions(const Plan& plan) {
    std::vector<Direction> dirs(static_cast<std::size_t>(plan.frames), Direction::normal);
    for (const auto& g : plan.glances) {
        for (long k = g.span.start; k < g.span.end; ++k) dirs[static_cast<std::size_t>(k)] = g.side;
    }
    return dirs;
}

struct Pose {
    double yaw;
    double pitch;
};

Pose pose_for(Direction d) {
    switch (d) {
        case Direction::normal: return {0.0, -0.05};
        case Direction::left: return {-0.75, 0.05};
        case Direction::right: return {0.75, 0.05};
        case Direction::rear: return {0.35, 0.30};
    }
    return {0.0, 0.0};
}

InsideFeature inside_row(Direction d, std::mt19937_64& rng) {
    std::normal_distribution<double> gaze(0.0, 0.05);
    std::normal_distribution<double> small(0.0, 0.01);
    const auto p = pose_for(d);
    const double yaw = p.yaw + gaze(rng);
    const double pitch = p.pitch + gaze(rng);
    InsideFeature f{};
    for (int eye = 0; eye < 2; ++eye) {
        const double ey = yaw + small(rng);
        const double ep = pitch + small(rng);
        f[static_cast<std::size_t>(3 * eye + 0)] = std::sin(ey) * std::cos(ep);
        f[static_cast<std::size_t>(3 * eye + 1)] = std::sin(ep);
        f[static_cast<std::size_t>(3 * eye + 2)] = -std::cos(ey) * std::cos(ep);
    }
    f[6] = yaw;
    f[7] = pitch;
    const double head_yaw = 0.6 * yaw + gaze(rng);
    const double head_pitch = 0.5 * pitch + gaze(rng);
    // Head translation in metres relative to the camera.
    f[8] = 0.03 + 0.05 * head_yaw + small(rng);
    f[9] = 0.02 + small(rng);
    f[10] = 0.60 + small(rng);
    f[11] = head_pitch;
    f[12] = head_yaw;
    f[13] = 2.0 * small(rng);
    return f;
}

std::vector<OutsideFeature> outside_rows(long frames, std::array<double, 2> lanes, std::mt19937_64& rng) {
    std::normal_distribution<double> base(28.0, 2.0);
    std::normal_distribution<double> jitter(0.0, 0.2);
    std::normal_distribution<double> heading(0.0, 0.5);
    const double speed = base(rng);
    std::vector<OutsideFeature> rows(static_cast<std::size_t>(frames));
    for (auto& r : rows) r = {lanes[0], lanes[1], std::max(0.0, speed + jitter(rng)), heading(rng)};
    return rows;
}

// Expression span planted relative to the first and last mirror checks.
FrameSpan planted_expression(const std::vector<Glance>& glances, const SynthConfig& cfg, long frames,
                             const std::string& id) {
    long first = glances.front().span.start;
    long last = glances.front().span.end;
    for (const auto& g : glances) {
        first = std::min(first, g.span.start);
        last = std::max(last, g.span.end);
    }
    FrameSpan e{first + to_frames(cfg.initial_interval, cfg.fps), last + to_frames(cfg.end_interval, cfg.fps)};
    if (e.start < 0 || e.end > frames || e.start >= e.end) {
        throw ConfigError("planted intervals push the expression span of " + id + " outside the sequence");
    }
    return e;
}

Plan plan_default(Intention intention, bool emotional, const SynthConfig& cfg, std::mt19937_64& rng,
                  const std::string& id) {
    Plan p;
    p.intention = intention;
    p.frames = to_frames(cfg.duration, cfg.fps);
    std::bernoulli_distribution lane(0.5);
    p.lanes = {lane(rng) ? 1.0 : 0.0, lane(rng) ? 1.0 : 0.0};
    if (intention == Intention::lk) {
        if (coin(rng, 0.5)) {
            const long s = uniform_int(rng, 40, std::max<long>(40, p.frames - 50));
            p.glances.push_back({{s, s + uniform_int(rng, 15, 25)}, Direction::rear});
        }
        if (emotional) {
            const long s = uniform_int(rng, 75, 115);
            p.expression = FrameSpan{s, std::min(p.frames, s + uniform_int(rng, 40, 75))};
        }
        return p;
    }
    const auto side = intention == Intention::lcl ? Direction::left : Direction::right;
    if (intention == Intention::lcl) p.lanes[1] = 1.0;
    if (intention == Intention::lcr) p.lanes[0] = 1.0;
    p.maneuver_frame = to_frames(cfg.maneuver_time, cfg.fps);
    const long window_end = *p.maneuver_frame - to_frames(cfg.anticipation, cfg.fps);
    const long window_start = window_end - to_frames(cfg.window_length, cfg.fps);
    // Checks inside the observation window, scaled from the 150-frame default layout.
    const double scale = static_cast<double>(window_end - window_start) / 150.0;
    auto frames_of = [&](long f) { return std::lround(static_cast<double>(f) * scale); };
    long s = window_start + frames_of(uniform_int(rng, 40, 70));
    long e = s + frames_of(uniform_int(rng, 15, 25));
    p.glances.push_back({{s, e}, side});
    if (coin(rng, 0.5)) {
        s = e + frames_of(uniform_int(rng, 10, 20));
        e = s + frames_of(uniform_int(rng, 15, 25));
        if (e <= window_end) p.glances.push_back({{s, e}, side});
    }
    if (coin(rng, 0.5)) {
        const long gap = *p.maneuver_frame - window_end;
        const long len = std::min<long>(uniform_int(rng, 15, 25), gap / 2);
        if (len > 0) {
            s = window_end + uniform_int(rng, 0, gap - len);
            p.glances.push_back({{s, s + len}, side});
        }
    }
    if (emotional) p.expression = planted_expression(p.glances, cfg, p.frames, id);
    return p;
}

// The three sequences of a triple share glances, durations and feature rows;
// only the order of the three glances differs between intentions.
std::array<Plan, kIntentionCount> plan_triple(bool emotional, const SynthConfig& cfg, std::mt19937_64& rng,
                                              std::size_t triple) {
    const long lc_frames = to_frames(cfg.duration, cfg.fps);
    const long maneuver = to_frames(cfg.maneuver_time, cfg.fps);
    const long window_end = maneuver - to_frames(cfg.anticipation, cfg.fps);
    const long window_len = to_frames(cfg.window_length, cfg.fps);
    const long lk_frames = to_frames(cfg.window_length + cfg.anticipation, cfg.fps);

    const std::array<Direction, 3> kinds{Direction::left, Direction::right, Direction::rear};
    std::array<long, 3> duration{};
    for (auto& d : duration) d = uniform_int(rng, 9, 12);
    const long gap1 = uniform_int(rng, 3, 4);
    const long gap2 = uniform_int(rng, 3, 4);
    const long total = duration[0] + duration[1] + duration[2] + gap1 + gap2;
    const long region = window_len / 3;  // glances fall in the last third of the window
    const long region_start = window_end - region;
    const long start = region_start + uniform_int(rng, 0, std::max<long>(0, region - total));

    // Background rows repeat with the window period, so any window-long slice
    // holds the same multiset of rows wherever a lane-keeping window lands.
    const auto period = static_cast<std::size_t>(window_len);
    std::vector<InsideFeature> base(static_cast<std::size_t>(lc_frames));
    for (std::size_t k = 0; k < base.size(); ++k) {
        base[k] = k < period ? inside_row(Direction::normal, rng) : base[k % period];
    }
    std::array<std::vector<InsideFeature>, 3> glance_rows;
    for (std::size_t g = 0; g < 3; ++g) {
        for (long k = 0; k < duration[g]; ++k) glance_rows[g].push_back(inside_row(kinds[g], rng));
    }
    auto outside = outside_rows(lc_frames, {1.0, 1.0}, rng);
    for (std::size_t k = period; k < outside.size(); ++k) outside[k] = outside[k % period];

    // Order of (left, right, rear) indices per intention.
    const std::array<std::array<std::size_t, 3>, kIntentionCount> orders{{{2, 1, 0}, {2, 0, 1}, {0, 1, 2}}};
    std::array<Plan, kIntentionCount> plans;
    for (std::size_t c = 0; c < kIntentionCount; ++c) {
        auto& p = plans[c];
        p.intention = static_cast<Intention>(c);
        p.frames = p.intention == Intention::lk ? lk_frames : lc_frames;
        if (p.intention != Intention::lk) p.maneuver_frame = maneuver;
        p.lanes = {1.0, 1.0};
        p.inside = base;
        p.inside.resize(static_cast<std::size_t>(p.frames));
        p.outside.assign(outside.begin(), outside.begin() + p.frames);
        long s = start;
        for (std::size_t slot = 0; slot < 3; ++slot) {
            const auto g = orders[c][slot];
            p.glances.push_back({{s, s + duration[g]}, kinds[g]});
            std::copy(glance_rows[g].begin(), glance_rows[g].end(), p.inside.begin() + s);
            s += duration[g] + (slot == 0 ? gap1 : gap2);
        }
        if (emotional) {
            p.expression = planted_expression(p.glances, cfg, p.frames, "triple " + std::to_string(triple));
        }
    }
    return plans;
}

std::vector<bool> choose_emotional(int count, double fraction, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(count);
    const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(count)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> flags(n, false);
    for (std::size_t i = 0; i < k; ++i) flags[idx[i]] = true;
    return flags;
}

std::string frame_name(long k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06ld.pgm", k);
    return buf;
}

SequenceSample realize(const Plan& plan, const std::string& id, const SynthConfig& cfg,
                       const std::filesystem::path& root) {
    SequenceSample s;
    s.id = id;
    s.fps = cfg.fps;
    s.intention = plan.intention;
    s.emotion = plan.expression ? Emotion::emotional : Emotion::neutral;
    const double fps = cfg.fps;
    if (plan.maneuver_frame) s.maneuver_time = static_cast<double>(*plan.maneuver_frame) / fps;
    for (const auto& g : plan.glances) {
        s.mirror_checks.push_back({static_cast<double>(g.span.start) / fps, static_cast<double>(g.span.end) / fps, g.side});
    }
    if (plan.expression) {
        s.emotion_spans.push_back(
            {static_cast<double>(plan.expression->start) / fps, static_cast<double>(plan.expression->end) / fps});
    }

    std::mt19937_64 rng(plan.content_seed);
    const auto dirs = frame_directions(plan);
    s.inside = plan.inside;
    if (s.inside.empty()) {
        for (auto d : dirs) s.inside.push_back(inside_row(d, rng));
    }
    s.outside = plan.outside.empty() ? outside_rows(plan.frames, plan.lanes, rng) : plan.outside;

    const auto dir = root / "frames" / id;
    std::filesystem::create_directories(dir);
    for (long k = 0; k < plan.frames; ++k) {
        const bool expressive = plan.expression && k >= plan.expression->start && k < plan.expression->end;
        const auto d = dirs[static_cast<std::size_t>(k)];
        std::mt19937_64 frame_rng(derive_seed(plan.content_seed, static_cast<std::uint64_t>(k) + 1));
        const int jr = static_cast<int>(uniform_int(frame_rng, -kJitter, kJitter));
        const int jc = static_cast<int>(uniform_int(frame_rng, -kJitter, kJitter));
        const auto path = dir / frame_name(k);
        write_pgm(render_frame(d, expressive, cfg.image_side, cfg.noise_sigma, jr, jc, frame_rng), path);
        s.frames.push_back(path);
        s.frame_labels.push_back(behavior_label(d, expressive, cfg.num_classes));
        s.timestamps.push_back(static_cast<double>(k) / fps);
    }
    return s;
}

}  // namespace

void SynthConfig::validate() const {
    for (std::size_t c = 0; c < kIntentionCount; ++c) {
        if (counts[c] < 1) throw ConfigError("synthetic counts must be >= 1 per intention");
        if (!(emotional_fraction[c] >= 0.0 && emotional_fraction[c] <= 1.0)) {
            throw ConfigError("emotional fractions must lie in [0, 1]");
        }
    }
    if (order_only && (counts[0] != counts[1] || counts[1] != counts[2])) {
        throw ConfigError("the order-only variant needs equal counts per intention");
    }
    if (!(fps > 0.0)) throw ConfigError("fps must be positive");
    if (image_side < 16 || image_side % 8 != 0) throw ConfigError("image side must be a multiple of 8, at least 16");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
    if (num_classes != 7 && num_classes != 8) throw ConfigError("num_classes must be 7 or 8");
    if (!(window_length > 0.0 && anticipation >= 0.0)) throw ConfigError("window length must be positive");
    if (!(maneuver_time <= duration)) throw ConfigError("maneuver_time must not exceed duration");
    if (std::lround((maneuver_time - anticipation - window_length) * fps) < 0) {
        throw ConfigError("maneuver_time leaves no room for the observation window");
    }
    if (std::lround(duration * fps) < std::lround((window_length + anticipation) * fps)) {
        throw ConfigError("duration is shorter than window plus anticipation");
    }
}

ordered_json to_json(const SynthConfig& c) {
    return ordered_json{{"seed", c.seed},
                        {"counts", c.counts},
                        {"emotional_fraction", c.emotional_fraction},
                        {"initial_interval", c.initial_interval},
                        {"end_interval", c.end_interval},
                        {"noise_sigma", c.noise_sigma},
                        {"image_side", c.image_side},
                        {"fps", c.fps},
                        {"duration", c.duration},
                        {"maneuver_time", c.maneuver_time},
                        {"window_length", c.window_length},
                        {"anticipation", c.anticipation},
                        {"order_only", c.order_only},
                        {"num_classes", c.num_classes}};
}

SynthConfig synth_config_from_json(const json& j, SynthConfig c) {
    try {
        c.seed = j.value("seed", c.seed);
        c.counts = j.value("counts", c.counts);
        c.emotional_fraction = j.value("emotional_fraction", c.emotional_fraction);
        c.initial_interval = j.value("initial_interval", c.initial_interval);
        c.end_interval = j.value("end_interval", c.end_interval);
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.image_side = j.value("image_side", c.image_side);
        c.fps = j.value("fps", c.fps);
        c.duration = j.value("duration", c.duration);
        c.maneuver_time = j.value("maneuver_time", c.maneuver_time);
        c.window_length = j.value("window_length", c.window_length);
        c.anticipation = j.value("anticipation", c.anticipation);
        c.order_only = j.value("order_only", c.order_only);
        c.num_classes = j.value("num_classes", c.num_classes);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    return c;
}

GlyphLayout glyph_layout(int side, int jitter_row, int jitter_col) {
    GlyphLayout g;
    g.box_side = side / 2;
    g.cell = g.box_side / 4;
    g.top = side / 4 + jitter_row;
    g.left = side / 4 + jitter_col;
    return g;
}

GrayImage render_frame(Direction direction, bool expressive, int side, double noise_sigma, int jitter_row,
                       int jitter_col, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(side);
    GrayImage img{n, std::vector<std::uint8_t>(n * n, kBackground)};
    const auto g = glyph_layout(side, jitter_row, jitter_col);

    std::array<std::array<std::uint8_t, 4>, 4> cells{};
    for (auto& row : cells) row.fill(kBoxBase);
    switch (direction) {
        case Direction::normal: cells[1][1] = cells[1][2] = kMarker; break;
        case Direction::left: cells[1][0] = cells[2][0] = kMarker; break;
        case Direction::right: cells[1][3] = cells[2][3] = kMarker; break;
        case Direction::rear: cells[0][1] = cells[0][2] = kMarker; break;
    }
    cells[3][1] = cells[3][2] = expressive ? kMouthEmotional : kMouthNeutral;

    for (int r = 0; r < g.box_side; ++r) {
        for (int c = 0; c < g.box_side; ++c) {
            const int y = g.top + r;
            const int x = g.left + c;
            if (y < 0 || x < 0 || y >= side || x >= side) continue;
            img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                cells[static_cast<std::size_t>(r / g.cell)][static_cast<std::size_t>(c / g.cell)];
        }
    }
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (auto& p : img.pixels) {
            const double v = std::round(static_cast<double>(p) + noise(rng));
            p = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return img;
}

Dataset generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    Dataset d;
    d.fps = cfg.fps;
    d.image_side = cfg.image_side;
    d.classes = behavior_class_names(cfg.num_classes);
    d.root = out_dir;
    try {
        std::filesystem::create_directories(out_dir);
    } catch (const std::filesystem::filesystem_error& e) {
        throw IoError("cannot create output directory " + out_dir.string() + ": " + e.what());
    }

    static constexpr std::array<const char*, kIntentionCount> prefix{"lcl", "lcr", "lk"};
    auto id_of = [](std::size_t c, std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s_%03zu", prefix[c], i);
        return std::string(buf);
    };

    std::mt19937_64 selection(derive_seed(cfg.seed, 1));
    std::array<std::vector<Plan>, kIntentionCount> plans;
    if (cfg.order_only) {
        const auto triples = static_cast<std::size_t>(cfg.counts[0]);
        const auto emotional = choose_emotional(cfg.counts[0], cfg.emotional_fraction[2], selection);
        for (std::size_t t = 0; t < triples; ++t) {
            std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + t));
            auto triple = plan_triple(emotional[t], cfg, rng, t);
            for (std::size_t c = 0; c < kIntentionCount; ++c) plans[c].push_back(std::move(triple[c]));
        }
    } else {
        for (std::size_t c = 0; c < kIntentionCount; ++c) {
            const auto emotional = choose_emotional(cfg.counts[c], cfg.emotional_fraction[c], selection);
            for (std::size_t i = 0; i < emotional.size(); ++i) {
                std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + 100000 * c + i));
                plans[c].push_back(plan_default(static_cast<Intention>(c), emotional[i], cfg, rng, id_of(c, i)));
            }
        }
    }

    std::uint64_t stream = 0;
    for (std::size_t c = 0; c < kIntentionCount; ++c) {
        for (std::size_t i = 0; i < plans[c].size(); ++i) {
            auto& plan = plans[c][i];
            plan.content_seed = derive_seed(cfg.seed, 0xF00D0000ULL + stream++);
            d.sequences.push_back(realize(plan, id_of(c, i), cfg, out_dir));
        }
    }
    try {
        save_manifest(d, ordered_json{{"synth", to_json(cfg)}});
    } catch (const std::filesystem::filesystem_error& e) {
        throw IoError(e.what());
    }
    return load_manifest(out_dir / "manifest.json");
}

}  // namespace dbr::data
