#include "dbr/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dbr/errors.hpp"
#include "dbr/seed.hpp"

namespace dbr::cli {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t StageSeeds::decoder(int run, const std::string& method, const std::string& task) const {
    return derive_seed(master + 300 + static_cast<std::uint64_t>(run), hash_string(method + "/" + task));
}

namespace {

void allow_keys(const json& j, const std::string& section, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(section + " must be a JSON object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.contains(k)) throw ConfigError("unknown key '" + k + "' in " + section);
    }
}

template <class T>
void read(const json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

void check_names(const std::vector<std::string>& names, const std::vector<std::string>& allowed, const char* what) {
    if (names.empty()) throw ConfigError(std::string(what) + " list is empty");
    for (const auto& n : names) {
        if (std::find(allowed.begin(), allowed.end(), n) == allowed.end()) {
            throw ConfigError(std::string("unknown ") + what + " '" + n + "'");
        }
    }
}

}  // namespace

void ExperimentConfig::finalize() {
    synth.seed = seeds().synth();
    synth.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (!(window_s > 0.0) || anticipation_s < 0.0) throw ConfigError("window length must be > 0, anticipation >= 0");
    encoder.model.validate();
    if (encoder.epochs < 1 || encoder.batch_size < 1 || !(encoder.base_rate > 0.0) || encoder.frame_stride < 1 ||
        encoder.eval_stride < 1) {
        throw ConfigError("encoder training settings must be positive");
    }
    if (decoder.hidden < 1 || decoder.layers < 1 || decoder.epochs < 1 || decoder.batch_size < 1) {
        throw ConfigError("decoder settings must be positive");
    }
    decoder.schedule.validate();
    if (fusion.width() == 0) throw ConfigError("fusion spec enables no features");
    for (const auto& src : fusion.sources) {
        if (src.name == "encoder" && src.enabled && src.width != static_cast<std::size_t>(encoder.model.feature_width)) {
            throw ConfigError("fusion encoder width differs from encoder.model.feature_width");
        }
    }
    check_names(tasks, kTasks, "task");
    check_names(methods, kMethods, "method");
    if (hmm.states < 1 || hmm.iterations < 0) throw ConfigError("hmm states must be >= 1");
    if (svm.epochs < 1 || !(svm.rate > 0.0) || !(svm.regularization > 0.0)) throw ConfigError("svm settings must be positive");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        allow_keys(j, "config", {"seed", "output_dir", "dataset", "synth", "train_fraction", "runs", "window_s",
                                 "anticipation_s", "encoder", "decoder", "fusion", "tasks", "methods", "svm", "hmm",
                                 "derived_seeds"});
        read(j, "seed", c.seed);
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("dataset") && !j.at("dataset").is_null()) c.dataset = j.at("dataset").get<std::string>();
        if (j.contains("synth")) c.synth = data::synth_config_from_json(j.at("synth"));
        read(j, "train_fraction", c.train_fraction);
        read(j, "runs", c.runs);
        read(j, "window_s", c.window_s);
        read(j, "anticipation_s", c.anticipation_s);
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            allow_keys(e, "encoder", {"model", "epochs", "batch_size", "base_rate", "frame_stride", "eval_stride"});
            if (e.contains("model")) c.encoder.model = enc::encoder_config_from_json(e.at("model"));
            read(e, "epochs", c.encoder.epochs);
            read(e, "batch_size", c.encoder.batch_size);
            read(e, "base_rate", c.encoder.base_rate);
            read(e, "frame_stride", c.encoder.frame_stride);
            read(e, "eval_stride", c.encoder.eval_stride);
        }
        if (j.contains("decoder")) {
            const auto& d = j.at("decoder");
            allow_keys(d, "decoder", {"hidden", "layers", "mean_pool", "epochs", "batch_size", "schedule",
                                      "early_stop_loss", "standardize_inputs"});
            read(d, "hidden", c.decoder.hidden);
            read(d, "layers", c.decoder.layers);
            read(d, "mean_pool", c.decoder.mean_pool);
            read(d, "epochs", c.decoder.epochs);
            read(d, "batch_size", c.decoder.batch_size);
            read(d, "early_stop_loss", c.decoder.early_stop_loss);
            read(d, "standardize_inputs", c.decoder.standardize_inputs);
            if (d.contains("schedule")) {
                const auto& s = d.at("schedule");
                allow_keys(s, "decoder.schedule", {"initial_rate", "decay_factor", "decay_period"});
                read(s, "initial_rate", c.decoder.schedule.initial_rate);
                read(s, "decay_factor", c.decoder.schedule.decay_factor);
                read(s, "decay_period", c.decoder.schedule.decay_period);
            }
        }
        if (j.contains("fusion")) c.fusion = temporal::fusion_spec_from_json(j.at("fusion"));
        read(j, "tasks", c.tasks);
        read(j, "methods", c.methods);
        if (j.contains("svm")) {
            const auto& s = j.at("svm");
            allow_keys(s, "svm", {"epochs", "rate", "regularization"});
            read(s, "epochs", c.svm.epochs);
            read(s, "rate", c.svm.rate);
            read(s, "regularization", c.svm.regularization);
        }
        if (j.contains("hmm")) {
            const auto& h = j.at("hmm");
            allow_keys(h, "hmm", {"states", "iterations", "tolerance", "variance_floor", "kmeans_iterations"});
            read(h, "states", c.hmm.states);
            read(h, "iterations", c.hmm.iterations);
            read(h, "tolerance", c.hmm.tolerance);
            read(h, "variance_floor", c.hmm.variance_floor);
            read(h, "kmeans_iterations", c.hmm.kmeans_iterations);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.finalize();
    return c;
}

ordered_json to_json(const ExperimentConfig& c) {
    const auto s = c.seeds();
    ordered_json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    j["dataset"] = c.dataset ? ordered_json(c.dataset->string()) : ordered_json(nullptr);
    j["synth"] = data::to_json(c.synth);
    j["train_fraction"] = c.train_fraction;
    j["runs"] = c.runs;
    j["window_s"] = c.window_s;
    j["anticipation_s"] = c.anticipation_s;
    j["encoder"] = {{"model", enc::to_json(c.encoder.model)},
                    {"epochs", c.encoder.epochs},
                    {"batch_size", c.encoder.batch_size},
                    {"base_rate", c.encoder.base_rate},
                    {"frame_stride", c.encoder.frame_stride},
                    {"eval_stride", c.encoder.eval_stride}};
    j["decoder"] = {{"hidden", c.decoder.hidden},
                    {"layers", c.decoder.layers},
                    {"mean_pool", c.decoder.mean_pool},
                    {"epochs", c.decoder.epochs},
                    {"batch_size", c.decoder.batch_size},
                    {"schedule",
                     {{"initial_rate", c.decoder.schedule.initial_rate},
                      {"decay_factor", c.decoder.schedule.decay_factor},
                      {"decay_period", c.decoder.schedule.decay_period}}},
                    {"early_stop_loss", c.decoder.early_stop_loss},
                    {"standardize_inputs", c.decoder.standardize_inputs}};
    j["fusion"] = temporal::to_json(c.fusion);
    j["tasks"] = c.tasks;
    j["methods"] = c.methods;
    j["svm"] = {{"epochs", c.svm.epochs}, {"rate", c.svm.rate}, {"regularization", c.svm.regularization}};
    j["hmm"] = {{"states", c.hmm.states},
                {"iterations", c.hmm.iterations},
                {"tolerance", c.hmm.tolerance},
                {"variance_floor", c.hmm.variance_floor},
                {"kmeans_iterations", c.hmm.kmeans_iterations}};
    // Informational echo; ignored when the file is read back.
    auto per_run = ordered_json::array();
    for (int k = 0; k < c.runs; ++k) {
        per_run.push_back({{"split", s.split(k)}, {"encoder", s.encoder(k)}, {"svm", s.svm(k)}, {"hmm", s.hmm(k)}});
    }
    j["derived_seeds"] = {{"synth", s.synth()}, {"windows", s.windows()}, {"runs", per_run}};
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace dbr::cli
