#include "dbr/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dbr/analytics/intervals.hpp"
#include "dbr/baselines/features.hpp"
#include "dbr/baselines/hmm.hpp"
#include "dbr/baselines/svm.hpp"
#include "dbr/dataset/manifest.hpp"
#include "dbr/dataset/synth.hpp"
#include "dbr/encoder/encoder.hpp"
#include "dbr/errors.hpp"
#include "dbr/nncore/serialize.hpp"
#include "dbr/seed.hpp"
#include "dbr/temporal/decoder.hpp"

namespace dbr::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

namespace {

constexpr double kMonotoneTolerance = 1e-8;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void write_json(const fs::path& path, const ordered_json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("missing " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("cannot parse " + path.string() + ": " + e.what());
    }
}

bool is_decoder_method(const std::string& method) { return method == "crnn" || method == "hf-lstm"; }

std::vector<double> window_timestamps(const data::SequenceSample& seq, const data::FrameWindow& w) {
    return {seq.timestamps.begin() + static_cast<std::ptrdiff_t>(w.start),
            seq.timestamps.begin() + static_cast<std::ptrdiff_t>(w.end)};
}

temporal::FeatureSequence hf_sequence(const data::SequenceSample& seq, const data::FrameWindow& w) {
    return {baselines::hf_feature_sequence(seq, w), window_timestamps(seq, w)};
}

temporal::FeatureSequence crnn_sequence(const data::SequenceSample& seq, const data::FrameWindow& w,
                                        const temporal::FeatureCache& cache, const temporal::FusionSpec& fusion) {
    if (cache.window_start(seq.id) != w.start || cache.find(seq.id).dim(0) != w.length()) {
        throw StaleArtifactError("feature cache window for " + seq.id + " differs from the configured window");
    }
    const auto hf = baselines::hf_feature_sequence(seq, w);
    nn::Tensor inside({w.length(), data::kInsideWidth});
    nn::Tensor outside({w.length(), data::kOutsideWidth});
    for (std::size_t t = 0; t < w.length(); ++t) {
        const double* row = hf.data() + t * baselines::kHandFeatureWidth;
        std::copy(row, row + data::kInsideWidth, inside.data() + t * data::kInsideWidth);
        std::copy(row + data::kInsideWidth, row + baselines::kHandFeatureWidth,
                  outside.data() + t * data::kOutsideWidth);
    }
    return temporal::fuse_features({{"encoder", cache.find(seq.id)}, {"inside", inside}, {"outside", outside}},
                                   fusion, window_timestamps(seq, w));
}

std::vector<double> statistics_vector(const data::SequenceSample& seq, const data::FrameWindow& w) {
    const auto stats = baselines::expand_statistics(baselines::hf_feature_sequence(seq, w));
    return {stats.data(), stats.data() + stats.size()};
}

ordered_json with_seconds(double value) { return std::round(value * 1000.0) / 1000.0; }

}  // namespace

std::vector<std::string> task_class_names(const std::string& task) {
    if (task == "intention") {
        std::vector<std::string> names;
        for (std::size_t c = 0; c < data::kIntentionCount; ++c) {
            names.emplace_back(data::to_string(static_cast<data::Intention>(c)));
        }
        return names;
    }
    if (task == "emotion") return {"neutral", "emotional"};
    throw ConfigError("unknown task '" + task + "'");
}

int task_label(const data::SequenceSample& sequence, const std::string& task) {
    if (task == "intention") return static_cast<int>(sequence.intention);
    if (task == "emotion") return static_cast<int>(sequence.emotion);
    throw ConfigError("unknown task '" + task + "'");
}

Pipeline::Pipeline(ExperimentConfig config, std::ostream& log) : config_(std::move(config)), log_(log) {
    config_.finalize();
}

fs::path Pipeline::run_dir(int run) const { return root() / "runs" / ("run" + std::to_string(run)); }

fs::path Pipeline::model_dir(int run, const std::string& task, const std::string& method) const {
    return run_dir(run) / task / method;
}

void Pipeline::info(const std::string& message) const { log_ << "[dbr] " << message << '\n' << std::flush; }

void Pipeline::write_config() const { write_json(root() / "run_config.json", to_json(config_)); }

void Pipeline::record_timing(const std::string& stage, double seconds) {
    const auto path = root() / "timings.json";
    ordered_json j = ordered_json::object();
    if (fs::exists(path)) {
        try {
            j = read_json(path);
        } catch (const ValidationError&) {
            j = ordered_json::object();
        }
    }
    j[stage] = with_seconds(seconds);
    write_json(path, j);
}

bool Pipeline::uses_encoder(const std::vector<std::string>& methods) const {
    return std::find(methods.begin(), methods.end(), "crnn") != methods.end();
}

const data::Dataset& Pipeline::dataset() {
    if (!dataset_) {
        fs::path manifest = root() / "dataset" / "manifest.json";
        if (config_.dataset) {
            manifest = fs::is_directory(*config_.dataset) ? *config_.dataset / "manifest.json" : *config_.dataset;
        }
        dataset_ = data::load_manifest(manifest);
        manifest_sha_ = nn::sha256_file(manifest);
        if (dataset_->image_side != config_.encoder.model.input_side) {
            throw ConfigError("dataset frames are " + std::to_string(dataset_->image_side) +
                              " px but the encoder expects " + std::to_string(config_.encoder.model.input_side));
        }
    }
    return *dataset_;
}

void Pipeline::synth() {
    const auto start = clock_type::now();
    if (config_.dataset) {
        info("using dataset " + config_.dataset->string());
        info("loaded " + std::to_string(dataset().sequences.size()) + " sequences");
        return;
    }
    const auto dir = root() / "dataset";
    const auto manifest = dir / "manifest.json";
    bool reuse = false;
    if (fs::exists(manifest)) {
        try {
            const auto j = read_json(manifest);
            reuse = j.contains("synth") && j.at("synth") == ordered_json(data::to_json(config_.synth));
        } catch (const ValidationError&) {
            reuse = false;
        }
    }
    if (reuse) {
        info("synthetic dataset already matches the config");
    } else {
        info("generating synthetic dataset in " + dir.string());
        fs::remove_all(dir);
        data::generate_synthetic(config_.synth, dir);
        record_timing("synth", seconds_since(start));
    }
    dataset_.reset();
    windows_.reset();
    info("dataset has " + std::to_string(dataset().sequences.size()) + " sequences");
}

const data::WindowReport& Pipeline::windows() {
    if (!windows_) {
        windows_ = data::extract_windows(dataset(), config_.window_s, config_.anticipation_s,
                                         config_.seeds().windows());
        for (const auto& id : windows_->skipped) info("skipping " + id + ": shorter than the window");
        if (windows_->usable.size() < 2) throw ValidationError("fewer than two sequences fit the window");
    }
    return *windows_;
}

data::Split Pipeline::split(int run) {
    const auto& usable = windows().usable;
    const auto local = data::split_train_test(usable.size(), config_.train_fraction, config_.seeds().split(run));
    data::Split out;
    for (auto i : local.train) out.train.push_back(usable[i]);
    for (auto i : local.test) out.test.push_back(usable[i]);
    if (out.train.empty() || out.test.empty()) throw ValidationError("split leaves an empty partition");

    ordered_json j{{"seed", config_.seeds().split(run)}, {"train", json::array()}, {"test", json::array()}};
    for (auto i : out.train) j["train"].push_back(dataset().sequences[i].id);
    for (auto i : out.test) j["test"].push_back(dataset().sequences[i].id);
    write_json(run_dir(run) / "split.json", j);
    return out;
}

void Pipeline::train_encoder() {
    dataset();
    for (int k = 0; k < config_.runs; ++k) train_encoder_run(k);
}

void Pipeline::train_encoder_run(int run) {
    const auto& ds = dataset();
    const auto sp = split(run);
    const auto& stage = config_.encoder;
    const auto start = clock_type::now();

    enc::FrameSet train;
    train.side = stage.model.input_side;
    for (auto i : sp.train) {
        const auto& seq = ds.sequences[i];
        for (std::size_t f = 0; f < seq.frame_count(); f += static_cast<std::size_t>(stage.frame_stride)) {
            train.add(data::read_pgm(seq.frames[f]), seq.frame_labels[f]);
        }
    }
    const auto seed = config_.seeds().encoder(run);
    enc::EncoderModel model(stage.model, seed);
    const enc::EncoderTrainOptions options{stage.epochs, stage.batch_size, stage.base_rate, derive_seed(seed, 1)};
    info("run " + std::to_string(run) + ": training encoder on " + std::to_string(train.size()) + " frames");
    const auto epochs = enc::train_encoder(model, train, options, [&](const enc::EncoderEpoch& e) {
        info("  encoder epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss) + " accuracy " +
             std::to_string(e.accuracy));
    });
    nn::save_checkpoint(model.to_checkpoint(), run_dir(run) / "encoder.ckpt");
    record_timing("run" + std::to_string(run) + "/train_encoder", seconds_since(start));

    const auto eval_start = clock_type::now();
    enc::FrameSet held_out;
    held_out.side = stage.model.input_side;
    for (auto i : sp.test) {
        const auto& seq = ds.sequences[i];
        for (std::size_t f = 0; f < seq.frame_count(); f += static_cast<std::size_t>(stage.eval_stride)) {
            held_out.add(data::read_pgm(seq.frames[f]), seq.frame_labels[f]);
        }
    }
    const auto predicted = enc::predict_frames(model, held_out);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == held_out.labels[i];
    const double accuracy = held_out.size() ? static_cast<double>(correct) / static_cast<double>(held_out.size()) : 0.0;
    record_timing("run" + std::to_string(run) + "/encoder_heldout", seconds_since(eval_start));
    info("run " + std::to_string(run) + ": held-out frame accuracy " + std::to_string(accuracy));

    ordered_json log{{"run", run},
                     {"seed", seed},
                     {"train_frames", train.size()},
                     {"epochs", json::array()},
                     {"heldout_frames", held_out.size()},
                     {"heldout_correct", correct},
                     {"heldout_accuracy", accuracy}};
    for (const auto& e : epochs) log["epochs"].push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
    write_json(run_dir(run) / "encoder_log.json", log);
}

namespace {

std::string cache_settings(const ExperimentConfig& c) {
    return ordered_json{{"window_s", c.window_s},
                        {"anticipation_s", c.anticipation_s},
                        {"window_seed", c.seeds().windows()}}
        .dump();
}

}  // namespace

void Pipeline::extract() {
    dataset();
    for (int k = 0; k < config_.runs; ++k) extract_run(k);
}

void Pipeline::extract_run(int run) {
    const auto& ds = dataset();
    const auto encoder_path = run_dir(run) / "encoder.ckpt";
    const auto encoder_sha = nn::sha256_file(encoder_path);
    const auto cache_path = run_dir(run) / "features.bin";
    const auto settings = cache_settings(config_);
    if (fs::exists(cache_path)) {
        try {
            if (temporal::load_feature_cache(cache_path, manifest_sha_, encoder_sha).settings_json == settings) {
                info("run " + std::to_string(run) + ": feature cache is current");
                return;
            }
        } catch (const ValidationError& e) {
            info("run " + std::to_string(run) + ": rebuilding feature cache (" + e.what() + ")");
        }
    }
    const auto start = clock_type::now();
    const auto model = enc::EncoderModel::from_checkpoint(nn::load_checkpoint(encoder_path));
    const auto width = static_cast<std::size_t>(model.config().feature_width);
    const auto& report = windows();

    temporal::FeatureCache cache;
    cache.manifest_sha256 = manifest_sha_;
    cache.encoder_sha256 = encoder_sha;
    cache.settings_json = settings;
    info("run " + std::to_string(run) + ": extracting encoder features for " + std::to_string(report.usable.size()) +
         " sequences");
    for (auto i : report.usable) {
        const auto& seq = ds.sequences[i];
        const auto& w = report.windows[i];
        nn::Tensor rows({w.length(), width});
        for (std::size_t f = w.start; f < w.end; ++f) {
            const auto feature = enc::extract_features(model, data::read_pgm(seq.frames[f]));
            std::copy(feature.data(), feature.data() + width, rows.data() + (f - w.start) * width);
        }
        cache.ids.push_back(seq.id);
        cache.window_starts.push_back(w.start);
        cache.features.push_back(std::move(rows));
    }
    temporal::save_feature_cache(cache, cache_path);
    record_timing("run" + std::to_string(run) + "/extract", seconds_since(start));
}

temporal::FeatureCache Pipeline::load_cache(int run) {
    dataset();
    const auto encoder_sha = nn::sha256_file(run_dir(run) / "encoder.ckpt");
    auto cache = temporal::load_feature_cache(run_dir(run) / "features.bin", manifest_sha_, encoder_sha);
    if (cache.settings_json != cache_settings(config_)) {
        throw StaleArtifactError("feature cache of run " + std::to_string(run) + " was built with other window settings");
    }
    return cache;
}

void Pipeline::train_decoder(const std::vector<std::string>& tasks, const std::vector<std::string>& methods) {
    dataset();
    for (int k = 0; k < config_.runs; ++k) {
        for (const auto& task : tasks) {
            for (const auto& method : methods) train_model(k, task, method);
        }
    }
}

void Pipeline::train_model(int run, const std::string& task, const std::string& method) {
    const auto& ds = dataset();
    const auto& report = windows();
    const auto sp = split(run);
    const auto names = task_class_names(task);
    const auto dir = model_dir(run, task, method);
    const auto seeds = config_.seeds();
    const auto start = clock_type::now();

    std::vector<int> labels;
    for (auto i : sp.train) labels.push_back(task_label(ds.sequences[i], task));

    ordered_json log{{"run", run}, {"task", task}, {"method", method}, {"train_sequences", sp.train.size()}};
    ordered_json inputs{{"manifest_sha256", manifest_sha_}};
    std::vector<int> train_predictions;
    nn::Checkpoint checkpoint;

    info("run " + std::to_string(run) + ": training " + method + " for " + task);
    if (is_decoder_method(method)) {
        std::vector<temporal::FeatureSequence> sequences;
        if (method == "crnn") {
            const auto cache = load_cache(run);
            inputs["encoder_sha256"] = cache.encoder_sha256;
            for (auto i : sp.train) {
                sequences.push_back(crnn_sequence(ds.sequences[i], report.windows[i], cache, config_.fusion));
            }
        } else {
            for (auto i : sp.train) sequences.push_back(hf_sequence(ds.sequences[i], report.windows[i]));
        }
        const auto& d = config_.decoder;
        const temporal::DecoderConfig dc{sequences.front().width(), d.hidden, d.layers, names.size(), d.mean_pool};
        const auto seed = seeds.decoder(run, method, task);
        temporal::BiLstmDecoder decoder(dc, seed);
        const temporal::DecoderTrainOptions options{d.epochs,           d.batch_size,     d.schedule, derive_seed(seed, 1),
                                                    d.early_stop_loss, d.standardize_inputs};
        const auto result = temporal::train_decoder(decoder, sequences, labels, options, [&](const temporal::DecoderEpoch& e) {
            if (e.epoch % 10 == 0) {
                info("  epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.loss) + " accuracy " +
                     std::to_string(e.accuracy));
            }
        });
        checkpoint = decoder.to_checkpoint(method);
        train_predictions = result.train_predictions;
        log["seed"] = seed;
        log["epochs_run"] = result.log.size();
        log["epochs"] = json::array();
        for (const auto& e : result.log) {
            log["epochs"].push_back({{"epoch", e.epoch}, {"rate", e.rate}, {"loss", e.loss}, {"accuracy", e.accuracy}});
        }
    } else if (method == "svm") {
        std::vector<std::vector<double>> vectors;
        for (auto i : sp.train) vectors.push_back(statistics_vector(ds.sequences[i], report.windows[i]));
        baselines::SvmOptions options = config_.svm;
        options.seed = derive_seed(seeds.svm(run), hash_string(task));
        const auto model = baselines::svm_train(vectors, labels, names.size(), options,
                                                [&](const std::string& w) { info("  " + w); });
        for (const auto& v : vectors) train_predictions.push_back(baselines::svm_predict(model, v));
        checkpoint = baselines::to_checkpoint(model, method);
        log["seed"] = options.seed;
        log["kept_dimensions"] = model.standardizer.output_width();
    } else if (method == "hmm") {
        std::vector<baselines::HmmModel> models;
        log["classes"] = json::array();
        bool monotone = true;
        for (std::size_t c = 0; c < names.size(); ++c) {
            std::vector<nn::Tensor> sequences;
            for (std::size_t n = 0; n < sp.train.size(); ++n) {
                if (labels[n] == static_cast<int>(c)) {
                    const auto i = sp.train[n];
                    sequences.push_back(baselines::hf_feature_sequence(ds.sequences[i], report.windows[i]));
                }
            }
            if (sequences.empty()) throw ValidationError("no training sequences of class " + names[c] + " in run " +
                                                         std::to_string(run));
            baselines::HmmFitOptions options = config_.hmm;
            options.seed = derive_seed(derive_seed(seeds.hmm(run), hash_string(task)), c);
            auto fit = baselines::hmm_fit(sequences, options);
            bool class_monotone = true;
            for (std::size_t t = 1; t < fit.log_likelihood.size(); ++t) {
                class_monotone &= fit.log_likelihood[t] >= fit.log_likelihood[t - 1] - kMonotoneTolerance;
            }
            monotone &= class_monotone;
            log["classes"].push_back({{"class", names[c]},
                                      {"seed", options.seed},
                                      {"sequences", sequences.size()},
                                      {"log_likelihood", fit.log_likelihood},
                                      {"monotone", class_monotone}});
            models.push_back(std::move(fit.model));
        }
        if (!monotone) throw ValidationError("Baum-Welch log-likelihood decreased in run " + std::to_string(run));
        for (auto i : sp.train) {
            train_predictions.push_back(
                baselines::hmm_classify(models, baselines::hf_feature_sequence(ds.sequences[i], report.windows[i])));
        }
        checkpoint = baselines::to_checkpoint(models, method);
        log["em_monotone"] = monotone;
    } else {
        throw ConfigError("unknown method '" + method + "'");
    }

    std::size_t correct = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) correct += train_predictions[n] == labels[n];
    log["train_accuracy"] = static_cast<double>(correct) / static_cast<double>(labels.size());
    log["inputs"] = inputs;
    nn::save_checkpoint(checkpoint, dir / "model.ckpt");
    write_json(dir / "train_log.json", log);
    record_timing("run" + std::to_string(run) + "/" + task + "/" + method + "/train", seconds_since(start));
}

analytics::MetricsReport Pipeline::evaluate_model(int run, const std::string& task, const std::string& method) {
    const auto& ds = dataset();
    const auto& report = windows();
    const auto sp = split(run);
    const auto names = task_class_names(task);
    const auto dir = model_dir(run, task, method);

    const auto checkpoint = nn::load_checkpoint(dir / "model.ckpt");
    if (checkpoint.method != method) {
        throw ValidationError(dir.string() + "/model.ckpt holds a '" + checkpoint.method + "' model");
    }
    const auto train_log = read_json(dir / "train_log.json");
    const auto& inputs = train_log.at("inputs");
    if (inputs.at("manifest_sha256") != manifest_sha_) {
        throw StaleArtifactError(dir.string() + " was trained on a different dataset");
    }

    std::vector<int> predictions;
    if (is_decoder_method(method)) {
        const auto decoder = temporal::BiLstmDecoder::from_checkpoint(checkpoint);
        if (method == "crnn") {
            const auto cache = load_cache(run);
            if (inputs.at("encoder_sha256") != cache.encoder_sha256) {
                throw StaleArtifactError(dir.string() + " was trained on features of a different encoder");
            }
            for (auto i : sp.test) {
                predictions.push_back(temporal::predicted_class(
                    decoder.predict(crnn_sequence(ds.sequences[i], report.windows[i], cache, config_.fusion))));
            }
        } else {
            for (auto i : sp.test) {
                predictions.push_back(
                    temporal::predicted_class(decoder.predict(hf_sequence(ds.sequences[i], report.windows[i]))));
            }
        }
    } else if (method == "svm") {
        const auto model = baselines::svm_from_checkpoint(checkpoint);
        for (auto i : sp.test) {
            predictions.push_back(baselines::svm_predict(model, statistics_vector(ds.sequences[i], report.windows[i])));
        }
    } else if (method == "hmm") {
        const auto models = baselines::hmm_from_checkpoint(checkpoint);
        for (auto i : sp.test) {
            predictions.push_back(
                baselines::hmm_classify(models, baselines::hf_feature_sequence(ds.sequences[i], report.windows[i])));
        }
    } else {
        throw ConfigError("unknown method '" + method + "'");
    }

    std::vector<analytics::LabelPair> pairs;
    ordered_json predicted = json::array();
    for (std::size_t n = 0; n < sp.test.size(); ++n) {
        const auto& seq = ds.sequences[sp.test[n]];
        const int truth = task_label(seq, task);
        pairs.emplace_back(truth, predictions[n]);
        predicted.push_back({{"id", seq.id}, {"true", names[truth]}, {"predicted", names[predictions[n]]}});
    }
    const auto metrics = analytics::make_report(analytics::confusion_accumulate(names, pairs));
    if (!analytics::report_matches_pairs(metrics, pairs)) {
        throw ValidationError("metrics of run " + std::to_string(run) + " " + task + "/" + method +
                              " disagree with the pair-list recount");
    }
    write_json(dir / "metrics.json", {{"run", run},
                                      {"task", task},
                                      {"method", method},
                                      {"test_sequences", pairs.size()},
                                      {"pair_recount_agrees", true},
                                      {"report", analytics::to_json(metrics)},
                                      {"predictions", predicted}});
    analytics::write_confusion_csv(metrics.confusion, dir / "confusion.csv");
    info("run " + std::to_string(run) + ": " + task + "/" + method + " general average " +
         std::to_string(metrics.general_average));
    return metrics;
}

void Pipeline::evaluate(const std::vector<std::string>& tasks, const std::vector<std::string>& methods) {
    dataset();
    const auto start = clock_type::now();
    for (const auto& task : tasks) {
        for (const auto& method : methods) {
            std::vector<analytics::MetricsReport> reports;
            for (int k = 0; k < config_.runs; ++k) reports.push_back(evaluate_model(k, task, method));
            const auto dir = root() / "results" / task / method;
            if (reports.size() == 1) {
                // A spread needs two runs; a single run is reported as is.
                const auto& only = reports.front();
                write_json(dir / "metrics.json", {{"runs", 1},
                                                  {"general_average", {{"mean", only.general_average}, {"std", nullptr}}},
                                                  {"pooled", analytics::to_json(only)}});
                analytics::write_confusion_csv(only.confusion, dir / "confusion.csv");
                info(task + "/" + method + ": general average " + std::to_string(only.general_average) + " (1 run)");
                continue;
            }
            const auto aggregate = analytics::run_aggregate(reports);
            write_json(dir / "metrics.json", analytics::to_json(aggregate));
            analytics::write_confusion_csv(aggregate.pooled.confusion, dir / "confusion.csv");
            info(task + "/" + method + ": general average " + std::to_string(aggregate.general_average.mean) +
                 " +- " + std::to_string(aggregate.general_average.std) + " over " + std::to_string(config_.runs) +
                 " runs");
        }
    }
    record_timing("eval", seconds_since(start));
    write_summary();
}

void Pipeline::write_summary() {
    ordered_json j{{"runs", config_.runs}};
    ordered_json encoder = json::array();
    for (int k = 0; k < config_.runs; ++k) {
        const auto path = run_dir(k) / "encoder_log.json";
        if (fs::exists(path)) encoder.push_back(read_json(path).at("heldout_accuracy"));
    }
    if (!encoder.empty()) j["encoder_heldout_accuracy"] = encoder;
    ordered_json results = ordered_json::object();
    for (const auto& task : config_.tasks) {
        for (const auto& method : config_.methods) {
            const auto path = root() / "results" / task / method / "metrics.json";
            if (fs::exists(path)) results[task][method] = read_json(path);
        }
    }
    j["results"] = results;
    write_json(root() / "metrics.json", j);
}

void Pipeline::analyze() {
    const auto& ds = dataset();
    const auto intervals = analytics::interval_analysis(ds.sequences);
    const auto proportions = analytics::emotion_proportions(ds.sequences);
    write_json(root() / "analysis.json",
               {{"intervals", analytics::to_json(intervals)}, {"proportions", analytics::to_json(proportions)}});
    if (intervals.initial) {
        info("initial interval mean " + std::to_string(intervals.initial->mean) + " s over " +
             std::to_string(intervals.sequences.size()) + " sequences");
    } else {
        info("no emotional lane-change sequences with both span kinds");
    }
}

void Pipeline::run() {
    const auto start = clock_type::now();
    write_config();
    synth();
    if (uses_encoder(config_.methods)) {
        train_encoder();
        extract();
    }
    train_decoder(config_.tasks, config_.methods);
    evaluate(config_.tasks, config_.methods);
    analyze();
    record_timing("total", seconds_since(start));
}

}  // namespace dbr::cli
