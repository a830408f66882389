#include "dbr/cli/app.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iomanip>
#include <optional>

#include "dbr/cli/checks.hpp"
#include "dbr/cli/config.hpp"
#include "dbr/cli/pipeline.hpp"
#include "dbr/errors.hpp"

namespace dbr::cli {

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    std::vector<std::string> tasks;
    std::vector<std::string> methods;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "Experiment config (JSON); defaults apply when omitted");
    cmd->add_option("--seed", o.seed, "Override the master seed");
    cmd->add_option("--output-dir", o.output_dir, "Override the output directory");
}

void add_selection(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--task", o.tasks, "intention or emotion (repeatable; default: all configured)");
    cmd->add_option("--method", o.methods, "crnn, svm, hmm or hf-lstm (repeatable; default: all configured)");
}

ExperimentConfig resolve(const CommonOptions& o) {
    ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    c.finalize();
    return c;
}

std::vector<std::string> pick(const std::vector<std::string>& requested, const std::vector<std::string>& configured,
                              const std::vector<std::string>& known, const char* what) {
    for (const auto& r : requested) {
        if (std::find(known.begin(), known.end(), r) == known.end()) {
            throw ConfigError(std::string("unknown ") + what + " '" + r + "'");
        }
    }
    return requested.empty() ? configured : requested;
}

int gradcheck(std::size_t instances, std::ostream& out) {
    const auto checks = run_gradient_suite(instances);
    bool ok = true;
    for (const auto& c : checks) {
        out << std::left << std::setw(12) << c.op << ' ' << (c.ok() ? "ok  " : "FAIL") << "  " << c.passed << '/'
            << c.instances << " instances, " << c.entries << " entries, max rel error " << std::scientific
            << std::setprecision(2) << c.max_error << std::defaultfloat << '\n';
        ok &= c.ok();
    }
    out << (ok ? "gradient suite passed\n" : "gradient suite FAILED\n");
    return ok ? kExitOk : kExitValidation;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Driver behavior recognition pipeline"};
    app.require_subcommand(1);
    CommonOptions o;
    std::size_t instances = 20;

    auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
    auto* train_enc = app.add_subcommand("train-encoder", "Train the frame encoder of every run");
    auto* extract = app.add_subcommand("extract", "Cache encoder features of every run");
    auto* train_dec = app.add_subcommand("train-decoder", "Train decoders and baselines");
    auto* eval = app.add_subcommand("eval", "Evaluate trained models and aggregate over runs");
    auto* analyze = app.add_subcommand("analyze", "Interval and proportion analytics");
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    auto* run = app.add_subcommand("run", "All stages in order");
    for (auto* cmd : {synth, train_enc, extract, train_dec, eval, analyze, grad, run}) add_common(cmd, o);
    add_selection(train_dec, o);
    add_selection(eval, o);
    grad->add_option("--instances", instances, "Random instances per op")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (grad->parsed()) return gradcheck(instances, out);

        Pipeline pipeline(resolve(o), err);
        pipeline.write_config();
        const auto& cfg = pipeline.config();
        if (synth->parsed()) pipeline.synth();
        if (train_enc->parsed()) pipeline.train_encoder();
        if (extract->parsed()) pipeline.extract();
        if (train_dec->parsed()) {
            pipeline.train_decoder(pick(o.tasks, cfg.tasks, kTasks, "task"),
                                   pick(o.methods, cfg.methods, kMethods, "method"));
        }
        if (eval->parsed()) {
            pipeline.evaluate(pick(o.tasks, cfg.tasks, kTasks, "task"), pick(o.methods, cfg.methods, kMethods, "method"));
        }
        if (analyze->parsed()) pipeline.analyze();
        if (run->parsed()) pipeline.run();
        out << "outputs in " << cfg.output_dir.string() << '\n';
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const MissingArtifactError& e) {
        err << "missing artifact: " << e.what() << '\n';
        return kExitMissingArtifact;
    } catch (const ValidationError& e) {
        err << "validation failure: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace dbr::cli
