#include "skelrefine/commands.hpp"

#include "skelrefine/checkpoint.hpp"
#include "skelrefine/config.hpp"
#include "skelrefine/errors.hpp"
#include "skelrefine/metrics.hpp"
#include "skelrefine/sequence_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace skelrefine::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string variant;
    std::string out;
    std::string which;
    std::string input;
    std::string pred;
    std::string truth;
    bool csv = false;
};

PipelineConfig load(const Options& o) {
    auto cfg = load_config(o.config);
    if (o.seed) cfg.apply_seed(*o.seed);
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    os << text;
}

void save_loss_csv(const fs::path& path, const std::vector<drnn::LossRecord>& history) {
    std::ostringstream os;
    drnn::write_loss_csv(os, history);
    write_text(path, os.str());
}

void log_training(std::ostream& err, const char* stage, const drnn::TrainResult& r) {
    const auto& best = r.history[static_cast<std::size_t>(r.best_iteration)];
    err << stage << ": " << r.history.size() - 1 << " iterations (" << optim::status_name(r.status)
        << "), selected iteration " << r.best_iteration << ", train mse " << best.train_mse << ", validation mse "
        << best.validation_mse << '\n';
}

drnn::DrnnModel require_checkpoint(const fs::path& dir, const char* stage, const char* name) {
    const auto path = dir / (std::string(name) + ".json");
    if (!fs::exists(path)) throw DependencyError(stage, name);
    return drnn::load_checkpoint(path);
}

void cmd_synth(const Options& o, std::ostream& err) {
    auto cfg = load(o);
    const fs::path dir = o.out.empty() ? cfg.corpus_dir : fs::path(o.out);
    const auto corpus = synth::build_corpus(cfg.corpus);
    synth::write_corpus(dir, corpus, cfg.corpus);
    err << "wrote " << corpus.train.size() + corpus.validation.size() + corpus.test.size() << " sequence pairs to "
        << dir.string() << '\n';
}

void cmd_train(const Options& o, std::ostream& err) {
    auto cfg = load(o);
    const fs::path dir = o.out.empty() ? cfg.models_dir : fs::path(o.out);
    fs::create_directories(dir);
    const auto corpus = synth::load_corpus(cfg.corpus_dir);
    const auto& sc = cfg.stages;
    PipelineModels m;
    if (o.which == "pdrnn") {
        const auto r = train_position_network(corpus, sc);
        log_training(err, "pdrnn", r);
        drnn::save_checkpoint(dir / "pdrnn.json", {sc.pdrnn, r.params});
        save_loss_csv(dir / "pdrnn_loss.csv", r.history);
    } else if (o.which == "vdrnn") {
        m.pdrnn = require_checkpoint(dir, "vdrnn", "pdrnn");
        const auto r = train_velocity_network(corpus, m, sc);
        log_training(err, "vdrnn", r);
        m.vdrnn = drnn::DrnnModel{sc.vdrnn, r.params};
        drnn::save_checkpoint(dir / "vdrnn.json", *m.vdrnn);
        save_loss_csv(dir / "vdrnn_loss.csv", r.history);
        // Stores, gates and covariances depend only on pdrnn and vdrnn.
        fit_fusion_models(corpus, m, sc.fusion);
        m.pdrnn.reset();
        m.vdrnn.reset();
        save_models(dir, m);
    } else {
        m.pdrnn = require_checkpoint(dir, "vdrnn_plus", "pdrnn");
        m.vdrnn = require_checkpoint(dir, "vdrnn_plus", "vdrnn");
        if (!fs::exists(dir / "kalman.json")) throw DependencyError("vdrnn_plus", "kalman");
        m.kalman = load_covariances(dir / "kalman.json");
        const auto r = train_velocity_plus_network(corpus, m, sc);
        log_training(err, "vdrnn_plus", r);
        PipelineModels out;
        out.vdrnn_plus = drnn::DrnnModel{sc.vdrnn_plus, r.params};
        m.vdrnn_plus = out.vdrnn_plus;
        save_loss_csv(dir / "vdrnn_plus_loss.csv", r.history);
        fit_fusion_plus_models(corpus, m, sc.fusion);
        out.store_plus = m.store_plus;
        out.gate_plus = m.gate_plus;
        save_models(dir, out);
    }
}

void cmd_refine(const Options& o) {
    auto cfg = load(o);
    const Variant v = parse_variant(o.variant);
    const auto models = load_models(cfg.models_dir, cfg.stages.fusion);
    const auto refined = run_pipeline(v, load_sequence(o.input), models);
    if (o.csv)
        save_sequence_csv(o.out, refined);
    else
        save_sequence(o.out, refined);
}

std::string histogram_csv(const metrics::EvalReport& r) {
    std::ostringstream os;
    metrics::write_histogram_csv(os, r);
    return os.str();
}

void cmd_eval(const Options& o, std::ostream& out) {
    const auto r = metrics::evaluate(load_sequence(o.pred), load_sequence(o.truth));
    out << metrics::report_json(r) << '\n';
    if (!o.out.empty()) write_text(o.out, histogram_csv(r));
}

void cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
    auto cfg = load(o);
    const fs::path root = o.out.empty() ? cfg.output_dir : fs::path(o.out);
    const auto corpus = synth::build_corpus(cfg.corpus);
    synth::write_corpus(root / "corpus", corpus, cfg.corpus);
    err << "corpus: " << corpus.train.size() << '/' << corpus.validation.size() << '/' << corpus.test.size()
        << " sequences\n";

    std::vector<std::vector<drnn::LossRecord>> histories;
    const auto models = fit_all(corpus, cfg.stages, &histories);
    save_models(root / "models", models);
    const char* stages[] = {"pdrnn", "vdrnn", "vdrnn_plus"};
    for (std::size_t i = 0; i < histories.size(); ++i) {
        save_loss_csv(root / "models" / (std::string(stages[i]) + "_loss.csv"), histories[i]);
        const auto& last = histories[i].back();
        err << stages[i] << ": " << last.iteration << " iterations, train MSE " << last.train_mse
            << ", validation MSE " << last.validation_mse << '\n';
    }

    std::vector<SkeletonSequence> truths;
    for (const auto& p : corpus.test) truths.push_back(p.mocap);
    nlohmann::json summary = nlohmann::json::object();
    for (Variant v : cfg.variants) {
        const std::string name(variant_name(v));
        std::vector<SkeletonSequence> preds;
        fs::create_directories(root / "refined" / name);
        for (const auto& p : corpus.test) {
            preds.push_back(run_pipeline(v, p.kinect, models));
            save_sequence(root / "refined" / name / (p.name + ".jsonl"), preds.back());
        }
        const auto r = metrics::evaluate(preds, truths);
        write_text(root / "reports" / (name + ".json"), metrics::report_json(r) + "\n");
        write_text(root / "reports" / (name + "_histogram.csv"), histogram_csv(r));
        summary[name] = nlohmann::json::parse(metrics::report_json(r));
        err << std::left << std::setw(18) << name << " APE " << r.ape << "  AJE " << r.aje << '\n';
    }
    write_text(root / "reports" / "summary.json", summary.dump(2) + "\n");
    out << summary.dump() << '\n';
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
    if (dynamic_cast<const DataError*>(&e)) return kDataError;
    if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
    return kDataError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Skeleton refinement: synthesize corpora, train refiners, refine and evaluate sequences"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the corpus and network seeds");
    };

    auto* synth = app.add_subcommand("synth", "Generate a paired synthetic corpus");
    add_config(synth);
    synth->add_option("--out", o.out, "Corpus directory (default: corpus_dir from the config)");

    auto* train = app.add_subcommand("train", "Train one network; run pdrnn, vdrnn, vdrnn_plus in order");
    add_config(train);
    train->add_option("--which", o.which, "Network to train")
        ->required()
        ->check(CLI::IsMember({"pdrnn", "vdrnn", "vdrnn_plus"}));
    train->add_option("--out", o.out, "Models directory (default: models_dir from the config)");

    auto* refine = app.add_subcommand("refine", "Refine one sequence file with a pipeline variant");
    add_config(refine);
    refine->add_option("--variant", o.variant, "Pipeline variant")->required();
    refine->add_option("--input", o.input, "Input sequence (JSONL)")->required()->check(CLI::ExistingFile);
    refine->add_option("--out", o.out, "Output sequence path")->required();
    refine->add_flag("--csv", o.csv, "Write CSV instead of JSONL");

    auto* eval = app.add_subcommand("eval", "Compare a predicted sequence with ground truth");
    eval->add_option("--pred", o.pred, "Predicted sequence (JSONL)")->required()->check(CLI::ExistingFile);
    eval->add_option("--truth", o.truth, "Ground-truth sequence (JSONL)")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", o.out, "Histogram CSV path");

    auto* all = app.add_subcommand("run", "Synthesize, train, refine the test split with every variant and report");
    add_config(all);
    all->add_option("--out", o.out, "Output directory (default: output_dir from the config)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }
    try {
        if (synth->parsed()) cmd_synth(o, err);
        if (train->parsed()) cmd_train(o, err);
        if (refine->parsed()) cmd_refine(o);
        if (eval->parsed()) cmd_eval(o, out);
        if (all->parsed()) cmd_run(o, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kSuccess;
}

}  // namespace skelrefine::cli
