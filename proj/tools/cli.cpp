#include "cli.hpp"

#include "dan/core_stats.hpp"
#include "dan/dan_score.hpp"
#include "dan/error.hpp"
#include "dan/eval_metrics.hpp"
#include "dan/io_format.hpp"
#include "dan/report.hpp"
#include "dan/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace dan::cli {

namespace {

namespace fs = std::filesystem;

struct FitArgs {
    std::string layers;
    std::string features;
    std::string out;
    std::optional<double> ridge;
    double split = kDefaultSplitFraction;
    std::uint64_t seed = 0;
    std::string agg = "max";
    bool no_norm = false;
};

struct CalibrateArgs {
    std::string layers;
    std::string model;
    std::string features;
    std::string out;
    double frr = 0.05;
    std::int32_t target_label = 0;
};

struct ScoreArgs {
    std::string layers;
    std::string model;
    std::string features;
    std::string out;
    bool verbose = false;
};

struct EvaluateArgs {
    std::string layers;
    std::string model;
    std::string clean;
    std::string poisoned;
    std::optional<std::int32_t> target_label;
    std::string format = "text";
    bool json = false;
};

struct SynthArgs {
    SynthConfig config;
    std::string anomaly_layers = "7";
    std::string out_dir;
};

std::vector<std::size_t> parse_layer_list(const std::string& text, std::size_t n_layers) {
    std::vector<std::size_t> layers;
    if (text == "all") {
        for (std::size_t i = 1; i <= n_layers; ++i) layers.push_back(i);
        return layers;
    }
    if (text.empty() || text == "none") return layers;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t pos = 0;
        unsigned long value = 0;
        try {
            value = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size())
            throw CLI::ValidationError("layer list", "'" + item + "' is not a layer number");
        layers.push_back(value);
    }
    return layers;
}

/// Reads a bank, optionally keeping only the layers named by --layers.
FeatureBank load_bank(const std::string& path, const std::string& layers) {
    auto bank = read_danf(path);
    if (layers.empty() || layers == "all") return bank;
    const auto selected = parse_layer_list(layers, bank.n_layers);
    return bank.select_layers(selected);
}

void write_scores_csv(const DetectorModel& model, const ScoreReport& report, bool verbose, std::ostream& out) {
    out << "index,dan_score,flagged";
    if (verbose) {
        for (std::size_t i = 1; i <= model.n_layers(); ++i) out << ",m" << i;
        for (std::size_t i = 1; i <= model.n_layers(); ++i) out << ",n" << i;
    }
    out << '\n';
    for (std::size_t s = 0; s < report.size(); ++s) {
        const auto& e = report[s];
        out << s << ',' << format_real(e.dan_score) << ',';
        if (e.flagged) out << (*e.flagged ? "true" : "false");
        if (verbose) {
            for (Eigen::Index i = 0; i < e.raw_distances.size(); ++i) out << ',' << format_real(e.raw_distances(i));
            for (Eigen::Index i = 0; i < e.normalized_distances.size(); ++i)
                out << ',' << format_real(e.normalized_distances(i));
        }
        out << '\n';
    }
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
    DetectorOptions options;
    options.ridge = a.ridge ? Ridge::absolute(*a.ridge) : Ridge::relative();
    options.split_fraction = a.split;
    options.split_seed = a.seed;
    options.aggregation = *parse_aggregation(a.agg);
    options.normalization_enabled = !a.no_norm;
    const auto model = fit_detector(load_bank(a.features, a.layers), options);
    write_dans(model, a.out);
    out << render_model_summary(model);
    return kExitOk;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
    auto model = read_dans(a.model);
    const auto bank = load_bank(a.features, a.layers);
    model.require_compatible(bank);
    model = calibrate_threshold(std::move(model), bank, a.frr, a.target_label);
    write_dans(model, a.out.empty() ? a.model : a.out);
    out << "threshold=" << format_real(*model.threshold) << '\n';
    out << "target_label=" << a.target_label << '\n';
    out << "calibration_samples=" << bank.predicted_as(a.target_label).size() << '\n';
    return kExitOk;
}

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    const auto model = read_dans(a.model);
    const auto report = score_bank(model, load_bank(a.features, a.layers));
    if (a.out.empty() || a.out == "-") {
        write_scores_csv(model, report, a.verbose, out);
        return kExitOk;
    }
    std::ofstream file(a.out, std::ios::trunc);
    if (!file) throw Error(ErrorCode::Io, "cannot create " + a.out);
    write_scores_csv(model, report, a.verbose, file);
    if (!file) throw Error(ErrorCode::Io, "cannot write " + a.out);
    return kExitOk;
}

std::int32_t resolve_target(const DetectorModel& model, const std::optional<std::int32_t>& flag) {
    if (flag) return *flag;
    if (model.target_label) return *model.target_label;
    throw Error(ErrorCode::NoTargetSamples, "no --target-label given and the model records none");
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const auto model = read_dans(a.model);
    const auto clean = load_bank(a.clean, a.layers);
    const auto poisoned = load_bank(a.poisoned, a.layers);
    model.require_compatible(clean);
    model.require_compatible(poisoned);
    if (!model.threshold) throw Error(ErrorCode::ThresholdUnset, "run `dan calibrate` on the model first");
    const auto report = evaluate(model, clean, poisoned, resolve_target(model, a.target_label));
    const std::string format = a.json ? "json" : a.format;
    if (format == "json") {
        out << render_json(report);
    } else if (format == "kv") {
        out << render_key_values(report);
    } else if (format == "table") {
        out << render_table(report);
    } else {
        out << render_table(report) << '\n' << render_key_values(report);
    }
    return kExitOk;
}

int cmd_layer_auroc(const EvaluateArgs& a, std::ostream& out) {
    const auto model = read_dans(a.model);
    const auto clean = load_bank(a.clean, a.layers);
    const auto poisoned = load_bank(a.poisoned, a.layers);
    model.require_compatible(clean);
    model.require_compatible(poisoned);
    const auto table = layer_auroc_table(model, clean, poisoned);
    out << (a.json ? render_layer_json(table) : render_layer_table(table));
    return kExitOk;
}

int cmd_synth(SynthArgs a, std::ostream& out) {
    a.config.anomaly_layers = parse_layer_list(a.anomaly_layers, a.config.n_layers);
    a.config.validate();
    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    const auto banks = generate(a.config);
    auto emit = [&](const FeatureBank& bank, const char* name) {
        write_danf(bank, dir / name);
        out << (dir / name).string() << " samples=" << bank.n_samples() << '\n';
    };
    if (a.config.n_clean_train > 0) emit(banks.clean_train, "clean_train.danf");
    emit(banks.clean_valid, "clean_valid.danf");
    emit(banks.clean_test, "clean_test.danf");
    emit(banks.poisoned_test, "poisoned_test.danf");
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DAN: distance-based anomaly detection of backdoor inputs from layer-wise features", "dan"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "fit per-layer Gaussian statistics and normalization on clean data");
    fit_cmd->add_option("--features", fit.features, "clean validation DANF")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", fit.out, "output DANS model")->required();
    fit_cmd->add_option("--ridge", fit.ridge, "absolute ridge (default 1e-3 * trace / d per layer)")
        ->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--split", fit.split, "fraction used for Gaussian statistics")->capture_default_str();
    fit_cmd->add_option("--seed", fit.seed, "split seed")->capture_default_str();
    fit_cmd->add_option("--agg", fit.agg, "layer aggregation")->check(CLI::IsMember({"max", "mean"}))->capture_default_str();
    fit_cmd->add_flag("--no-norm", fit.no_norm, "disable per-layer score normalization");
    fit_cmd->add_option("--layers", fit.layers, "restrict input banks to these 1-based layers (comma-separated)");


    CalibrateArgs cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "set the threshold at a target validation FRR");
    cal_cmd->add_option("--model", cal.model, "DANS model")->required()->check(CLI::ExistingFile);
    cal_cmd->add_option("--features", cal.features, "clean validation DANF")->required()->check(CLI::ExistingFile);
    cal_cmd->add_option("--frr", cal.frr, "target false rejection rate in [0, 1)")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cal_cmd->add_option("--target-label", cal.target_label, "protected label")->required()->check(CLI::NonNegativeNumber);
    cal_cmd->add_option("--out", cal.out, "output model (default: rewrite --model)");
    cal_cmd->add_option("--layers", cal.layers, "restrict input banks to these 1-based layers (comma-separated)");


    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "write DAN scores as CSV");
    score_cmd->add_option("--model", score.model, "DANS model")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--features", score.features, "DANF to score")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--out", score.out, "CSV path ('-' or omitted: stdout)");
    score_cmd->add_option("--layers", score.layers, "restrict input banks to these 1-based layers (comma-separated)");
    score_cmd->add_flag("--verbose", score.verbose, "add raw (m<i>) and normalized (n<i>) per-layer columns");

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "FRR, FAR and AUROC on clean and poisoned test banks");
    eval_cmd->add_option("--model", eval.model, "calibrated DANS model")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--clean", eval.clean, "clean test DANF")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--poisoned", eval.poisoned, "poisoned test DANF")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--target-label", eval.target_label, "protected label (default: model's)")
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--format", eval.format, "text (table + key=value), table, kv or json")
        ->check(CLI::IsMember({"text", "table", "kv", "json"}))
        ->capture_default_str();
    eval_cmd->add_flag("--json", eval.json, "same as --format json");
    eval_cmd->add_option("--layers", eval.layers, "restrict input banks to these 1-based layers (comma-separated)");


    EvaluateArgs layers;
    auto* layer_cmd = app.add_subcommand("layer-auroc", "per-layer AUROC of raw Mahalanobis distances");
    layer_cmd->add_option("--model", layers.model, "DANS model")->required()->check(CLI::ExistingFile);
    layer_cmd->add_option("--clean", layers.clean, "clean test DANF")->required()->check(CLI::ExistingFile);
    layer_cmd->add_option("--poisoned", layers.poisoned, "poisoned test DANF")->required()->check(CLI::ExistingFile);
    layer_cmd->add_flag("--json", layers.json, "emit JSON");
    layer_cmd->add_option("--layers", layers.layers, "restrict input banks to these 1-based layers (comma-separated)");


    SynthArgs synth;
    auto& sc = synth.config;
    auto* synth_cmd = app.add_subcommand("synth", "generate seeded synthetic clean/poisoned feature banks");
    synth_cmd->add_option("--layers", sc.n_layers, "L")->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--dim", sc.dim, "d")->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--classes", sc.n_classes, "C")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    synth_cmd->add_option("--separation", sc.class_separation, "distance between adjacent class means")
        ->capture_default_str();
    synth_cmd->add_option("--n-train", sc.n_clean_train, "clean training samples (file written only if > 0)")
        ->capture_default_str();
    synth_cmd->add_option("--n-valid", sc.n_clean_valid, "clean validation samples")->capture_default_str();
    synth_cmd->add_option("--n-test", sc.n_clean_test, "clean test samples")->capture_default_str();
    synth_cmd->add_option("--n-poisoned", sc.n_poisoned, "poisoned test samples")->capture_default_str();
    synth_cmd->add_option("--anomaly-layers", synth.anomaly_layers, "comma-separated 1-based layers, 'all' or 'none'")
        ->capture_default_str();
    synth_cmd->add_option("--shift", sc.shift, "poison offset magnitude")->capture_default_str()->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--target-label", sc.target_label, "target label")->capture_default_str()->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--seed", sc.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--out-dir", synth.out_dir, "output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "dan: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit, out);
        if (cal_cmd->parsed()) return cmd_calibrate(cal, out);
        if (score_cmd->parsed()) return cmd_score(score, out);
        if (eval_cmd->parsed()) return cmd_evaluate(eval, out);
        if (layer_cmd->parsed()) return cmd_layer_auroc(layers, out);
        if (synth_cmd->parsed()) return cmd_synth(std::move(synth), out);
    } catch (const CLI::ValidationError& e) {
        err << "dan: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "dan: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace dan::cli
