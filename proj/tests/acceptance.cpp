// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "cli.hpp"

#include "dan/core_stats.hpp"
#include "dan/dan_score.hpp"
#include "dan/eval_metrics.hpp"
#include "dan/io_format.hpp"
#include "dan/synth.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace {

namespace fs = std::filesystem;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[violated: " << what << "] ";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void mahalanobis_oracle(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(100);
    std::uniform_int_distribution<int> dim(1, 8), classes(1, 3);
    std::normal_distribution<double> normal;
    const double ridges[] = {0.0, 1e-6, 1e-2};
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int d = dim(rng);
        const int c = classes(rng);
        std::uniform_int_distribution<int> size(d + c + 4, 64);
        const auto in = oracle::random_instance(rng, size(rng), d, c);
        const double eps = ridges[trial % 3];
        const auto stats = dan::fit_layer_stats(in.x, in.labels, c, eps);
        const auto m = oracle::pooled_moments(in.x, in.labels, c);
        const Eigen::MatrixXd precision = (m.covariance + eps * Eigen::MatrixXd::Identity(d, d)).inverse();
        for (int q = 0; q < 10; ++q) {
            Eigen::VectorXd x(d);
            for (int k = 0; k < d; ++k) x(k) = 4.0 * normal(rng);
            worst = std::max(worst, oracle::relative_error(dan::mahalanobis_min(stats, x),
                                                           oracle::mahalanobis_min(m.centroids, precision, x)));
        }
    }
    const double t = seconds_since(t0);
    o.require(worst < 1e-8, "max relative error < 1e-8");
    o.require(t < 5.0, "runtime < 5 s");
    o.detail << "200 instances, max rel err " << worst << ", " << t << " s";
}

void auroc_oracle(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    std::uniform_int_distribution<int> coarse(0, 15);
    std::normal_distribution<double> fine;
    double worst = 0.0;
    bool symmetric = true;
    int tied_sets = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const bool ties = trial % 2 == 0;
        auto draw = [&](std::size_t n) {
            std::vector<double> v(n);
            for (auto& x : v) x = ties ? coarse(rng) * 0.5 : fine(rng);
            return v;
        };
        const auto a = draw(size(rng));
        const auto b = draw(size(rng));
        tied_sets += ties;
        const double got = dan::auroc(a, b);
        worst = std::max(worst, std::abs(got - oracle::auroc(a, b)));
        symmetric = symmetric && (got + dan::auroc(b, a) == 1.0);
    }
    const double t = seconds_since(t0);
    o.require(worst < 1e-12, "|rank - pair count| < 1e-12");
    o.require(symmetric, "auroc(a,b) + auroc(b,a) == 1 exactly");
    o.require(t < 5.0, "runtime < 5 s");
    o.detail << "200 pairs (" << tied_sets << " with ties), max abs diff " << worst << ", " << t << " s";
}

void pooled_covariance_conformance(Outcome& o) {
    std::mt19937_64 rng(102);
    std::uniform_int_distribution<int> dim(1, 10), classes(1, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = dim(rng);
        const int c = classes(rng);
        std::uniform_int_distribution<int> size(c + d + 2, 120);
        const auto in = oracle::random_instance(rng, size(rng), d, c);
        const double eps = 1e-6;
        const auto want = oracle::pooled_moments(in.x, in.labels, c);
        const auto got = dan::pooled_moments(in.x, in.labels, c);
        const auto stats = dan::fit_layer_stats(in.x, in.labels, c, eps);
        const Eigen::MatrixXd reconstructed = stats.covariance() - eps * Eigen::MatrixXd::Identity(d, d);
        worst = std::max({worst, oracle::relative_error(got.centroids, want.centroids),
                          oracle::relative_error(got.covariance, want.covariance),
                          oracle::relative_error(stats.centroids, want.centroids),
                          oracle::relative_error(reconstructed, want.covariance)});
    }
    o.require(worst < 1e-10, "relative error < 1e-10");
    o.detail << "50 instances, max rel err " << worst;
}

void affine_invariance(Outcome& o) {
    std::mt19937_64 rng(103);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> log_sv(0.0, 2.0);
    double worst = 0.0, worst_cond = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + trial % 6;
        auto orthogonal = [&] {
            Eigen::MatrixXd g(d, d);
            for (int r = 0; r < d; ++r)
                for (int k = 0; k < d; ++k) g(r, k) = normal(rng);
            return Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ());
        };
        Eigen::VectorXd sv(d);
        for (int k = 0; k < d; ++k) sv(k) = std::pow(10.0, log_sv(rng));  // singular values in [1, 100]
        const Eigen::MatrixXd a = orthogonal() * sv.asDiagonal() * orthogonal().transpose();
        worst_cond = std::max(worst_cond, sv.maxCoeff() / sv.minCoeff());

        const auto in = oracle::random_instance(rng, 60, d, 2);
        const Eigen::MatrixXd moved = in.x * a.transpose();
        const auto before = dan::fit_layer_stats(in.x, in.labels, 2, 0.0);
        const auto after = dan::fit_layer_stats(moved, in.labels, 2, 0.0);
        for (Eigen::Index s = 0; s < in.x.rows(); ++s)
            worst = std::max(worst, oracle::relative_error(dan::mahalanobis_min(after, moved.row(s)),
                                                           dan::mahalanobis_min(before, in.x.row(s))));
        for (int q = 0; q < 20; ++q) {
            Eigen::VectorXd x(d);
            for (int k = 0; k < d; ++k) x(k) = 5.0 * normal(rng);
            worst = std::max(worst, oracle::relative_error(dan::mahalanobis_min(after, a * x),
                                                           dan::mahalanobis_min(before, x)));
        }
    }
    o.require(worst_cond <= 100.0, "condition number <= 100");
    o.require(worst < 1e-6, "relative change < 1e-6");
    o.detail << "20 transforms (max cond " << worst_cond << "), max rel change " << worst;
}

void calibration_soundness(Outcome& o) {
    std::mt19937_64 rng(104);
    std::uniform_int_distribution<std::size_t> size(1, 400);
    std::uniform_int_distribution<int> coarse(0, 20);
    std::normal_distribution<double> fine;
    int checks = 0;
    bool sound = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> scores(size(rng));
        for (auto& s : scores) s = trial % 3 == 0 ? coarse(rng) : fine(rng);
        for (double q : {0.0, 0.01, 0.05, 0.1}) {
            const double tau = dan::threshold_at_frr(scores, q);
            sound = sound && dan::flagged_fraction(scores, tau) <= q;
            ++checks;
        }
    }
    std::vector<double> twenty(20);
    for (int k = 0; k < 20; ++k) twenty[k] = std::exp(0.3 * k) - 4.0;
    std::shuffle(twenty.begin(), twenty.end(), rng);
    const double tau = dan::threshold_at_frr(twenty, 0.05);
    const auto flagged = std::count_if(twenty.begin(), twenty.end(), [&](double s) { return s > tau; });
    o.require(sound, "calibration-set FRR <= q");
    o.require(flagged == 1, "exactly one of 20 distinct scores flagged at q = 0.05");
    o.detail << checks << " (multiset, q) checks; 20 distinct scores at q=0.05 flag " << flagged;
}

// ---------------------------------------------------------------------------

dan::SynthConfig separation_config() {
    dan::SynthConfig cfg;
    cfg.n_layers = 12;
    cfg.dim = 16;
    cfg.n_classes = 2;
    cfg.class_separation = 4.0;
    cfg.shift = 6.0;
    cfg.anomaly_layers = {7};
    cfg.n_clean_valid = 1000;
    cfg.n_clean_test = 1000;
    cfg.n_poisoned = 500;
    cfg.target_label = 0;
    cfg.seed = 0;
    return cfg;
}

constexpr double kTargetFrr = 0.05;

double far_of(const dan::SynthBanks& banks, dan::DetectorOptions options, const std::vector<std::size_t>& layers = {}) {
    auto valid = banks.clean_valid;
    auto poisoned = banks.poisoned_test;
    auto clean = banks.clean_test;
    if (!layers.empty()) {
        valid = valid.select_layers(layers);
        poisoned = poisoned.select_layers(layers);
        clean = clean.select_layers(layers);
    }
    const auto model =
        dan::calibrate_threshold(dan::fit_detector(valid, options), valid, kTargetFrr, banks.poisoned_test.predicted_labels[0]);
    return dan::frr_far(model, clean, poisoned, *model.target_label).far;
}

void synthetic_separation(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = separation_config();
    const auto banks = dan::generate(cfg);
    const auto model = dan::calibrate_threshold(dan::fit_detector(banks.clean_valid), banks.clean_valid, kTargetFrr,
                                                cfg.target_label);
    const auto report = dan::evaluate(model, banks.clean_test, banks.poisoned_test, cfg.target_label);

    // brute-force pair counting for the per-layer table
    const auto clean = dan::score_bank(model, banks.clean_test);
    const auto poisoned = dan::score_bank(model, banks.poisoned_test);
    double worst_oracle_gap = 0.0;
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        std::vector<double> a, b;
        for (const auto& e : clean) a.push_back(e.raw_distances(static_cast<Eigen::Index>(i)));
        for (const auto& e : poisoned) b.push_back(e.raw_distances(static_cast<Eigen::Index>(i)));
        worst_oracle_gap = std::max(worst_oracle_gap, std::abs(oracle::auroc(a, b) - report.per_layer_auroc[i]));
    }
    const double t = seconds_since(t0);

    double other_lo = 1.0, other_hi = 0.0;
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        if (i == 6) continue;
        other_lo = std::min(other_lo, report.per_layer_auroc[i]);
        other_hi = std::max(other_hi, report.per_layer_auroc[i]);
    }
    o.require(worst_oracle_gap < 1e-12, "per-layer AUROC equals brute force");
    o.require(report.per_layer_auroc[6] >= 0.99, "layer-7 AUROC >= 0.99");
    o.require(other_lo >= 0.4 && other_hi <= 0.6, "other layers within [0.4, 0.6]");
    o.require(report.auroc >= 0.99, "DAN global AUROC >= 0.99");
    o.require(report.far <= 0.05, "FAR <= 5% at q = 0.05");
    o.require(t < 30.0, "runtime < 30 s");
    o.detail << std::setprecision(4) << "layer7 AUROC " << report.per_layer_auroc[6] << ", others in [" << other_lo
             << ", " << other_hi << "], global AUROC " << report.auroc << ", FAR " << report.far << ", test FRR "
             << report.frr << ", " << t << " s";
}

void ablation(Outcome& o) {
    const auto cfg = separation_config();
    const auto banks = dan::generate(cfg);
    dan::DetectorOptions max_opt;
    dan::DetectorOptions mean_opt;
    mean_opt.aggregation = dan::Aggregation::Mean;
    const double far_max = far_of(banks, max_opt);
    const double far_mean = far_of(banks, mean_opt);
    double best_single = 1.0;
    for (std::size_t layer = 1; layer <= cfg.n_layers; ++layer) {
        if (layer == 7) continue;
        best_single = std::min(best_single, far_of(banks, max_opt, {layer}));
    }

    auto all_cfg = cfg;
    all_cfg.anomaly_layers.clear();
    for (std::size_t layer = 1; layer <= cfg.n_layers; ++layer) all_cfg.anomaly_layers.push_back(layer);
    const double far_all = far_of(dan::generate(all_cfg), max_opt);

    o.require(far_max <= far_mean, "FAR(max) <= FAR(mean)");
    o.require(far_max <= best_single, "FAR(max) <= FAR(any single layer != 7)");
    o.require(far_all <= 0.05, "FAR(max) <= 5% with anomaly in all layers");
    o.detail << std::setprecision(4) << "FAR max " << far_max << ", mean " << far_mean << ", best single non-7 "
             << best_single << ", all-layer anomaly " << far_all;
}

void self_normalization(Outcome& o) {
    const auto cfg = separation_config();
    const auto banks = dan::generate(cfg);
    dan::DetectorOptions opt;
    opt.split_seed = 17;
    const auto model = dan::fit_detector(banks.clean_valid, opt);
    const auto split = dan::stratified_split(banks.clean_valid.true_labels, cfg.n_classes, opt.split_fraction, 17);
    const auto report = dan::score_bank(model, banks.clean_valid.subset(split.held_out));
    double worst_mean = 0.0, worst_std = 0.0;
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
        std::vector<double> z;
        for (const auto& e : report) z.push_back(e.normalized_distances(static_cast<Eigen::Index>(i)));
        worst_mean = std::max(worst_mean, std::abs(oracle::mean(z)));
        worst_std = std::max(worst_std, std::abs(oracle::population_std(z) - 1.0));
    }
    o.require(worst_mean < 1e-9, "|mean| < 1e-9");
    o.require(worst_std < 1e-9, "|std - 1| < 1e-9");
    o.detail << "held-out n=" << split.held_out.size() << ", max |mean| " << worst_mean << ", max |std-1| " << worst_std;
}

template <typename F>
std::string error_name(F&& f) {
    try {
        f();
    } catch (const dan::Error& e) {
        return std::string(dan::to_string(e.code()));
    }
    return "none";
}

void format_round_trip(Outcome& o) {
    std::mt19937_64 rng(105);
    int identical = 0, sized = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t l = 1 + rng() % 16, d = 1 + rng() % 64, c = 2 + rng() % 4, n = rng() % 257;
        const auto bank = fixtures::random_bank(rng, l, d, c, n);
        const auto bytes = dan::encode_danf(bank);
        sized += bytes.size() == dan::kDanfHeaderBytes + n * (8 + 4 * l * d);
        identical += dan::encode_danf(dan::decode_danf(bytes)) == bytes;

        const auto model = fixtures::random_model(rng, l, d, c);
        const auto model_bytes = dan::encode_dans(model);
        sized += model_bytes.size() == dan::dans_file_size(l, d, c);
        identical += dan::encode_dans(dan::decode_dans(model_bytes)) == model_bytes;
    }
    o.require(identical == 200, "200 byte-identical round trips");
    o.require(sized == 200, "size formula holds for every file");

    const auto bank = fixtures::random_bank(rng, 3, 5, 2, 7);
    const auto good = dan::encode_danf(bank);
    auto magic = good;
    std::memcpy(magic.data(), "XXXX", 4);
    auto version = good;
    version[4] = std::byte{9};
    const std::vector<std::byte> truncated(good.begin(), good.end() - 5);
    auto extended = good;
    extended.push_back(std::byte{0});
    auto model_bytes = dan::encode_dans(fixtures::random_model(rng, 2, 3, 2));
    auto reserved = model_bytes;
    reserved[23] = std::byte{1};
    const std::vector<std::pair<std::string, std::string>> cases{
        {error_name([&] { dan::decode_danf(magic); }), "BadMagic"},
        {error_name([&] { dan::decode_danf(version); }), "UnsupportedVersion"},
        {error_name([&] { dan::decode_danf(truncated); }), "TruncatedFile"},
        {error_name([&] { dan::decode_danf(extended); }), "SizeMismatch"},
        {error_name([&] { dan::decode_dans(reserved); }), "UnsupportedVersion"},
        {error_name([&] { dan::decode_dans(std::vector<std::byte>(model_bytes.begin(), model_bytes.end() - 1)); }),
         "TruncatedFile"},
    };
    int rejected = 0;
    for (const auto& [got, want] : cases) {
        o.require(got == want, "corrupted file raises " + want + " (got " + got + ")");
        rejected += got == want;
    }
    o.detail << identical << "/200 identical, " << sized << "/200 sized, " << rejected << "/" << cases.size()
             << " corruptions rejected";
}

std::string pipeline_once(int run_index) {
    const fs::path dir = fs::temp_directory_path() / ("dan_accept_" + std::to_string(::getpid()) + "_" +
                                                      std::to_string(run_index));
    fs::remove_all(dir);
    auto call = [](std::vector<std::string> args) {
        std::ostringstream out, err;
        const int code = dan::cli::run(args, out, err);
        if (code != dan::cli::kExitOk) throw std::runtime_error("dan " + args.front() + " failed: " + err.str());
        return out.str();
    };
    const auto p = [&](const char* name) { return (dir / name).string(); };
    call({"synth", "--layers", "12", "--dim", "16", "--classes", "2", "--separation", "4", "--shift", "6",
          "--anomaly-layers", "7", "--n-valid", "1000", "--n-test", "1000", "--n-poisoned", "500", "--seed", "0",
          "--out-dir", dir.string()});
    call({"fit", "--features", p("clean_valid.danf"), "--out", p("model.dans"), "--seed", "3"});
    call({"calibrate", "--model", p("model.dans"), "--features", p("clean_valid.danf"), "--frr", "0.05",
          "--target-label", "0"});
    auto report = call({"evaluate", "--model", p("model.dans"), "--clean", p("clean_test.danf"), "--poisoned",
                        p("poisoned_test.danf"), "--json"});
    const auto model_bytes = dan::read_file_bytes(p("model.dans"));
    report += std::to_string(std::hash<std::string_view>{}(
        std::string_view(reinterpret_cast<const char*>(model_bytes.data()), model_bytes.size())));
    fs::remove_all(dir);
    return report;
}

void end_to_end_determinism(Outcome& o) {
    const auto first = pipeline_once(0);
    int same = 1;
    for (int r = 1; r < 3; ++r) same += pipeline_once(r) == first;
    o.require(same == 3, "three identical JSON reports");
    o.detail << same << "/3 runs identical (" << first.size() << " bytes of report)";
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, void (*)(Outcome&)>> criteria{
        {"Mahalanobis oracle suite", mahalanobis_oracle},
        {"AUROC oracle suite", auroc_oracle},
        {"Pooled-covariance conformance", pooled_covariance_conformance},
        {"Affine invariance", affine_invariance},
        {"Calibration soundness", calibration_soundness},
        {"Synthetic separation", synthetic_separation},
        {"Ablation (max vs mean vs single layer)", ablation},
        {"Self-normalization", self_normalization},
        {"Format round-trip", format_round_trip},
        {"End-to-end determinism", end_to_end_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            check(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failed += !o.pass;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail.str() << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
