#include "dan/eval_metrics.hpp"

#include "dan/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dan {

namespace {

std::vector<double> select(const std::vector<double>& values, const std::vector<std::size_t>& indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(values[i]);
    return out;
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values)
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains non-finite scores");
}

double accepted_fraction(std::span<const double> scores, double threshold) {
    const auto accepted = std::count_if(scores.begin(), scores.end(), [&](double s) { return s <= threshold; });
    return static_cast<double>(accepted) / static_cast<double>(scores.size());
}

}  // namespace

double threshold_at_frr(std::span<const double> scores, double target_frr) {
    if (!(target_frr >= 0.0 && target_frr < 1.0))
        throw Error(ErrorCode::InvalidFrr, "target FRR " + std::to_string(target_frr) + " must lie in [0, 1)");
    if (scores.empty()) throw Error(ErrorCode::NoTargetSamples, "no calibration scores");
    require_finite(scores, "calibration set");

    const auto n = scores.size();
    // ⌈(1−q)n⌉ computed as n − ⌊qn⌋; the slack absorbs representation error in q·n.
    auto allowed = static_cast<std::size_t>(std::floor(target_frr * static_cast<double>(n) + 1e-9));
    allowed = std::min(allowed, n - 1);
    const std::size_t j = n - allowed;

    std::vector<double> sorted(scores.begin(), scores.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(j - 1), sorted.end());
    return sorted[j - 1];
}

DetectorModel calibrate_threshold(DetectorModel model, const FeatureBank& clean_valid, double target_frr,
                                  std::int32_t target_label) {
    if (!(target_frr >= 0.0 && target_frr < 1.0))
        throw Error(ErrorCode::InvalidFrr, "target FRR " + std::to_string(target_frr) + " must lie in [0, 1)");
    const auto idx = clean_valid.predicted_as(target_label);
    if (idx.empty())
        throw Error(ErrorCode::NoTargetSamples,
                    "no validation sample is predicted as target label " + std::to_string(target_label));
    model.threshold.reset();
    const auto scores = scores_of(score_bank(model, clean_valid.subset(idx)));
    model.threshold = threshold_at_frr(scores, target_frr);
    model.target_label = target_label;
    return model;
}

double flagged_fraction(std::span<const double> scores, double threshold) {
    if (scores.empty()) throw Error(ErrorCode::NoTargetSamples, "no scores");
    const auto flagged = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
    return static_cast<double>(flagged) / static_cast<double>(scores.size());
}

Rates frr_far(const DetectorModel& model, const FeatureBank& clean_test, const FeatureBank& poisoned_test,
              std::int32_t target_label) {
    if (!model.threshold) throw Error(ErrorCode::ThresholdUnset, "model has no calibrated threshold");
    const auto clean_idx = clean_test.predicted_as(target_label);
    const auto poisoned_idx = poisoned_test.predicted_as(target_label);
    if (clean_idx.empty())
        throw Error(ErrorCode::NoTargetSamples, "no clean sample predicted as label " + std::to_string(target_label));
    if (poisoned_idx.empty())
        throw Error(ErrorCode::NoTargetSamples,
                    "no poisoned sample predicted as label " + std::to_string(target_label));

    const auto clean = scores_of(score_bank(model, clean_test.subset(clean_idx)));
    const auto poisoned = scores_of(score_bank(model, poisoned_test.subset(poisoned_idx)));
    return {flagged_fraction(clean, *model.threshold), accepted_fraction(poisoned, *model.threshold)};
}

double auroc(std::span<const double> clean_scores, std::span<const double> poisoned_scores) {
    if (clean_scores.empty() || poisoned_scores.empty())
        throw Error(ErrorCode::EmptyInput, "AUROC needs at least one clean and one poisoned score");
    require_finite(clean_scores, "clean set");
    require_finite(poisoned_scores, "poisoned set");

    struct Item {
        double value;
        bool poisoned;
    };
    std::vector<Item> items;
    items.reserve(clean_scores.size() + poisoned_scores.size());
    for (double v : clean_scores) items.push_back({v, false});
    for (double v : poisoned_scores) items.push_back({v, true});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

    // Twice the rank sum of the poisoned scores, using mid-ranks for ties;
    // kept integral so the statistic is exact.
    std::uint64_t twice_rank_sum = 0;
    for (std::size_t lo = 0; lo < items.size();) {
        std::size_t hi = lo;
        std::uint64_t poisoned_in_group = 0;
        while (hi < items.size() && items[hi].value == items[lo].value) poisoned_in_group += items[hi++].poisoned;
        // 1-based ranks lo+1 .. hi, mid-rank (lo+1+hi)/2
        twice_rank_sum += poisoned_in_group * static_cast<std::uint64_t>(lo + 1 + hi);
        lo = hi;
    }
    const std::uint64_t m = poisoned_scores.size();
    const std::uint64_t n = clean_scores.size();
    const std::uint64_t twice_u = twice_rank_sum - m * (m + 1);  // 2·(#clean<poisoned + ½·#ties)
    const std::uint64_t twice_pairs = 2 * m * n;

    // Evaluate the smaller side and complement, so auroc(a,b) + auroc(b,a) == 1 exactly.
    if (2 * twice_u <= twice_pairs) return static_cast<double>(twice_u) / static_cast<double>(twice_pairs);
    return 1.0 - static_cast<double>(twice_pairs - twice_u) / static_cast<double>(twice_pairs);
}

std::vector<double> layer_auroc_table(const DetectorModel& model, const FeatureBank& clean_test,
                                      const FeatureBank& poisoned_test) {
    const auto clean = score_bank(model, clean_test);
    const auto poisoned = score_bank(model, poisoned_test);
    std::vector<double> table(model.n_layers());
    std::vector<double> a(clean.size()), b(poisoned.size());
    for (std::size_t i = 0; i < model.n_layers(); ++i) {
        const auto layer = static_cast<Eigen::Index>(i);
        for (std::size_t s = 0; s < clean.size(); ++s) a[s] = clean[s].raw_distances(layer);
        for (std::size_t s = 0; s < poisoned.size(); ++s) b[s] = poisoned[s].raw_distances(layer);
        table[i] = auroc(a, b);
    }
    return table;
}

EvalReport evaluate(const DetectorModel& model, const FeatureBank& clean_test, const FeatureBank& poisoned_test,
                    std::int32_t target_label) {
    if (!model.threshold) throw Error(ErrorCode::ThresholdUnset, "model has no calibrated threshold");
    const auto clean = score_bank(model, clean_test);
    const auto poisoned = score_bank(model, poisoned_test);
    const auto clean_scores = scores_of(clean);
    const auto poisoned_scores = scores_of(poisoned);

    const auto clean_idx = clean_test.predicted_as(target_label);
    const auto poisoned_idx = poisoned_test.predicted_as(target_label);
    if (clean_idx.empty())
        throw Error(ErrorCode::NoTargetSamples, "no clean sample predicted as label " + std::to_string(target_label));
    if (poisoned_idx.empty())
        throw Error(ErrorCode::NoTargetSamples,
                    "no poisoned sample predicted as label " + std::to_string(target_label));

    EvalReport report;
    report.threshold = *model.threshold;
    report.target_label = target_label;
    report.n_clean_eval = clean_idx.size();
    report.n_poisoned_eval = poisoned_idx.size();
    report.frr = flagged_fraction(select(clean_scores, clean_idx), report.threshold);
    report.far = accepted_fraction(select(poisoned_scores, poisoned_idx), report.threshold);
    report.auroc = auroc(clean_scores, poisoned_scores);

    report.per_layer_auroc.resize(model.n_layers());
    std::vector<double> a(clean.size()), b(poisoned.size());
    for (std::size_t i = 0; i < model.n_layers(); ++i) {
        const auto layer = static_cast<Eigen::Index>(i);
        for (std::size_t s = 0; s < clean.size(); ++s) a[s] = clean[s].raw_distances(layer);
        for (std::size_t s = 0; s < poisoned.size(); ++s) b[s] = poisoned[s].raw_distances(layer);
        report.per_layer_auroc[i] = auroc(a, b);
    }
    return report;
}

}  // namespace dan
