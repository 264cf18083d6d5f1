#pragma once

#include "dan/dan_score.hpp"
#include "dan/feature_bank.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dan {

/// τ = s_(j) with j = n − ⌊q·n⌋ = ⌈(1−q)·n⌉ over the sorted scores. The
/// decision rule is "poisoned iff score > τ", so at most ⌊q·n⌋ of these
/// scores can be flagged.
double threshold_at_frr(std::span<const double> scores, double target_frr);

/// Sets τ and the target label from clean validation samples predicted as
/// `target_label`.
DetectorModel calibrate_threshold(DetectorModel model, const FeatureBank& clean_valid, double target_frr,
                                  std::int32_t target_label);

struct Rates {
    double frr = 0.0;
    double far = 0.0;
};

/// Fraction of target-predicted scores above τ.
double flagged_fraction(std::span<const double> scores, double threshold);

Rates frr_far(const DetectorModel& model, const FeatureBank& clean_test, const FeatureBank& poisoned_test,
              std::int32_t target_label);

/// P(clean < poisoned) + ½·P(tie), from mid-ranks.
double auroc(std::span<const double> clean_scores, std::span<const double> poisoned_scores);

/// AUROC of the raw per-layer distances, one entry per layer.
std::vector<double> layer_auroc_table(const DetectorModel& model, const FeatureBank& clean_test,
                                      const FeatureBank& poisoned_test);

struct EvalReport {
    double frr = 0.0;
    double far = 0.0;
    double auroc = 0.0;
    std::vector<double> per_layer_auroc;
    double threshold = 0.0;
    std::int32_t target_label = 0;
    std::size_t n_clean_eval = 0;
    std::size_t n_poisoned_eval = 0;
};

/// FRR/FAR over target-predicted samples; global and per-layer AUROC over
/// every sample of both banks.
EvalReport evaluate(const DetectorModel& model, const FeatureBank& clean_test, const FeatureBank& poisoned_test,
                    std::int32_t target_label);

}  // namespace dan
