#pragma once

#include "dan/core_stats.hpp"
#include "dan/feature_bank.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dan {

inline constexpr double kSigmaFloor = 1e-12;
inline constexpr double kDefaultSplitFraction = 0.8;

enum class Aggregation : std::uint8_t { Max = 0, Mean = 1 };

std::string_view to_string(Aggregation agg);
std::optional<Aggregation> parse_aggregation(std::string_view text);

/// Fitted layer statistics plus the aggregation rule and calibrated threshold.
struct DetectorModel {
    std::vector<LayerStats<double>> layers;
    Aggregation aggregation = Aggregation::Max;
    bool normalization_enabled = true;
    std::optional<double> threshold;
    std::optional<std::int32_t> target_label;
    double split_fraction = kDefaultSplitFraction;
    std::uint64_t split_seed = 0;
    Ridge ridge;

    std::size_t n_layers() const { return layers.size(); }
    std::size_t dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().dim()); }
    std::size_t n_classes() const {
        return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().n_classes());
    }

    /// Throws DimensionMismatch / NonFiniteInput when layers disagree or hold bad values.
    void validate() const;
    void require_compatible(const FeatureBank& bank) const;
};

struct ScoreEntry {
    Vector<double> raw_distances;
    Vector<double> normalized_distances;
    double dan_score = 0.0;
    std::optional<bool> flagged;
};

using ScoreReport = std::vector<ScoreEntry>;

/// Sorted sample indices of the two sides of the validation split.
struct Split {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> held_out;
};

/// Class-stratified, seed-controlled split: each class is shuffled
/// (Fisher-Yates on mt19937_64) and the first round(fraction · n_j) members go
/// to the fit side. Classes are visited in label order with one generator.
Split stratified_split(std::span<const std::int32_t> labels, std::size_t n_classes, double fraction,
                       std::uint64_t seed);

struct ScoreMoments {
    double mean = 0.0;
    double std = 1.0;  ///< population (1/N), floored at kSigmaFloor
};

ScoreMoments score_moments(std::span<const double> distances);

struct DetectorOptions {
    Ridge ridge;
    double split_fraction = kDefaultSplitFraction;
    std::uint64_t split_seed = 0;
    Aggregation aggregation = Aggregation::Max;
    bool normalization_enabled = true;
};

/// Gaussian statistics from the fit split, (μ, σ) of each layer's distances
/// over the held-out split. Centroids and factors are rounded to float32
/// before the held-out pass so a serialized model scores identically.
DetectorModel fit_detector(const FeatureBank& clean_valid, const DetectorOptions& options = {});

/// (m − μ) / max(σ, σ_floor).
double normalize(const LayerStats<double>& stats, double distance);

double aggregate(Aggregation agg, const Vector<double>& values);

/// Scores one sample given as an L × d matrix.
ScoreEntry dan_score(const DetectorModel& model, const Eigen::Ref<const Matrix<double>>& sample);

ScoreReport score_bank(const DetectorModel& model, const FeatureBank& bank);

/// dan_score column of a report.
std::vector<double> scores_of(const ScoreReport& report);

}  // namespace dan
