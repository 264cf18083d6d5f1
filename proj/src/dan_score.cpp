#include "dan/dan_score.hpp"

#include "dan/error.hpp"
#include "dan/parallel.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace dan {

std::string_view to_string(Aggregation agg) { return agg == Aggregation::Max ? "max" : "mean"; }

std::optional<Aggregation> parse_aggregation(std::string_view text) {
    if (text == "max") return Aggregation::Max;
    if (text == "mean") return Aggregation::Mean;
    return std::nullopt;
}

void DetectorModel::validate() const {
    if (layers.empty()) throw Error(ErrorCode::DimensionMismatch, "detector has no layers");
    const auto d = layers.front().dim();
    const auto c = layers.front().n_classes();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.dim() != d || l.n_classes() != c || l.cov_factor.rows() != d || l.cov_factor.cols() != d)
            throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(i + 1) + " shape differs");
        if (!l.centroids.allFinite() || !l.cov_factor.allFinite() || !std::isfinite(l.norm_mean) ||
            !std::isfinite(l.norm_std) || !std::isfinite(l.ridge))
            throw Error(ErrorCode::NonFiniteInput, "layer " + std::to_string(i + 1) + " has non-finite statistics");
    }
    if (threshold && !std::isfinite(*threshold)) throw Error(ErrorCode::NonFiniteInput, "threshold is not finite");
}

void DetectorModel::require_compatible(const FeatureBank& bank) const {
    if (bank.n_layers != n_layers() || bank.dim != dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "bank has L=" + std::to_string(bank.n_layers) + ", d=" + std::to_string(bank.dim) +
                        " but model has L=" + std::to_string(n_layers()) + ", d=" + std::to_string(dim()));
}

Split stratified_split(std::span<const std::int32_t> labels, std::size_t n_classes, double fraction,
                       std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw Error(ErrorCode::SplitTooSmall,
                    "split fraction " + std::to_string(fraction) + " leaves one side empty; need 0 < f < 1");
    std::vector<std::vector<std::size_t>> members(n_classes);
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] < 0 || labels[s] >= static_cast<std::int32_t>(n_classes))
            throw Error(ErrorCode::InvalidLabel, "sample " + std::to_string(s) + " has no usable true label");
        members[static_cast<std::size_t>(labels[s])].push_back(s);
    }

    boost::random::mt19937_64 rng(seed);
    Split split;
    for (auto& group : members) {
        for (std::size_t k = group.size(); k > 1; --k) {
            boost::random::uniform_int_distribution<std::size_t> pick(0, k - 1);
            std::swap(group[k - 1], group[pick(rng)]);
        }
        const auto n_fit = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(group.size()) + 0.5));
        split.fit.insert(split.fit.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_fit));
        split.held_out.insert(split.held_out.end(), group.begin() + static_cast<std::ptrdiff_t>(n_fit), group.end());
    }
    std::sort(split.fit.begin(), split.fit.end());
    std::sort(split.held_out.begin(), split.held_out.end());
    return split;
}

ScoreMoments score_moments(std::span<const double> distances) {
    if (distances.empty()) throw Error(ErrorCode::EmptyInput, "no held-out distances");
    const Eigen::Map<const Eigen::ArrayXd> d(distances.data(), static_cast<Eigen::Index>(distances.size()));
    const double mean = d.mean();
    return {mean, std::max(std::sqrt((d - mean).square().mean()), kSigmaFloor)};
}

DetectorModel fit_detector(const FeatureBank& clean_valid, const DetectorOptions& options) {
    clean_valid.validate();
    clean_valid.require_true_labels();
    if (!options.ridge.valid()) throw Error(ErrorCode::InvalidConfig, "ridge must be finite and non-negative");
    std::vector<std::size_t> class_counts(clean_valid.n_classes, 0);
    for (auto label : clean_valid.true_labels) ++class_counts[static_cast<std::size_t>(label)];
    for (std::size_t j = 0; j < class_counts.size(); ++j)
        if (class_counts[j] == 0)
            throw Error(ErrorCode::MissingClass, "class " + std::to_string(j) + " has no samples in the bank");

    const auto split =
        stratified_split(clean_valid.true_labels, clean_valid.n_classes, options.split_fraction, options.split_seed);
    if (split.held_out.size() < 2)
        throw Error(ErrorCode::SplitTooSmall, "held-out split has " + std::to_string(split.held_out.size()) +
                                                  " samples; need at least 2");
    std::vector<std::size_t> fit_counts(clean_valid.n_classes, 0);
    for (auto s : split.fit) ++fit_counts[static_cast<std::size_t>(clean_valid.true_labels[s])];
    for (std::size_t j = 0; j < fit_counts.size(); ++j)
        if (fit_counts[j] == 0)
            throw Error(ErrorCode::SplitTooSmall, "fit split has no samples of class " + std::to_string(j));

    const FeatureBank fit_bank_part = clean_valid.subset(split.fit);
    const FeatureBank held_out = clean_valid.subset(split.held_out);

    DetectorModel model;
    model.aggregation = options.aggregation;
    model.normalization_enabled = options.normalization_enabled;
    model.split_fraction = options.split_fraction;
    model.split_seed = options.split_seed;
    model.ridge = options.ridge;
    model.layers = fit_bank<double>(fit_bank_part, options.ridge);

    for (auto& layer : model.layers) {
        // Storage precision of the serialized model.
        layer.centroids = layer.centroids.cast<float>().cast<double>();
        layer.cov_factor = layer.cov_factor.cast<float>().cast<double>();
        if (!options.normalization_enabled) {
            layer.norm_mean = 0.0;
            layer.norm_std = 1.0;
            continue;
        }
        const Vector<double> held = mahalanobis_min_rows(layer, held_out.layer(layer.layer_index - 1));
        const auto moments = score_moments({held.data(), static_cast<std::size_t>(held.size())});
        layer.norm_mean = moments.mean;
        layer.norm_std = moments.std;
    }
    return model;
}

double normalize(const LayerStats<double>& stats, double distance) {
    return (distance - stats.norm_mean) / std::max(stats.norm_std, kSigmaFloor);
}

double aggregate(Aggregation agg, const Vector<double>& values) {
    if (values.size() == 0) throw Error(ErrorCode::EmptyInput, "nothing to aggregate");
    return agg == Aggregation::Max ? values.maxCoeff() : values.mean();
}

ScoreEntry dan_score(const DetectorModel& model, const Eigen::Ref<const Matrix<double>>& sample) {
    const auto n_layers = static_cast<Eigen::Index>(model.n_layers());
    if (sample.rows() != n_layers || sample.cols() != static_cast<Eigen::Index>(model.dim()))
        throw Error(ErrorCode::DimensionMismatch,
                    "sample is " + std::to_string(sample.rows()) + "x" + std::to_string(sample.cols()) +
                        ", model expects " + std::to_string(n_layers) + "x" + std::to_string(model.dim()));
    ScoreEntry entry;
    entry.raw_distances.resize(n_layers);
    entry.normalized_distances.resize(n_layers);
    for (Eigen::Index i = 0; i < n_layers; ++i) {
        const auto& layer = model.layers[static_cast<std::size_t>(i)];
        entry.raw_distances(i) = mahalanobis_min(layer, sample.row(i));
        entry.normalized_distances(i) =
            model.normalization_enabled ? normalize(layer, entry.raw_distances(i)) : entry.raw_distances(i);
    }
    entry.dan_score = aggregate(model.aggregation, entry.normalized_distances);
    if (model.threshold) entry.flagged = entry.dan_score > *model.threshold;
    return entry;
}

ScoreReport score_bank(const DetectorModel& model, const FeatureBank& bank) {
    model.require_compatible(bank);
    ScoreReport report(bank.n_samples());
    parallel_for(bank.n_samples(), [&](std::size_t begin, std::size_t end) {
        Matrix<double> sample;
        for (std::size_t s = begin; s < end; ++s) {
            sample = bank.sample(s).cast<double>();
            report[s] = dan_score(model, sample);
        }
    });
    return report;
}

std::vector<double> scores_of(const ScoreReport& report) {
    std::vector<double> out;
    out.reserve(report.size());
    for (const auto& e : report) out.push_back(e.dan_score);
    return out;
}

}  // namespace dan
