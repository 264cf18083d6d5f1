#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dan {

inline constexpr std::int32_t kUnknownLabel = -1;

/// Per-sample, per-layer feature vectors plus true/predicted labels.
///
/// Features are kept at export precision (float32). Row s holds sample s,
/// laid out layer-major: columns [i*d, (i+1)*d) are layer i's vector
/// (0-based i). Everything downstream widens to double on read.
struct FeatureBank {
    using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using SampleView = Eigen::Map<const Storage>;

    FeatureBank() = default;
    FeatureBank(std::size_t n_layers, std::size_t dim, std::size_t n_classes, std::size_t n_samples);

    std::size_t n_layers = 1;
    std::size_t dim = 1;
    std::size_t n_classes = 2;
    Storage features;
    std::vector<std::int32_t> true_labels;
    std::vector<std::int32_t> predicted_labels;

    std::size_t n_samples() const noexcept { return true_labels.size(); }

    /// n × d block of layer `layer` (0-based).
    auto layer(std::size_t layer) const {
        return features.middleCols(static_cast<Eigen::Index>(layer * dim),
                                   static_cast<Eigen::Index>(dim));
    }
    auto layer(std::size_t layer) {
        return features.middleCols(static_cast<Eigen::Index>(layer * dim),
                                   static_cast<Eigen::Index>(dim));
    }

    /// L × d view of one sample.
    SampleView sample(std::size_t s) const {
        return SampleView(features.row(static_cast<Eigen::Index>(s)).data(),
                          static_cast<Eigen::Index>(n_layers), static_cast<Eigen::Index>(dim));
    }

    /// Throws InvalidConfig / DimensionMismatch / NonFiniteInput / InvalidLabel.
    void validate() const;

    /// Throws InvalidLabel if any true label is the unknown sentinel.
    void require_true_labels() const;

    /// New bank holding the given samples in the given order.
    FeatureBank subset(std::span<const std::size_t> indices) const;

    /// New bank restricted to the given 1-based layers, in the given order.
    FeatureBank select_layers(std::span<const std::size_t> layers) const;

    /// Indices of samples whose predicted label equals `label`.
    std::vector<std::size_t> predicted_as(std::int32_t label) const;

    bool operator==(const FeatureBank& other) const;
};

}  // namespace dan
