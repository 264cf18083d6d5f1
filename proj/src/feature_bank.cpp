#include "dan/feature_bank.hpp"

#include "dan/error.hpp"

#include <string>

namespace dan {

FeatureBank::FeatureBank(std::size_t layers, std::size_t d, std::size_t classes, std::size_t n)
    : n_layers(layers),
      dim(d),
      n_classes(classes),
      features(Storage::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layers * d))),
      true_labels(n, kUnknownLabel),
      predicted_labels(n, kUnknownLabel) {
    if (layers < 1 || d < 1 || classes < 2)
        throw Error(ErrorCode::InvalidConfig, "feature bank needs L >= 1, d >= 1, C >= 2 (got L=" +
                                                  std::to_string(layers) + ", d=" + std::to_string(d) +
                                                  ", C=" + std::to_string(classes) + ")");
}

void FeatureBank::validate() const {
    if (n_layers < 1 || dim < 1 || n_classes < 2)
        throw Error(ErrorCode::InvalidConfig, "feature bank needs L >= 1, d >= 1, C >= 2");
    const auto n = static_cast<Eigen::Index>(n_samples());
    if (predicted_labels.size() != true_labels.size() || features.rows() != n ||
        features.cols() != static_cast<Eigen::Index>(n_layers * dim))
        throw Error(ErrorCode::DimensionMismatch, "feature tensor does not match label count or L*d");
    if (!features.allFinite())
        throw Error(ErrorCode::NonFiniteInput, "feature bank contains non-finite values");
    const auto c = static_cast<std::int32_t>(n_classes);
    for (std::size_t s = 0; s < n_samples(); ++s) {
        for (auto label : {true_labels[s], predicted_labels[s]}) {
            if (label != kUnknownLabel && (label < 0 || label >= c))
                throw Error(ErrorCode::InvalidLabel, "sample " + std::to_string(s) + " has label " +
                                                         std::to_string(label) + " outside [0, " +
                                                         std::to_string(c - 1) + "]");
        }
    }
}

void FeatureBank::require_true_labels() const {
    for (std::size_t s = 0; s < n_samples(); ++s)
        if (true_labels[s] == kUnknownLabel)
            throw Error(ErrorCode::InvalidLabel,
                        "sample " + std::to_string(s) + " has no true label; clean data must be labelled");
}

FeatureBank FeatureBank::subset(std::span<const std::size_t> indices) const {
    FeatureBank out(n_layers, dim, n_classes, indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto s = indices[k];
        out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(s));
        out.true_labels[k] = true_labels[s];
        out.predicted_labels[k] = predicted_labels[s];
    }
    return out;
}

FeatureBank FeatureBank::select_layers(std::span<const std::size_t> layers) const {
    if (layers.empty()) throw Error(ErrorCode::InvalidConfig, "no layers selected");
    FeatureBank out(layers.size(), dim, n_classes, n_samples());
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (layers[k] < 1 || layers[k] > n_layers)
            throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(layers[k]) + " outside [1, " +
                                                          std::to_string(n_layers) + "]");
        out.layer(k) = layer(layers[k] - 1);
    }
    out.true_labels = true_labels;
    out.predicted_labels = predicted_labels;
    return out;
}

std::vector<std::size_t> FeatureBank::predicted_as(std::int32_t label) const {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < n_samples(); ++s)
        if (predicted_labels[s] == label) out.push_back(s);
    return out;
}

bool FeatureBank::operator==(const FeatureBank& other) const {
    return n_layers == other.n_layers && dim == other.dim && n_classes == other.n_classes &&
           true_labels == other.true_labels && predicted_labels == other.predicted_labels &&
           features.rows() == other.features.rows() && features.cols() == other.features.cols() &&
           features == other.features;
}

}  // namespace dan
