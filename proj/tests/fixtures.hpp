#pragma once

// Random feature banks and detector models for format tests.

#include "dan/dan_score.hpp"
#include "dan/feature_bank.hpp"

#include <cmath>
#include <random>

namespace fixtures {

inline dan::FeatureBank random_bank(std::mt19937_64& rng, std::size_t l, std::size_t d, std::size_t c, std::size_t n) {
    std::normal_distribution<float> normal;
    std::uniform_int_distribution<int> label(-1, static_cast<int>(c) - 1);
    dan::FeatureBank bank(l, d, c, n);
    for (Eigen::Index r = 0; r < bank.features.rows(); ++r)
        for (Eigen::Index k = 0; k < bank.features.cols(); ++k) bank.features(r, k) = normal(rng) * 10.0f;
    for (std::size_t s = 0; s < n; ++s) {
        bank.true_labels[s] = label(rng);
        bank.predicted_labels[s] = label(rng);
    }
    return bank;
}

inline dan::DetectorModel random_model(std::mt19937_64& rng, std::size_t l, std::size_t d, std::size_t c) {
    std::normal_distribution<float> normal;
    dan::DetectorModel model;
    model.aggregation = rng() % 2 ? dan::Aggregation::Max : dan::Aggregation::Mean;
    model.normalization_enabled = rng() % 2;
    if (rng() % 2) model.threshold = normal(rng);
    if (rng() % 2) model.target_label = static_cast<std::int32_t>(rng() % c);
    model.split_fraction = 0.5 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
    model.split_seed = rng();
    model.ridge = rng() % 2 ? dan::Ridge::absolute(std::abs(normal(rng))) : dan::Ridge::relative(1e-3);
    for (std::size_t i = 0; i < l; ++i) {
        dan::LayerStats<double> layer;
        layer.layer_index = i + 1;
        const auto ci = static_cast<Eigen::Index>(c);
        const auto di = static_cast<Eigen::Index>(d);
        layer.centroids = Eigen::MatrixXf::NullaryExpr(ci, di, [&] { return normal(rng); }).cast<double>();
        const Eigen::MatrixXd f = Eigen::MatrixXf::NullaryExpr(di, di, [&] { return normal(rng); }).cast<double>();
        layer.cov_factor = f.triangularView<Eigen::Lower>();
        layer.cov_factor.diagonal() = layer.cov_factor.diagonal().cwiseAbs().array() + 1.0;
        layer.norm_mean = normal(rng);
        layer.norm_std = std::abs(normal(rng)) + 0.1;
        model.layers.push_back(layer);
    }
    return model;
}

}  // namespace fixtures
