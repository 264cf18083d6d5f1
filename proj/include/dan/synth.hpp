#pragma once

#include "dan/feature_bank.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dan {

/// Synthetic feature geometry: per layer i and class j, clean features are
/// N(Δ·j·e₁ + o_i, I) with a seeded per-layer offset o_i. Poisoned samples
/// follow the target class and, in each anomaly layer, are shifted by δ·u_i
/// for a seeded unit vector u_i. Noise is drawn independently per layer.
struct SynthConfig {
    std::size_t n_layers = 12;
    std::size_t dim = 16;
    std::size_t n_classes = 2;
    double class_separation = 4.0;
    std::size_t n_clean_train = 0;
    std::size_t n_clean_valid = 1000;
    std::size_t n_clean_test = 1000;
    std::size_t n_poisoned = 500;
    std::vector<std::size_t> anomaly_layers{7};  ///< 1-based
    double shift = 6.0;
    std::int32_t target_label = 0;
    std::uint64_t seed = 0;

    /// Throws InvalidConfig.
    void validate() const;
};

struct SynthBanks {
    FeatureBank clean_train;
    FeatureBank clean_valid;
    FeatureBank clean_test;
    FeatureBank poisoned_test;
};

/// Deterministic in the config. Clean samples cycle through the classes
/// (sample s has class s mod C) and are predicted correctly; poisoned samples
/// carry an unknown true label and are predicted as the target label. Each
/// bank draws from its own stream, so changing one count leaves the others
/// untouched.
SynthBanks generate(const SynthConfig& config);

}  // namespace dan
