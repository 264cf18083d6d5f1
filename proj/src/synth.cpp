#include "dan/synth.hpp"

#include "dan/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace dan {

namespace {

enum Stream : std::uint64_t { kGeometry = 1, kTrain, kValid, kTest, kPoisoned };

// splitmix64 finalizer; decorrelates the per-stream seeds.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct Geometry {
    Eigen::MatrixXd offsets;   // L × d
    Eigen::MatrixXd shifts;    // L × d, δ·u_i in anomaly layers, zero elsewhere
};

Geometry make_geometry(const SynthConfig& config) {
    boost::random::mt19937_64 rng(stream_seed(config.seed, kGeometry));
    boost::random::normal_distribution<double> normal;
    const auto l = static_cast<Eigen::Index>(config.n_layers);
    const auto d = static_cast<Eigen::Index>(config.dim);
    Geometry g{Eigen::MatrixXd(l, d), Eigen::MatrixXd::Zero(l, d)};
    for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index k = 0; k < d; ++k) g.offsets(i, k) = 2.0 * normal(rng);
    for (Eigen::Index i = 0; i < l; ++i) {
        Eigen::VectorXd u(d);
        do {
            for (Eigen::Index k = 0; k < d; ++k) u(k) = normal(rng);
        } while (u.norm() == 0.0);
        const bool anomalous = std::find(config.anomaly_layers.begin(), config.anomaly_layers.end(),
                                         static_cast<std::size_t>(i + 1)) != config.anomaly_layers.end();
        if (anomalous) g.shifts.row(i) = config.shift * u.normalized().transpose();
    }
    return g;
}

FeatureBank draw(const SynthConfig& config, const Geometry& g, std::size_t n, std::uint64_t stream, bool poisoned) {
    FeatureBank bank(config.n_layers, config.dim, config.n_classes, n);
    boost::random::mt19937_64 rng(stream_seed(config.seed, stream));
    boost::random::normal_distribution<double> normal;
    const auto l = static_cast<Eigen::Index>(config.n_layers);
    const auto d = static_cast<Eigen::Index>(config.dim);
    for (std::size_t s = 0; s < n; ++s) {
        const auto cls = poisoned ? config.target_label : static_cast<std::int32_t>(s % config.n_classes);
        bank.true_labels[s] = poisoned ? kUnknownLabel : cls;
        bank.predicted_labels[s] = cls;
        const auto row = static_cast<Eigen::Index>(s);
        for (Eigen::Index i = 0; i < l; ++i) {
            for (Eigen::Index k = 0; k < d; ++k) {
                double v = g.offsets(i, k) + normal(rng);
                if (k == 0) v += config.class_separation * cls;
                if (poisoned) v += g.shifts(i, k);
                bank.features(row, i * d + k) = static_cast<float>(v);
            }
        }
    }
    return bank;
}

}  // namespace

void SynthConfig::validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
    if (n_layers < 1 || dim < 1) fail("need L >= 1 and d >= 1");
    if (n_classes < 2) fail("need at least two classes");
    if (!std::isfinite(class_separation)) fail("class separation must be finite");
    if (!(std::isfinite(shift) && shift >= 0.0)) fail("shift must be finite and non-negative");
    if (target_label < 0 || static_cast<std::size_t>(target_label) >= n_classes)
        fail("target label " + std::to_string(target_label) + " outside [0, " + std::to_string(n_classes - 1) + "]");
    for (auto layer : anomaly_layers)
        if (layer < 1 || layer > n_layers)
            fail("anomaly layer " + std::to_string(layer) + " outside [1, " + std::to_string(n_layers) + "]");
}

SynthBanks generate(const SynthConfig& config) {
    config.validate();
    const auto g = make_geometry(config);
    return {draw(config, g, config.n_clean_train, kTrain, false), draw(config, g, config.n_clean_valid, kValid, false),
            draw(config, g, config.n_clean_test, kTest, false), draw(config, g, config.n_poisoned, kPoisoned, true)};
}

}  // namespace dan
