#pragma once

// Class-conditional Gaussian statistics for one feature layer and the
// nearest-centroid Mahalanobis distance built on them.
//
// Everything here is templated on the working scalar; features arrive as
// float32 and are widened to Scalar before any accumulation.

#include "dan/error.hpp"
#include "dan/feature_bank.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dan {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kDefaultRidgeFactor = 1e-3;

/// Ridge term ε added to the pooled covariance. Either a fixed value or a
/// factor of the mean variance, ε = factor · trace(Σ̂) / d, resolved per layer.
struct Ridge {
    enum class Kind : std::uint8_t { Absolute, Relative };

    Kind kind = Kind::Relative;
    double value = kDefaultRidgeFactor;

    static constexpr Ridge absolute(double epsilon) { return {Kind::Absolute, epsilon}; }
    static constexpr Ridge relative(double factor = kDefaultRidgeFactor) { return {Kind::Relative, factor}; }

    bool valid() const { return std::isfinite(value) && value >= 0.0; }

    template <typename Scalar>
    Scalar resolve(const Matrix<Scalar>& pooled_covariance) const {
        if (kind == Kind::Absolute) return static_cast<Scalar>(value);
        return static_cast<Scalar>(value) * pooled_covariance.trace() /
               static_cast<Scalar>(pooled_covariance.rows());
    }

    bool operator==(const Ridge&) const = default;
};

template <typename Scalar = double>
struct LayerStats {
    std::size_t layer_index = 1;
    Matrix<Scalar> centroids;   ///< C × d, row j = mean of class j
    Matrix<Scalar> cov_factor;  ///< d × d lower-triangular, cov_factor · cov_factorᵀ = Σ̂ + εI
    Scalar ridge = 0;
    Scalar norm_mean = 0;  ///< identity normalization until a detector fit sets these
    Scalar norm_std = 1;

    Eigen::Index dim() const { return centroids.cols(); }
    Eigen::Index n_classes() const { return centroids.rows(); }

    /// Regularized covariance reconstructed from the factor.
    Matrix<Scalar> covariance() const { return cov_factor * cov_factor.transpose(); }
};

template <typename Scalar>
struct PooledMoments {
    Matrix<Scalar> centroids;   // C × d
    Matrix<Scalar> covariance;  // d × d, 1/N normalization, class-centered
};

namespace detail {

inline void check_labels(std::span<const std::int32_t> labels, Eigen::Index rows, std::size_t n_classes) {
    if (static_cast<Eigen::Index>(labels.size()) != rows)
        throw Error(ErrorCode::DimensionMismatch, "got " + std::to_string(labels.size()) + " labels for " +
                                                      std::to_string(rows) + " samples");
    if (n_classes < 1) throw Error(ErrorCode::InvalidConfig, "need at least one class");
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] < 0 || labels[s] >= static_cast<std::int32_t>(n_classes))
            throw Error(ErrorCode::InvalidLabel,
                        "sample " + std::to_string(s) + " has label " + std::to_string(labels[s]) +
                            "; fitting needs labels in [0, " + std::to_string(n_classes - 1) + "]");
    }
}

}  // namespace detail

/// Class means and the pooled, class-centered covariance Σ̂ = (1/N) Σ_j Σ_{x∈j} (x−c_j)(x−c_j)ᵀ.
template <typename Scalar = double, typename Derived>
PooledMoments<Scalar> pooled_moments(const Eigen::MatrixBase<Derived>& samples,
                                     std::span<const std::int32_t> labels, std::size_t n_classes) {
    detail::check_labels(labels, samples.rows(), n_classes);
    if (!samples.allFinite()) throw Error(ErrorCode::NonFiniteInput, "fitting data contains non-finite values");

    const Matrix<Scalar> x = samples.template cast<Scalar>();
    const auto n = x.rows();
    const auto d = x.cols();
    const auto c = static_cast<Eigen::Index>(n_classes);

    Matrix<Scalar> sums = Matrix<Scalar>::Zero(c, d);
    std::vector<Eigen::Index> counts(n_classes, 0);
    for (Eigen::Index s = 0; s < n; ++s) {
        sums.row(labels[s]) += x.row(s);
        ++counts[static_cast<std::size_t>(labels[s])];
    }
    for (std::size_t j = 0; j < n_classes; ++j)
        if (counts[j] == 0)
            throw Error(ErrorCode::MissingClass, "class " + std::to_string(j) + " has no samples");

    PooledMoments<Scalar> out;
    out.centroids.resize(c, d);
    for (Eigen::Index j = 0; j < c; ++j)
        out.centroids.row(j) = sums.row(j) / static_cast<Scalar>(counts[static_cast<std::size_t>(j)]);

    Matrix<Scalar> deviations(n, d);
    for (Eigen::Index s = 0; s < n; ++s) deviations.row(s) = x.row(s) - out.centroids.row(labels[s]);

    Matrix<Scalar> lower = Matrix<Scalar>::Zero(d, d);
    lower.template selfadjointView<Eigen::Lower>().rankUpdate(deviations.transpose(),
                                                             Scalar(1) / static_cast<Scalar>(n));
    out.covariance = lower.template selfadjointView<Eigen::Lower>();
    return out;
}

/// Fits centroids and the Cholesky factor of Σ̂ + εI for one layer.
template <typename Scalar = double, typename Derived>
LayerStats<Scalar> fit_layer_stats(const Eigen::MatrixBase<Derived>& samples, std::span<const std::int32_t> labels,
                                   std::size_t n_classes, Ridge ridge = {}) {
    if (!ridge.valid()) throw Error(ErrorCode::InvalidConfig, "ridge must be finite and non-negative");
    auto moments = pooled_moments<Scalar>(samples, labels, n_classes);

    LayerStats<Scalar> stats;
    stats.ridge = ridge.resolve(moments.covariance);
    Matrix<Scalar> regularized = moments.covariance;
    regularized.diagonal().array() += stats.ridge;

    Eigen::LLT<Matrix<Scalar>> llt(regularized);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite())
        throw Error(ErrorCode::NotPositiveDefinite,
                    "pooled covariance + ridge " + std::to_string(static_cast<double>(stats.ridge)) +
                        " is not positive definite; use a positive ridge");
    stats.cov_factor = llt.matrixL();
    stats.centroids = std::move(moments.centroids);
    return stats;
}

template <typename Scalar = double, typename Derived>
LayerStats<Scalar> fit_layer_stats(const Eigen::MatrixBase<Derived>& samples, std::span<const std::int32_t> labels,
                                   std::size_t n_classes, double epsilon) {
    return fit_layer_stats<Scalar>(samples, labels, n_classes, Ridge::absolute(epsilon));
}

/// min_j (x − c_j)ᵀ (Σ̂ + εI)⁻¹ (x − c_j), squared form. Uses ‖L⁻¹(x − c_j)‖² with a
/// single triangular solve against all centroids at once.
template <typename Scalar, typename Derived>
Scalar mahalanobis_min(const LayerStats<Scalar>& stats, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != stats.dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "vector of length " + std::to_string(x.size()) + " scored against d=" + std::to_string(stats.dim()));
    const Vector<Scalar> point = x.derived().reshaped().template cast<Scalar>();
    if (!point.allFinite()) throw Error(ErrorCode::NonFiniteInput, "query vector contains non-finite values");

    Matrix<Scalar> deviations = (-stats.centroids.transpose()).colwise() + point;
    stats.cov_factor.template triangularView<Eigen::Lower>().solveInPlace(deviations);
    return deviations.colwise().squaredNorm().minCoeff();
}

/// Row-wise mahalanobis_min over an n × d block.
template <typename Scalar, typename Derived>
Vector<Scalar> mahalanobis_min_rows(const LayerStats<Scalar>& stats, const Eigen::MatrixBase<Derived>& rows) {
    if (rows.cols() != stats.dim())
        throw Error(ErrorCode::DimensionMismatch,
                    "block has " + std::to_string(rows.cols()) + " columns, expected d=" + std::to_string(stats.dim()));
    Vector<Scalar> out(rows.rows());
    for (Eigen::Index s = 0; s < rows.rows(); ++s) out(s) = mahalanobis_min(stats, rows.row(s));
    return out;
}

/// Fits every layer of a clean, labelled bank; layer_index is 1-based.
template <typename Scalar = double>
std::vector<LayerStats<Scalar>> fit_bank(const FeatureBank& bank, Ridge ridge = {}) {
    bank.validate();
    bank.require_true_labels();
    std::vector<LayerStats<Scalar>> out;
    out.reserve(bank.n_layers);
    for (std::size_t i = 0; i < bank.n_layers; ++i) {
        try {
            out.push_back(fit_layer_stats<Scalar>(bank.layer(i), bank.true_labels, bank.n_classes, ridge));
        } catch (const Error& e) {
            throw Error(e.code(), "layer " + std::to_string(i + 1) + ": " + e.detail());
        }
        out.back().layer_index = i + 1;
    }
    return out;
}

}  // namespace dan
