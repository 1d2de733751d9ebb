#pragma once

// Quadric boundary functions B(r; A) = chi^T A chi with chi = (r, 1).
//
// The symmetric (m+1) x (m+1) matrix A is stored as its upper triangle,
// packed row by row: (0,0), (0,1), ..., (0,m), (1,1), ..., (m,m). Symmetry
// therefore holds by construction and there are (m+1)(m+2)/2 free values.
// B is linear in the packed values, so its gradient with respect to them is
// the feature vector chi_i^2 (diagonal) / 2 chi_i chi_j (off-diagonal).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "error.hpp"
#include "model.hpp"

namespace prevq {

constexpr Eigen::Index packed_size(Eigen::Index dim) noexcept
{
    return (dim + 1) * (dim + 2) / 2;
}

/// Position of entry (row, col), row <= col, in the packed upper triangle of
/// an n x n matrix.
constexpr Eigen::Index packed_index(Eigen::Index n, Eigen::Index row, Eigen::Index col) noexcept
{
    return row * n - row * (row - 1) / 2 + (col - row);
}

class QuadricParams {
public:
    QuadricParams() = default;

    /// Zero form in dimension `dim`.
    explicit QuadricParams(Eigen::Index dim) : dim_(dim), values_(Vector::Zero(packed_size(dim)))
    {
        require(dim >= 1, Errc::dimension_mismatch, "quadric dimension must be >= 1");
    }

    QuadricParams(Eigen::Index dim, Vector values) : dim_(dim), values_(std::move(values))
    {
        require(dim >= 1, Errc::dimension_mismatch, "quadric dimension must be >= 1");
        require(values_.size() == packed_size(dim), Errc::dimension_mismatch,
                "quadric in dimension " + std::to_string(dim) + " needs "
                    + std::to_string(packed_size(dim)) + " parameters, got "
                    + std::to_string(values_.size()));
    }

    /// Packs the upper triangle of a square matrix; the lower triangle is ignored.
    static QuadricParams from_matrix(const Matrix& a)
    {
        require(a.rows() == a.cols() && a.rows() >= 2, Errc::dimension_mismatch,
                "quadric matrix must be square with size >= 2");
        const Eigen::Index n = a.rows();
        Vector packed(packed_size(n - 1));
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) packed[k++] = a(i, j);
        return {n - 1, std::move(packed)};
    }

    /// Expands to the full symmetric matrix; A(i,j) and A(j,i) are copies of
    /// the same packed value.
    Matrix matrix() const
    {
        const Eigen::Index n = dim_ + 1;
        Matrix a(n, n);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) {
                a(i, j) = values_[k];
                a(j, i) = values_[k];
                ++k;
            }
        return a;
    }

    Eigen::Index dim() const noexcept { return dim_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    const Vector& values() const noexcept { return values_; }

    /// Submatrix acting on r alone (the quadratic part of B).
    Matrix quadratic_block() const { return matrix().topLeftCorner(dim_, dim_); }

    QuadricParams scaled(double factor) const { return {dim_, values_ * factor}; }

    friend bool operator==(const QuadricParams& a, const QuadricParams& b)
    {
        return a.dim_ == b.dim_ && a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    Eigen::Index dim_ = 0;
    Vector values_;
};

namespace detail {

inline void check_dim(const QuadricParams& phi, Eigen::Index dim)
{
    require(phi.dim() == dim, Errc::dimension_mismatch,
            "quadric has dimension " + std::to_string(phi.dim()) + ", measurement has "
                + std::to_string(dim));
}

} // namespace detail

/// dB/dparams at r. Independent of the parameters because B is linear in them.
inline Vector quadric_features(const Measurement& r)
{
    const Eigen::Index m = r.size();
    Vector chi(m + 1);
    chi.head(m) = r;
    chi[m] = 1.0;
    Vector out(packed_size(m));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i <= m; ++i) {
        out[k++] = chi[i] * chi[i];
        for (Eigen::Index j = i + 1; j <= m; ++j) out[k++] = 2.0 * chi[i] * chi[j];
    }
    return out;
}

/// Feature matrix for a whole point set: row j holds quadric_features(col j),
/// so B over the set is `features * params`.
inline Matrix quadric_features(const PointSet& points)
{
    const Eigen::Index m = points.rows();
    const Eigen::Index n = points.cols();
    Matrix chi(m + 1, n);
    chi.topRows(m) = points;
    chi.row(m).setOnes();
    Matrix out(n, packed_size(m));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i <= m; ++i)
        for (Eigen::Index j = i; j <= m; ++j) {
            const double factor = i == j ? 1.0 : 2.0;
            out.col(k++) = factor * chi.row(i).cwiseProduct(chi.row(j)).transpose();
        }
    return out;
}

inline double quadric_eval(const QuadricParams& phi, const Measurement& r)
{
    detail::check_dim(phi, r.size());
    return quadric_features(r).dot(phi.values());
}

/// B at every column of `points`.
inline Vector quadric_eval(const QuadricParams& phi, const PointSet& points)
{
    detail::check_dim(phi, points.rows());
    return quadric_features(points) * phi.values();
}

inline Vector quadric_grad(const QuadricParams& phi, const Measurement& r)
{
    detail::check_dim(phi, r.size());
    return quadric_features(r);
}

/// Sign rule for a quadric: B >= 0 is the positive class. Points exactly on
/// the boundary (B == 0) are assigned to the positive class.
class BoundaryClassifier {
public:
    BoundaryClassifier() = default;
    explicit BoundaryClassifier(QuadricParams quadric) : quadric_(std::move(quadric)) {}

    const QuadricParams& quadric() const noexcept { return quadric_; }
    Eigen::Index dim() const noexcept { return quadric_.dim(); }

    double evaluate(const Measurement& r) const { return quadric_eval(quadric_, r); }

    Label classify(const Measurement& r) const
    {
        return evaluate(r) >= 0.0 ? Label::positive : Label::negative;
    }

    /// Number of columns of `points` assigned to the positive class.
    Eigen::Index count_positive(const PointSet& points) const
    {
        if (points.cols() == 0) return 0;
        return (quadric_eval(quadric_, points).array() >= 0.0).count();
    }

private:
    QuadricParams quadric_;
};

inline Label classify(const BoundaryClassifier& clf, const Measurement& r)
{
    return clf.classify(r);
}

namespace detail {

inline Vector column_mean(const PointSet& points) { return points.rowwise().mean(); }

/// Unbiased covariance (divisor n - 1).
inline Matrix covariance(const PointSet& points, const Vector& mean)
{
    const Matrix centered = points.colwise() - mean;
    return centered * centered.transpose() / static_cast<double>(points.cols() - 1);
}

} // namespace detail

/// Result of the weighted hyperplane construction, kept for callers that
/// need the intermediate geometry (the sigma schedule uses |nu|).
struct HyperplaneGeometry {
    Vector mean_negative;
    Vector mean_positive;
    Vector direction;  // nu = mu_p - mu_n
    Vector origin;     // nu_0
    double weight_negative = 0.0;
    double weight_positive = 0.0;
};

inline constexpr double degenerate_means_tolerance = 1e-12;

inline HyperplaneGeometry hyperplane_geometry(const TrainingPopulation& pop)
{
    validate_population(pop);
    require(pop.n_negative() >= 2 && pop.n_positive() >= 2, Errc::insufficient_samples,
            "weighted hyperplane needs at least two samples per class");
    HyperplaneGeometry g;
    g.mean_negative = detail::column_mean(pop.negatives());
    g.mean_positive = detail::column_mean(pop.positives());
    g.direction = g.mean_positive - g.mean_negative;
    require(g.direction.norm() >= degenerate_means_tolerance, Errc::degenerate_means,
            "class means coincide");
    const Matrix cov_n = detail::covariance(pop.negatives(), g.mean_negative);
    const Matrix cov_p = detail::covariance(pop.positives(), g.mean_positive);
    g.weight_negative = std::sqrt(std::max(0.0, g.direction.dot(cov_n * g.direction)));
    g.weight_positive = std::sqrt(std::max(0.0, g.direction.dot(cov_p * g.direction)));
    const double total = g.weight_negative + g.weight_positive;
    const double fraction = total > 0.0 ? g.weight_negative / total : 0.5;
    g.origin = g.mean_negative + fraction * g.direction;
    return g;
}

/// Hyperplane (r - nu_0) . nu = 0 between the class means, written as a
/// quadric with a zero quadratic block. Oriented so B(mu_p) > 0.
inline QuadricParams hyperplane_init(const TrainingPopulation& pop)
{
    const HyperplaneGeometry g = hyperplane_geometry(pop);
    const Eigen::Index m = pop.dim();
    Matrix a = Matrix::Zero(m + 1, m + 1);
    a.topRightCorner(m, 1) = g.direction / 2.0;
    a.bottomLeftCorner(1, m) = g.direction.transpose() / 2.0;
    a(m, m) = -g.direction.dot(g.origin);
    QuadricParams phi = QuadricParams::from_matrix(a);
    if (quadric_eval(phi, g.mean_positive) < 0.0) phi = phi.scaled(-1.0);
    return phi;
}

} // namespace prevq
