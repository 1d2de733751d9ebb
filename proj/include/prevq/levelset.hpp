#pragma once

// Families of boundaries over a prevalence grid q_1 < ... < q_theta that do
// not cross, and the pointwise uncertainty they encode.
//
// The family jointly minimizes sum_j L_sr(phi_j; q_j) subject to
//   B(rho_i; phi_j) <= B(rho_i; phi_{j+1})
// at a set of shadow points rho_i. The constraint is enforced with a
// quadratic hinge penalty whose weight is escalated until the largest
// residual falls below tolerance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "boundary.hpp"
#include "error.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "optimizer.hpp"

namespace prevq {

struct LevelSetFamily {
    std::vector<double> q_grid;
    std::vector<QuadricParams> params;
    PointSet shadow_points;
    double constraint_violation = 0.0;
    double penalty_weight = 0.0;
    /// Points of the post-fit evaluation grid whose class is not monotone in q.
    Eigen::Index grid_violations = 0;

    std::size_t levels() const noexcept { return q_grid.size(); }
    Eigen::Index dim() const noexcept { return params.empty() ? 0 : params.front().dim(); }
};

struct UncertaintyBracket {
    double q_l = 0.0;
    double q_h = 1.0;
    double z_low = 0.0;
    double z_high = 1.0;
};

/// q = 0.05, 0.10, ..., 0.95.
inline std::vector<double> default_q_grid()
{
    std::vector<double> grid;
    for (int j = 1; j <= 19; ++j) grid.push_back(j / 20.0);
    return grid;
}

inline void validate_q_grid(const std::vector<double>& grid)
{
    require(!grid.empty(), Errc::invalid_argument, "prevalence grid is empty");
    for (std::size_t j = 0; j < grid.size(); ++j) {
        require(grid[j] > 0.0 && grid[j] < 1.0, Errc::invalid_argument,
                "prevalence grid values must lie in (0, 1)");
        if (j > 0)
            require(grid[j] > grid[j - 1], Errc::invalid_argument,
                    "prevalence grid must be strictly increasing");
    }
}

struct BoundingBox {
    Vector lower;
    Vector upper;
};

/// Axis-aligned box around all training data, widened by `margin` of its
/// extent on every side.
inline BoundingBox bounding_box(const TrainingPopulation& pop, double margin = 0.1)
{
    validate_population(pop);
    Vector lo = pop.negatives().rowwise().minCoeff().cwiseMin(pop.positives().rowwise().minCoeff());
    Vector hi = pop.negatives().rowwise().maxCoeff().cwiseMax(pop.positives().rowwise().maxCoeff());
    const Vector pad = margin * (hi - lo);
    return {lo - pad, hi + pad};
}

inline BoundingBox bounding_box(const PointSet& points)
{
    require(points.cols() > 0, Errc::invalid_argument, "cannot bound an empty point set");
    return {points.rowwise().minCoeff(), points.rowwise().maxCoeff()};
}

/// Uniform tensor grid with `count` points per axis; a single point sits at
/// the box center.
inline PointSet uniform_grid(const BoundingBox& box, int count)
{
    require(count >= 1, Errc::invalid_argument, "grid count must be >= 1");
    const Eigen::Index m = box.lower.size();
    Eigen::Index total = 1;
    for (Eigen::Index i = 0; i < m; ++i) total *= count;
    PointSet out(m, total);
    std::vector<int> index(static_cast<std::size_t>(m), 0);
    for (Eigen::Index c = 0; c < total; ++c) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double t = count == 1 ? 0.5 : static_cast<double>(index[i]) / (count - 1);
            out(i, c) = box.lower[i] + t * (box.upper[i] - box.lower[i]);
        }
        for (Eigen::Index i = m - 1; i >= 0; --i) {
            if (++index[static_cast<std::size_t>(i)] < count) break;
            index[static_cast<std::size_t>(i)] = 0;
        }
    }
    return out;
}

inline PointSet shadow_grid(const TrainingPopulation& pop, int count_per_dim,
                            const std::vector<Measurement>& extra = {})
{
    const PointSet grid = uniform_grid(bounding_box(pop, 0.1), count_per_dim);
    PointSet out(grid.rows(), grid.cols() + static_cast<Eigen::Index>(extra.size()));
    out.leftCols(grid.cols()) = grid;
    for (std::size_t k = 0; k < extra.size(); ++k) {
        require(extra[k].size() == grid.rows(), Errc::dimension_mismatch,
                "extra shadow point has the wrong dimension");
        out.col(grid.cols() + static_cast<Eigen::Index>(k)) = extra[k];
    }
    return out;
}

/// Largest residual max(0, B(rho, phi_j) - B(rho, phi_{j+1})) over all
/// shadow points and consecutive levels.
inline double monotonicity_violation(const std::vector<QuadricParams>& params,
                                     const PointSet& shadow)
{
    if (params.size() < 2 || shadow.cols() == 0) return 0.0;
    const Matrix features = quadric_features(shadow);
    double worst = 0.0;
    Vector prev = features * params.front().values();
    for (std::size_t j = 1; j < params.size(); ++j) {
        const Vector next = features * params[j].values();
        worst = std::max(worst, (prev - next).maxCoeff());
        prev = next;
    }
    return worst;
}

/// Joint objective sum_j L_sr(phi_j; q_j, sigma2) + weight * hinge penalty,
/// over the stacked parameter vector (phi_1, ..., phi_theta).
class LevelSetObjective {
public:
    LevelSetObjective(std::shared_ptr<const PopulationFeatures> features,
                      std::vector<double> q_grid, const PointSet& shadow, double sigma2,
                      double penalty_weight, double margin = 0.0)
        : features_(std::move(features)),
          q_grid_(std::move(q_grid)),
          shadow_features_(shadow.cols() > 0 ? quadric_features(shadow)
                                             : Matrix(0, features_->n_params())),
          sigma2_(sigma2),
          weight_(penalty_weight),
          margin_(margin)
    {
        validate_q_grid(q_grid_);
        require(shadow.cols() == 0 || shadow.rows() == features_->dim(),
                Errc::dimension_mismatch, "shadow points have the wrong dimension");
    }

    Eigen::Index n_params() const noexcept
    {
        return features_->n_params() * static_cast<Eigen::Index>(q_grid_.size());
    }

    /// Penalty sum_{i,j} max(0, B_ij - B_i,j+1 + margin)^2 without the weight.
    double penalty(const Vector& stacked, Vector* grad) const
    {
        const Eigen::Index p = features_->n_params();
        const auto theta = static_cast<Eigen::Index>(q_grid_.size());
        if (grad) grad->setZero(stacked.size());
        double total = 0.0;
        if (theta < 2 || shadow_features_.rows() == 0) return total;
        Vector prev = shadow_features_ * stacked.segment(0, p);
        for (Eigen::Index j = 1; j < theta; ++j) {
            const Vector next = shadow_features_ * stacked.segment(j * p, p);
            const Vector excess = ((prev - next).array() + margin_).cwiseMax(0.0).matrix();
            total += excess.squaredNorm();
            if (grad) {
                const Vector g = 2.0 * (shadow_features_.transpose() * excess);
                grad->segment((j - 1) * p, p) += g;
                grad->segment(j * p, p) -= g;
            }
            prev = next;
        }
        return total;
    }

    double operator()(const Vector& stacked, Vector& grad) const
    {
        require(stacked.size() == n_params(), Errc::dimension_mismatch,
                "stacked parameter vector has the wrong length");
        const Eigen::Index p = features_->n_params();
        grad.setZero(stacked.size());
        double total = 0.0;
        for (std::size_t j = 0; j < q_grid_.size(); ++j) {
            const auto offset = static_cast<Eigen::Index>(j) * p;
            const ObjectiveTerms t = evaluate_terms(*features_, stacked.segment(offset, p),
                                                    ObjectiveConfig{q_grid_[j], sigma2_}, true);
            total += t.total();
            grad.segment(offset, p) = t.smoothed_grad + t.scale_grad;
        }
        if (weight_ > 0.0) {
            Vector pg;
            total += weight_ * penalty(stacked, &pg);
            grad += weight_ * pg;
        }
        return total;
    }

private:
    std::shared_ptr<const PopulationFeatures> features_;
    std::vector<double> q_grid_;
    Matrix shadow_features_;
    double sigma2_;
    double weight_;
    double margin_;
};

struct LevelSetOptions {
    MinimizeOptions inner;
    double penalty_start = 1.0;
    double penalty_factor = 10.0;
    double penalty_max = 1e6;
    double violation_tol = 1e-8;
    /// The hinge acts on B_j - B_{j+1} + margin. A finite weight leaves a
    /// residual of order 1/weight; the margin keeps that residual on the
    /// feasible side of the actual constraint.
    double penalty_margin = 1e-6;
    int check_resolution = 50;
};

inline Vector stack_params(const std::vector<QuadricParams>& params)
{
    const Eigen::Index p = params.front().size();
    Vector out(p * static_cast<Eigen::Index>(params.size()));
    for (std::size_t j = 0; j < params.size(); ++j)
        out.segment(static_cast<Eigen::Index>(j) * p, p) = params[j].values();
    return out;
}

inline std::vector<QuadricParams> unstack_params(const Vector& stacked, Eigen::Index dim)
{
    const Eigen::Index p = packed_size(dim);
    std::vector<QuadricParams> out;
    for (Eigen::Index off = 0; off < stacked.size(); off += p)
        out.emplace_back(dim, stacked.segment(off, p));
    return out;
}

/// Class of r under each level of the family, in grid order.
inline std::vector<Label> classes_across_levels(const LevelSetFamily& family,
                                                const Measurement& r)
{
    std::vector<Label> out;
    out.reserve(family.params.size());
    for (const auto& phi : family.params) out.push_back(BoundaryClassifier(phi).classify(r));
    return out;
}

/// Number of columns of `points` whose class decreases somewhere along the grid.
inline Eigen::Index count_monotonicity_violations(const LevelSetFamily& family,
                                                  const PointSet& points)
{
    if (family.params.size() < 2 || points.cols() == 0) return 0;
    const Matrix features = quadric_features(points);
    Eigen::Array<bool, Eigen::Dynamic, 1> bad = Eigen::Array<bool, Eigen::Dynamic, 1>::Zero(points.cols());
    Eigen::Array<bool, Eigen::Dynamic, 1> prev = (features * family.params.front().values()).array() >= 0.0;
    for (std::size_t j = 1; j < family.params.size(); ++j) {
        const Eigen::Array<bool, Eigen::Dynamic, 1> next =
            (features * family.params[j].values()).array() >= 0.0;
        bad = bad || (prev && !next);
        prev = next;
    }
    return bad.count();
}

/// Checks class monotonicity on a resolution^m grid spanning the shadow points.
inline Eigen::Index grid_monotonicity_violations(const LevelSetFamily& family, int resolution)
{
    if (family.shadow_points.cols() == 0) return 0;
    return count_monotonicity_violations(
        family, uniform_grid(bounding_box(family.shadow_points), resolution));
}

inline void assert_monotone(const LevelSetFamily& family, int resolution)
{
    const Eigen::Index bad = grid_monotonicity_violations(family, resolution);
    require(bad == 0, Errc::non_monotone_family,
            std::to_string(bad) + " evaluation points change class non-monotonically");
}

/// Independent homotopy fits per grid level (all from the weighted
/// hyperplane), followed by the penalized joint fit at the last sigma2.
inline LevelSetFamily fit_levelsets(const TrainingPopulation& pop, const std::vector<double>& q_grid,
                                    const PointSet& shadow, const SigmaSchedule& schedule,
                                    const LevelSetOptions& opts = {})
{
    validate_population(pop);
    validate_q_grid(q_grid);
    require(q_grid.size() < 2 || shadow.cols() > 0, Errc::invalid_argument,
            "more than one level needs at least one shadow point");
    require(shadow.cols() == 0 || shadow.rows() == pop.dim(), Errc::dimension_mismatch,
            "shadow points have the wrong dimension");

    const auto features = std::make_shared<const PopulationFeatures>(pop);
    const QuadricParams start = hyperplane_init(pop);

    LevelSetFamily family;
    family.q_grid = q_grid;
    family.shadow_points = shadow;
    for (double q : q_grid)
        family.params.push_back(homotopy_run(features, q, start, schedule, opts.inner).final_params);

    if (q_grid.size() >= 2) {
        Vector stacked = stack_params(family.params);
        double weight = opts.penalty_start;
        double violation = monotonicity_violation(family.params, shadow);
        while (true) {
            const LevelSetObjective objective(features, q_grid, shadow, schedule.back(), weight,
                                              opts.penalty_margin);
            stacked = minimize(objective, stacked, opts.inner).x;
            violation = monotonicity_violation(unstack_params(stacked, pop.dim()), shadow);
            if (violation <= opts.violation_tol) break;
            require(weight * opts.penalty_factor <= opts.penalty_max * (1.0 + 1e-12),
                    Errc::constraint_not_satisfied,
                    "shadow-point violation " + std::to_string(violation)
                        + " remains after penalty weight " + std::to_string(weight));
            weight *= opts.penalty_factor;
        }
        family.params = unstack_params(stacked, pop.dim());
        family.constraint_violation = violation;
        family.penalty_weight = weight;
    }
    family.grid_violations = grid_monotonicity_violations(family, opts.check_resolution);
    return family;
}

/// Grid bracket [q_l, q_h] around the prevalence at which r switches class.
/// Points positive at every level get (0, q_1); negative at every level get
/// (q_theta, 1).
inline UncertaintyBracket prevalence_function_query(const LevelSetFamily& family,
                                                    const Measurement& r)
{
    require(!family.params.empty(), Errc::invalid_argument, "level-set family is empty");
    const std::vector<Label> classes = classes_across_levels(family, r);
    int switches = 0;
    std::size_t last_negative = classes.size();
    for (std::size_t j = 0; j < classes.size(); ++j) {
        if (j > 0 && classes[j] != classes[j - 1]) {
            require(classes[j - 1] == Label::negative, Errc::non_monotone_family,
                    "class decreases with increasing prevalence");
            ++switches;
        }
        if (classes[j] == Label::negative) last_negative = j;
    }
    require(switches <= 1, Errc::non_monotone_family, "class switches more than once");

    UncertaintyBracket b;
    if (last_negative == classes.size()) {
        b.q_l = 0.0;
        b.q_h = family.q_grid.front();
    } else if (last_negative + 1 == classes.size()) {
        b.q_l = family.q_grid.back();
        b.q_h = 1.0;
    } else {
        b.q_l = family.q_grid[last_negative];
        b.q_h = family.q_grid[last_negative + 1];
    }
    return b;
}

/// N / (N + P) from known densities.
inline double prevalence_function_oracle(double negative_density, double positive_density)
{
    require(negative_density >= 0.0 && positive_density >= 0.0, Errc::invalid_argument,
            "densities must be non-negative");
    const double total = negative_density + positive_density;
    require(total > 0.0, Errc::both_zero, "both class densities vanish");
    return negative_density / total;
}

/// Probability that a sample at r with prevalence function value `q_point` is
/// classified correctly when assigned `assigned` at prevalence q.
inline double local_accuracy(double q, double q_point, Label assigned)
{
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "q must lie in [0, 1]");
    require(q_point >= 0.0 && q_point <= 1.0, Errc::invalid_argument,
            "q_point must lie in [0, 1]");
    const double pos = q * (1.0 - q_point);
    const double neg = (1.0 - q) * q_point;
    const double denom = pos + neg;
    require(denom > 0.0, Errc::indeterminate_accuracy,
            "local accuracy is indeterminate for q = " + std::to_string(q)
                + ", q_point = " + std::to_string(q_point));
    return (assigned == Label::positive ? pos : neg) / denom;
}

/// Bracket plus the local-accuracy range it implies at prevalence q.
inline UncertaintyBracket uncertainty_at(const LevelSetFamily& family, const Measurement& r,
                                         double q, Label assigned)
{
    UncertaintyBracket b = prevalence_function_query(family, r);
    const double z_l = local_accuracy(q, b.q_l, assigned);
    const double z_h = local_accuracy(q, b.q_h, assigned);
    b.z_low = std::min(z_l, z_h);
    b.z_high = std::max(z_l, z_h);
    return b;
}

} // namespace prevq
