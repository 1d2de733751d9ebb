#pragma once

// Prevalence-weighted empirical error and its smooth surrogate.
//
//   L(phi)       = q/n_p sum_p [1 - H(B/sigma2)] + (1-q)/n_n sum_n H(B/sigma2)
//   L_scale(phi) = (mean_p B^2 + mean_n B^2 - 1)^2
//   L_sr         = L + L_scale
//
// with H(x) = (1 + tanh x)/2. Note the argument is B / sigma2 (the smoothing
// scale is sigma squared, not sigma).

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "boundary.hpp"
#include "error.hpp"
#include "model.hpp"

namespace prevq {

inline constexpr double sigma2_floor = 1e-8;

struct ObjectiveConfig {
    double q = 0.5;
    double sigma2 = 1.0;

    void validate() const
    {
        require(q >= 0.0 && q <= 1.0, Errc::invalid_argument,
                "prevalence weight q must lie in [0, 1], got " + std::to_string(q));
        require(sigma2 >= sigma2_floor, Errc::invalid_argument,
                "sigma2 must be >= 1e-8, got " + std::to_string(sigma2));
    }
};

/// Saturation point of the tanh step; beyond it H is exactly 0 or 1.
inline constexpr double smooth_step_cutoff = 30.0;

inline double smooth_step(double x) noexcept
{
    if (x > smooth_step_cutoff) return 1.0;
    if (x < -smooth_step_cutoff) return 0.0;
    return 0.5 * (1.0 + std::tanh(x));
}

/// H'(x) = sech^2(x) / 2.
inline double smooth_step_derivative(double x) noexcept
{
    if (std::abs(x) > smooth_step_cutoff) return 0.0;
    const double t = std::tanh(x);
    return 0.5 * (1.0 - t * t);
}

/// q-weighted misclassification rate of a boundary on labeled data.
inline double empirical_error(const BoundaryClassifier& clf, const TrainingPopulation& pop,
                              double q)
{
    validate_population(pop);
    detail::check_dim(clf.quadric(), pop.dim());
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "q must lie in [0, 1]");
    const auto missed_positive = pop.n_positive() - clf.count_positive(pop.positives());
    const auto missed_negative = clf.count_positive(pop.negatives());
    return q * static_cast<double>(missed_positive) / static_cast<double>(pop.n_positive())
         + (1.0 - q) * static_cast<double>(missed_negative)
               / static_cast<double>(pop.n_negative());
}

/// Quadric feature matrices of both classes, built once and shared by every
/// objective evaluated on the same population.
class PopulationFeatures {
public:
    explicit PopulationFeatures(const TrainingPopulation& pop)
    {
        validate_population(pop);
        dim_ = pop.dim();
        negatives_ = quadric_features(pop.negatives());
        positives_ = quadric_features(pop.positives());
    }

    Eigen::Index dim() const noexcept { return dim_; }
    Eigen::Index n_params() const noexcept { return packed_size(dim_); }
    const Matrix& negatives() const noexcept { return negatives_; }
    const Matrix& positives() const noexcept { return positives_; }

private:
    Eigen::Index dim_ = 0;
    Matrix negatives_;
    Matrix positives_;
};

/// Pieces of L_sr evaluated together; gradient terms are filled only when requested.
struct ObjectiveTerms {
    double smoothed = 0.0;
    double scale = 0.0;
    Vector smoothed_grad;
    Vector scale_grad;

    double total() const noexcept { return smoothed + scale; }
};

inline ObjectiveTerms evaluate_terms(const PopulationFeatures& features, const Vector& params,
                                     const ObjectiveConfig& cfg, bool with_gradient)
{
    const double n_p = static_cast<double>(features.positives().rows());
    const double n_n = static_cast<double>(features.negatives().rows());
    const Vector b_pos = features.positives() * params;
    const Vector b_neg = features.negatives() * params;
    const double inv_s2 = 1.0 / cfg.sigma2;

    ObjectiveTerms out;
    double miss_pos = 0.0;
    for (Eigen::Index j = 0; j < b_pos.size(); ++j) miss_pos += 1.0 - smooth_step(b_pos[j] * inv_s2);
    double miss_neg = 0.0;
    for (Eigen::Index j = 0; j < b_neg.size(); ++j) miss_neg += smooth_step(b_neg[j] * inv_s2);
    out.smoothed = cfg.q * miss_pos / n_p + (1.0 - cfg.q) * miss_neg / n_n;

    const double spread = b_pos.squaredNorm() / n_p + b_neg.squaredNorm() / n_n - 1.0;
    out.scale = spread * spread;

    if (with_gradient) {
        Vector w_pos(b_pos.size());
        for (Eigen::Index j = 0; j < b_pos.size(); ++j)
            w_pos[j] = smooth_step_derivative(b_pos[j] * inv_s2);
        Vector w_neg(b_neg.size());
        for (Eigen::Index j = 0; j < b_neg.size(); ++j)
            w_neg[j] = smooth_step_derivative(b_neg[j] * inv_s2);
        out.smoothed_grad = (-cfg.q * inv_s2 / n_p) * (features.positives().transpose() * w_pos)
                          + ((1.0 - cfg.q) * inv_s2 / n_n)
                                * (features.negatives().transpose() * w_neg);
        out.scale_grad = (4.0 * spread / n_p) * (features.positives().transpose() * b_pos)
                       + (4.0 * spread / n_n) * (features.negatives().transpose() * b_neg);
    }
    return out;
}

/// L_sr as a callable over raw packed parameters, the form the minimizer consumes.
class ScaleRegularizedObjective {
public:
    ScaleRegularizedObjective(std::shared_ptr<const PopulationFeatures> features,
                              ObjectiveConfig cfg)
        : features_(std::move(features)), cfg_(cfg)
    {
        cfg_.validate();
    }

    ScaleRegularizedObjective(const TrainingPopulation& pop, ObjectiveConfig cfg)
        : ScaleRegularizedObjective(std::make_shared<const PopulationFeatures>(pop), cfg)
    {
    }

    double operator()(const Vector& params, Vector& grad) const
    {
        check(params);
        ObjectiveTerms t = evaluate_terms(*features_, params, cfg_, true);
        grad = t.smoothed_grad + t.scale_grad;
        return t.total();
    }

    double value(const Vector& params) const
    {
        check(params);
        return evaluate_terms(*features_, params, cfg_, false).total();
    }

    const ObjectiveConfig& config() const noexcept { return cfg_; }
    const PopulationFeatures& features() const noexcept { return *features_; }

private:
    void check(const Vector& params) const
    {
        require(params.size() == features_->n_params(), Errc::dimension_mismatch,
                "parameter vector has wrong length for this population");
    }

    std::shared_ptr<const PopulationFeatures> features_;
    ObjectiveConfig cfg_;
};

namespace detail {

inline ObjectiveTerms terms(const QuadricParams& phi, const TrainingPopulation& pop,
                           const ObjectiveConfig& cfg, bool with_gradient)
{
    cfg.validate();
    validate_population(pop);
    check_dim(phi, pop.dim());
    return evaluate_terms(PopulationFeatures(pop), phi.values(), cfg, with_gradient);
}

} // namespace detail

inline double smoothed_loss(const QuadricParams& phi, const TrainingPopulation& pop,
                            const ObjectiveConfig& cfg)
{
    return detail::terms(phi, pop, cfg, false).smoothed;
}

inline Vector smoothed_loss_grad(const QuadricParams& phi, const TrainingPopulation& pop,
                                 const ObjectiveConfig& cfg)
{
    return detail::terms(phi, pop, cfg, true).smoothed_grad;
}

inline double scale_regularizer(const QuadricParams& phi, const TrainingPopulation& pop)
{
    return detail::terms(phi, pop, ObjectiveConfig{}, false).scale;
}

inline Vector scale_regularizer_grad(const QuadricParams& phi, const TrainingPopulation& pop)
{
    return detail::terms(phi, pop, ObjectiveConfig{}, true).scale_grad;
}

inline double total_loss(const QuadricParams& phi, const TrainingPopulation& pop,
                         const ObjectiveConfig& cfg)
{
    return detail::terms(phi, pop, cfg, false).total();
}

inline Vector total_loss_grad(const QuadricParams& phi, const TrainingPopulation& pop,
                              const ObjectiveConfig& cfg)
{
    const ObjectiveTerms t = detail::terms(phi, pop, cfg, true);
    return t.smoothed_grad + t.scale_grad;
}

} // namespace prevq
