#pragma once

// Prevalence estimation without classifying individual samples.
//
// For a domain D (here: the positive side of a boundary) let N_D, P_D be the
// fractions of negative and positive training samples in D and Q_D the
// fraction of test samples in D. Since Q_D = q P_D + (1 - q) N_D,
//   q_hat = (Q_D - N_D) / (P_D - N_D).

#include <cmath>
#include <memory>
#include <string>

#include "boundary.hpp"
#include "error.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "optimizer.hpp"

namespace prevq {

struct IndicatorRates {
    double q_tilde = 0.0;  // test samples in D
    double n_tilde = 0.0;  // negative training samples in D
    double p_tilde = 0.0;  // positive training samples in D
};

struct PrevalenceEstimate {
    double q_hat = 0.0;
    IndicatorRates rates;
    bool clamped = false;
};

inline constexpr double degenerate_separation_tolerance = 1e-12;

inline IndicatorRates indicator_rates(const BoundaryClassifier& clf, const TrainingPopulation& pop,
                                      const TestPopulation& test)
{
    validate_population(pop);
    validate_population(test);
    detail::check_dim(clf.quadric(), pop.dim());
    detail::check_dim(clf.quadric(), test.dim());
    IndicatorRates r;
    r.q_tilde = static_cast<double>(clf.count_positive(test.samples))
              / static_cast<double>(test.size());
    r.n_tilde = static_cast<double>(clf.count_positive(pop.negatives()))
              / static_cast<double>(pop.n_negative());
    r.p_tilde = static_cast<double>(clf.count_positive(pop.positives()))
              / static_cast<double>(pop.n_positive());
    return r;
}

/// Out-of-range estimates are clamped to [0, 1] and flagged.
inline PrevalenceEstimate estimate_prevalence(const IndicatorRates& rates)
{
    const double denom = rates.p_tilde - rates.n_tilde;
    require(std::abs(denom) > degenerate_separation_tolerance, Errc::degenerate_separation,
            "positive and negative training rates in D are equal");
    PrevalenceEstimate est;
    est.rates = rates;
    est.q_hat = (rates.q_tilde - rates.n_tilde) / denom;
    if (est.q_hat < 0.0) {
        est.q_hat = 0.0;
        est.clamped = true;
    } else if (est.q_hat > 1.0) {
        est.q_hat = 1.0;
        est.clamped = true;
    }
    return est;
}

struct TwoPassResult {
    PrevalenceEstimate estimate;
    HomotopyResult first_pass;   // q = 1/2, defines D
    HomotopyResult second_pass;  // q = q_hat, the final classifier
    QuadricParams initial;
    SigmaSchedule schedule;
};

/// Fits the q = 1/2 boundary, estimates the test prevalence from its positive
/// side, then refits at the estimate with the same start point and schedule.
inline TwoPassResult two_pass_classify(const TrainingPopulation& pop, const TestPopulation& test,
                                       int k = default_schedule_length,
                                       const MinimizeOptions& opts = {})
{
    validate_population(pop);
    validate_population(test);
    require(test.dim() == pop.dim(), Errc::dimension_mismatch,
            "test and training measurements differ in dimension");
    TwoPassResult out;
    out.initial = hyperplane_init(pop);
    out.schedule = sigma_schedule_from_data(pop, k);
    const auto features = std::make_shared<const PopulationFeatures>(pop);
    out.first_pass = homotopy_run(features, 0.5, out.initial, out.schedule, opts);
    out.estimate = estimate_prevalence(
        indicator_rates(BoundaryClassifier(out.first_pass.final_params), pop, test));
    out.second_pass = homotopy_run(features, out.estimate.q_hat, out.initial, out.schedule, opts);
    return out;
}

} // namespace prevq
