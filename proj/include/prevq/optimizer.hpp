#pragma once

// Quasi-Newton minimization and the homotopy continuation over a decreasing
// sequence of smoothing scales sigma2_0 > sigma2_1 > ... Each stage starts
// from the previous stage's minimizer.

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "boundary.hpp"
#include "error.hpp"
#include "model.hpp"
#include "objective.hpp"

namespace prevq {

class SigmaSchedule {
public:
    SigmaSchedule() = default;

    explicit SigmaSchedule(std::vector<double> values) : values_(std::move(values))
    {
        require(!values_.empty(), Errc::invalid_argument, "sigma schedule is empty");
        for (std::size_t j = 0; j < values_.size(); ++j) {
            require(std::isfinite(values_[j]) && values_[j] >= sigma2_floor,
                    Errc::invalid_argument, "sigma2 values must be finite and >= 1e-8");
            if (j > 0)
                require(values_[j] < values_[j - 1], Errc::invalid_argument,
                        "sigma schedule must be strictly decreasing");
        }
    }

    /// {10^-j} for j = first..last.
    static SigmaSchedule decades(int first, int last)
    {
        std::vector<double> v;
        for (int j = first; j <= last; ++j) v.push_back(std::pow(10.0, -j));
        return SigmaSchedule(std::move(v));
    }

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double back() const { return values_.back(); }

private:
    std::vector<double> values_;
};

inline constexpr int default_schedule_length = 7;

/// {|nu| 10^-j}, j = 0..K, where nu joins the class means. Entries are
/// clamped to the 1e-8 floor and repeated floor values are dropped.
inline SigmaSchedule sigma_schedule_from_data(const TrainingPopulation& pop,
                                              int k = default_schedule_length)
{
    require(k >= 0, Errc::invalid_argument, "schedule length K must be >= 0");
    validate_population(pop);
    const Vector nu = pop.positives().rowwise().mean() - pop.negatives().rowwise().mean();
    const double length = nu.norm();
    require(length >= degenerate_means_tolerance, Errc::degenerate_means, "class means coincide");
    std::vector<double> values;
    for (int j = 0; j <= k; ++j) {
        const double v = std::max(length * std::pow(10.0, -j), sigma2_floor);
        if (values.empty() || v < values.back()) values.push_back(v);
    }
    return SigmaSchedule(std::move(values));
}

struct MinimizeOptions {
    double tol = 1e-8;
    int max_iter = 500;
    double backtrack = 0.5;
    double sufficient_decrease = 1e-4;
    int max_backtracks = 60;
};

struct MinimizeResult {
    Vector x;
    double loss = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// BFGS with an Armijo backtracking line search.
///
/// `f(x, grad)` returns the objective and writes its gradient. Every accepted
/// step satisfies the sufficient-decrease condition, so the returned loss never
/// exceeds f(x0). When a line search fails the inverse-Hessian approximation is
/// reset to the identity once; a second consecutive failure ends the run with
/// converged = false.
template <class Objective>
MinimizeResult minimize(const Objective& f, Vector x0, const MinimizeOptions& opts = {})
{
    const Eigen::Index n = x0.size();
    MinimizeResult out;
    out.x = std::move(x0);
    Vector g(n);
    out.loss = f(out.x, g);
    require(std::isfinite(out.loss) && g.allFinite(), Errc::non_finite_loss,
            "objective is not finite at the starting point");

    Matrix h = Matrix::Identity(n, n);
    bool h_is_identity = true;
    bool h_scaled = false;
    Vector g_new(n);
    Vector x_new(n);

    for (out.iterations = 0; out.iterations < opts.max_iter; ++out.iterations) {
        out.grad_norm = g.norm();
        if (out.grad_norm <= opts.tol) {
            out.converged = true;
            return out;
        }

        Vector d = -(h * g);
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            h.setIdentity();
            h_is_identity = true;
            d = -g;
            slope = -out.grad_norm * out.grad_norm;
        }

        // Without curvature information the first trial step has unit length.
        double alpha = h_is_identity && !h_scaled ? std::min(1.0, 1.0 / out.grad_norm) : 1.0;
        bool accepted = false;
        bool saw_finite = false;
        double f_new = out.loss;
        for (int k = 0; k < opts.max_backtracks; ++k, alpha *= opts.backtrack) {
            x_new = out.x + alpha * d;
            f_new = f(x_new, g_new);
            if (!std::isfinite(f_new) || !g_new.allFinite()) continue;
            saw_finite = true;
            if (f_new <= out.loss + opts.sufficient_decrease * alpha * slope) {
                accepted = true;
                break;
            }
        }

        if (!accepted) {
            if (!h_is_identity) {
                h.setIdentity();
                h_is_identity = true;
                h_scaled = false;
                continue;
            }
            require(saw_finite, Errc::non_finite_loss,
                    "objective is not finite anywhere along the search direction");
            out.grad_norm = g.norm();
            return out;
        }

        const Vector s = x_new - out.x;
        const Vector y = g_new - g;
        const bool stalled = s.lpNorm<Eigen::Infinity>()
                          <= 1e-16 * (1.0 + out.x.lpNorm<Eigen::Infinity>());
        out.x = x_new;
        out.loss = f_new;
        g = g_new;
        if (stalled) {
            out.grad_norm = g.norm();
            out.converged = out.grad_norm <= opts.tol;
            ++out.iterations;
            return out;
        }

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!h_scaled) {
                h = Matrix::Identity(n, n) * (sy / y.squaredNorm());
                h_scaled = true;
            }
            const double rho = 1.0 / sy;
            const Vector hy = h * y;
            const double yhy = y.dot(hy);
            h += ((1.0 + rho * yhy) * rho) * (s * s.transpose())
               - rho * (hy * s.transpose() + s * hy.transpose());
            h_is_identity = false;
        }
    }
    out.grad_norm = g.norm();
    out.converged = out.grad_norm <= opts.tol;
    return out;
}

struct HomotopyResult {
    QuadricParams final_params;
    std::vector<QuadricParams> stage_params;
    std::vector<double> stage_losses;
    std::vector<bool> converged;
    std::vector<int> iterations;
};

/// Runs one minimization of L_sr per schedule entry, chaining the minimizers.
inline HomotopyResult homotopy_run(std::shared_ptr<const PopulationFeatures> features, double q,
                                   const QuadricParams& phi0, const SigmaSchedule& schedule,
                                   const MinimizeOptions& opts = {})
{
    require(schedule.size() > 0, Errc::invalid_argument, "sigma schedule is empty");
    detail::check_dim(phi0, features->dim());
    HomotopyResult out;
    Vector current = phi0.values();
    for (double sigma2 : schedule.values()) {
        const ScaleRegularizedObjective objective(features, ObjectiveConfig{q, sigma2});
        MinimizeResult stage = minimize(objective, current, opts);
        current = stage.x;
        out.stage_params.emplace_back(phi0.dim(), stage.x);
        out.stage_losses.push_back(stage.loss);
        out.converged.push_back(stage.converged);
        out.iterations.push_back(stage.iterations);
    }
    out.final_params = out.stage_params.back();
    return out;
}

inline HomotopyResult homotopy_run(const TrainingPopulation& pop, double q,
                                   const QuadricParams& phi0, const SigmaSchedule& schedule,
                                   const MinimizeOptions& opts = {})
{
    return homotopy_run(std::make_shared<const PopulationFeatures>(pop), q, phi0, schedule, opts);
}

} // namespace prevq
