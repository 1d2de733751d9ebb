#pragma once

// Synthetic data with known class densities.
//
// Parabolic-Gaussian model: with g the standard normal density,
//   N(x, y) = g(x) g(y - x^2 + 3),   P(x, y) = g(x) g(y - x^2).
// In terms of u = y - x^2 the density ratio is P/N = exp(3u + 4.5), so every
// optimal boundary is a parabola y = x^2 - c(q) with
//   c(q) = 1.5 + ln(q / (1 - q)) / 3.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "boundary.hpp"
#include "error.hpp"
#include "model.hpp"
#include "objective.hpp"
#include "optimizer.hpp"

namespace prevq {

/// splitmix64 finalizer; derives independent stream seeds from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) noexcept
{
    return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

/// n draws from the parabolic-Gaussian class density of `label`.
inline PointSet sample_parabolic(Eigen::Index n, Label label, std::uint64_t seed)
{
    require(n >= 1, Errc::invalid_argument, "sample count must be >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shift = label == Label::negative ? -3.0 : 0.0;
    PointSet out(2, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double x = normal(rng);
        const double u = normal(rng);
        out(0, j) = x;
        out(1, j) = u + x * x + shift;
    }
    return out;
}

inline TrainingPopulation sample_parabolic_population(Eigen::Index n_negative,
                                                      Eigen::Index n_positive,
                                                      std::uint64_t seed)
{
    return {sample_parabolic(n_negative, Label::negative, stream_seed(seed, 0)),
            sample_parabolic(n_positive, Label::positive, stream_seed(seed, 1))};
}

/// Test population whose labels are independent Bernoulli(q) draws.
inline TestPopulation sample_parabolic_test(Eigen::Index s, double q, std::uint64_t seed)
{
    require(s >= 1, Errc::invalid_argument, "sample count must be >= 1");
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "q must lie in [0, 1]");
    Rng rng(stream_seed(seed, 2));
    std::bernoulli_distribution coin(q);
    std::vector<Label> labels(static_cast<std::size_t>(s));
    Eigen::Index n_pos = 0;
    for (auto& l : labels) {
        l = coin(rng) ? Label::positive : Label::negative;
        n_pos += l == Label::positive;
    }
    const PointSet pos = n_pos > 0 ? sample_parabolic(n_pos, Label::positive, stream_seed(seed, 3))
                                   : PointSet(2, 0);
    const PointSet neg = s - n_pos > 0
                           ? sample_parabolic(s - n_pos, Label::negative, stream_seed(seed, 4))
                           : PointSet(2, 0);
    TestPopulation test;
    test.samples.resize(2, s);
    Eigen::Index ip = 0;
    Eigen::Index in = 0;
    for (Eigen::Index j = 0; j < s; ++j)
        test.samples.col(j) = labels[static_cast<std::size_t>(j)] == Label::positive
                                ? pos.col(ip++)
                                : neg.col(in++);
    test.true_labels = std::move(labels);
    return test;
}

/// Offset c(q) of the optimal parabola y = x^2 - c(q).
inline double parabolic_offset(double q)
{
    require(q > 0.0 && q < 1.0, Errc::invalid_argument, "q must lie in (0, 1)");
    return 1.5 + std::log(q / (1.0 - q)) / 3.0;
}

/// Optimal boundary y - x^2 + c(q) = 0, oriented so the positive class
/// (larger y - x^2) has B > 0.
inline QuadricParams true_boundary(double q)
{
    Matrix a = Matrix::Zero(3, 3);
    a(0, 0) = -1.0;
    a(1, 2) = a(2, 1) = 0.5;
    a(2, 2) = parabolic_offset(q);
    return QuadricParams::from_matrix(a);
}

/// Reference matrix of the q = 1/2 boundary, B = x^2 - y - 1.5. Its sign is
/// opposite to true_boundary(0.5); comparisons go through align_scale.
inline Matrix reference_matrix()
{
    Matrix a(3, 3);
    a << 1.0, 0.0, 0.0, 0.0, 0.0, -0.5, 0.0, -0.5, -1.5;
    return a;
}

/// Standard normal density.
inline double normal_pdf(double x) noexcept
{
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double parabolic_density(const Measurement& r, Label label)
{
    const double shift = label == Label::negative ? 3.0 : 0.0;
    return normal_pdf(r[0]) * normal_pdf(r[1] - r[0] * r[0] + shift);
}

/// N / (N + P) for the parabolic-Gaussian model in closed form.
inline double parabolic_prevalence_function(const Measurement& r)
{
    const double u = r[1] - r[0] * r[0];
    return 1.0 / (1.0 + std::exp(3.0 * u + 4.5));
}

/// Frobenius distance after aligning scale: min over real c of
/// ||reference - c estimate||_F^2. A negative c absorbs a global sign flip.
inline double aligned_frobenius_sq(const Matrix& reference, const Matrix& estimate)
{
    require(reference.rows() == estimate.rows() && reference.cols() == estimate.cols(),
            Errc::dimension_mismatch, "matrix shapes differ");
    const double denom = estimate.squaredNorm();
    const double c = denom > 0.0 ? (reference.array() * estimate.array()).sum() / denom : 0.0;
    return (reference - c * estimate).squaredNorm();
}

/// Estimate rescaled by the same least-squares factor.
inline Matrix align_scale(const Matrix& reference, const Matrix& estimate)
{
    const double denom = estimate.squaredNorm();
    const double c = denom > 0.0 ? (reference.array() * estimate.array()).sum() / denom : 0.0;
    return c * estimate;
}

/// Two-dimensional stand-in for log-transformed serology readouts: a tight,
/// anti-diagonally elongated negative cloud and a positive class that mixes
/// strong responders with responders to only one of the two antigens. No
/// straight line separates the classes well.
inline TrainingPopulation sample_elisa_like(Eigen::Index n_negative, Eigen::Index n_positive,
                                            std::uint64_t seed)
{
    require(n_negative >= 1 && n_positive >= 1, Errc::invalid_argument,
            "sample counts must be >= 1");
    Rng rng(stream_seed(seed, 10));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    PointSet neg(2, n_negative);
    for (Eigen::Index j = 0; j < n_negative; ++j) {
        const double a = normal(rng);
        const double b = normal(rng);
        neg(0, j) = 0.45 * a + 0.6363 * b;
        neg(1, j) = 0.45 * a - 0.6363 * b;
    }
    PointSet pos(2, n_positive);
    for (Eigen::Index j = 0; j < n_positive; ++j) {
        const double kind = uniform(rng);
        const double a = normal(rng);
        const double b = normal(rng);
        if (kind < 0.5) {
            pos(0, j) = 3.0 + 0.7 * a;
            pos(1, j) = 3.0 + 0.7 * b;
        } else if (kind < 0.75) {
            pos(0, j) = 2.6 + 0.5 * a;
            pos(1, j) = -0.6 + 0.5 * b;
        } else {
            pos(0, j) = -0.6 + 0.5 * a;
            pos(1, j) = 2.6 + 0.5 * b;
        }
    }
    return {std::move(neg), std::move(pos)};
}

struct ConvergenceReport {
    std::vector<Eigen::Index> sample_sizes;
    std::vector<double> mean_sq_frobenius;
    int replicates = 0;
    double slope = 0.0;
};

/// Least-squares slope of log(value) against log(size).
inline double log_log_slope(const std::vector<Eigen::Index>& sizes,
                            const std::vector<double>& values)
{
    const auto n = static_cast<double>(sizes.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        mx += std::log(static_cast<double>(sizes[i]));
        my += std::log(values[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double dx = std::log(static_cast<double>(sizes[i])) - mx;
        sxy += dx * (std::log(values[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Fit of one parabolic-Gaussian replicate with S/2 points per class, started
/// from the known optimum with the fixed schedule {10^-1, ..., 10^-5}.
inline QuadricParams fit_parabolic_replicate(Eigen::Index total, std::uint64_t seed,
                                             const MinimizeOptions& opts = {})
{
    const TrainingPopulation pop = sample_parabolic_population(total / 2, total / 2, seed);
    return homotopy_run(pop, 0.5, true_boundary(0.5), SigmaSchedule::decades(1, 5), opts)
        .final_params;
}

/// Mean aligned Frobenius error against the reference matrix for
/// S = 200 * 2^k, k = 0..k_max, over M replicates each.
inline ConvergenceReport convergence_study(int k_max, int replicates, std::uint64_t seed,
                                           const MinimizeOptions& opts = {})
{
    require(k_max >= 1, Errc::invalid_argument, "k_max must be >= 1");
    require(replicates >= 2, Errc::invalid_argument, "need at least two replicates");
    ConvergenceReport report;
    report.replicates = replicates;
    const Matrix reference = reference_matrix();
    for (int k = 0; k <= k_max; ++k) {
        const Eigen::Index total = 200 * (Eigen::Index{1} << k);
        double sum = 0.0;
        for (int i = 0; i < replicates; ++i) {
            const auto s = stream_seed(seed, static_cast<std::uint64_t>(k) * 1000003ULL
                                                 + static_cast<std::uint64_t>(i));
            sum += aligned_frobenius_sq(reference, fit_parabolic_replicate(total, s, opts).matrix());
        }
        report.sample_sizes.push_back(total);
        report.mean_sq_frobenius.push_back(sum / replicates);
    }
    report.slope = log_log_slope(report.sample_sizes, report.mean_sq_frobenius);
    return report;
}

} // namespace prevq
