#include <gtest/gtest.h>

#include <prevq/synth.hpp>

#include "oracles.hpp"

using namespace prevq;

namespace {

double mean_u(const PointSet& p)
{
    return (p.row(1).array() - p.row(0).array().square()).mean();
}

} // namespace

TEST(SampleParabolic, Moments)
{
    EXPECT_NEAR(mean_u(sample_parabolic(10000, Label::positive, 1)), 0.0, 0.05);
    EXPECT_NEAR(mean_u(sample_parabolic(10000, Label::negative, 2)), -3.0, 0.05);
    const PointSet p = sample_parabolic(10000, Label::positive, 3);
    EXPECT_NEAR(p.row(0).mean(), 0.0, 0.05);
    EXPECT_NEAR(p.row(0).array().square().mean(), 1.0, 0.05);
}

TEST(SampleParabolic, Reproducible)
{
    EXPECT_EQ(sample_parabolic(50, Label::positive, 9), sample_parabolic(50, Label::positive, 9));
    EXPECT_NE(sample_parabolic(50, Label::positive, 9), sample_parabolic(50, Label::positive, 10));
    EXPECT_EQ(sample_parabolic_population(20, 30, 4), sample_parabolic_population(20, 30, 4));
}

TEST(SampleParabolicTest, LabelsAndCounts)
{
    const TestPopulation t = sample_parabolic_test(4000, 0.25, 6);
    ASSERT_TRUE(t.true_labels.has_value());
    ASSERT_EQ(t.size(), 4000);
    double pos = 0.0;
    double u_pos = 0.0;
    for (Eigen::Index c = 0; c < t.size(); ++c)
        if ((*t.true_labels)[static_cast<std::size_t>(c)] == Label::positive) {
            pos += 1.0;
            u_pos += t.samples(1, c) - t.samples(0, c) * t.samples(0, c);
        }
    EXPECT_NEAR(pos / 4000.0, 0.25, 0.03);
    EXPECT_NEAR(u_pos / pos, 0.0, 0.1);
    EXPECT_THROW(sample_parabolic_test(10, 1.5, 1), Error);
}

TEST(TrueBoundary, MatchesReferenceUpToScale)
{
    EXPECT_NEAR(aligned_frobenius_sq(reference_matrix(), true_boundary(0.5).matrix()), 0.0, 1e-24);
    const Matrix aligned = align_scale(reference_matrix(), true_boundary(0.5).matrix());
    EXPECT_TRUE(aligned.isApprox(reference_matrix()));
}

TEST(TrueBoundary, PointOnCurve)
{
    Measurement r(2);
    r << 1.0, -0.5;
    EXPECT_DOUBLE_EQ(quadric_eval(true_boundary(0.5), r), 0.0);
}

TEST(TrueBoundary, ShiftedLevel)
{
    EXPECT_NEAR(parabolic_offset(0.9), 1.5 + std::log(9.0) / 3.0, 1e-15);
    EXPECT_NEAR(parabolic_offset(0.9), 2.2324, 1e-4);
    for (double x : {-1.0, 0.0, 0.7}) {
        Measurement r(2);
        r << x, oracle::parabolic_level_y(x, 0.9);
        EXPECT_NEAR(quadric_eval(true_boundary(0.9), r), 0.0, 1e-14);
    }
}

TEST(TrueBoundary, AgreesWithDensityRatio)
{
    for (double q : {0.1, 0.4, 0.75}) {
        Measurement r(2);
        r << 0.4, oracle::parabolic_level_y(0.4, q);
        const double n = parabolic_density(r, Label::negative);
        const double p = parabolic_density(r, Label::positive);
        EXPECT_NEAR(n / (n + p), q, 1e-12);
        EXPECT_NEAR(parabolic_prevalence_function(r), q, 1e-12);
    }
}

TEST(Frobenius, AlignmentAbsorbsSignAndScale)
{
    const Matrix a = reference_matrix();
    EXPECT_NEAR(aligned_frobenius_sq(a, -3.0 * a), 0.0, 1e-24);
    EXPECT_NEAR(aligned_frobenius_sq(a, Matrix::Zero(3, 3)), a.squaredNorm(), 1e-15);
    EXPECT_THROW(aligned_frobenius_sq(a, Matrix::Zero(2, 2)), Error);
}

TEST(LogLogSlope, ExactPowerLaw)
{
    const std::vector<Eigen::Index> s{100, 200, 400, 800};
    std::vector<double> v;
    for (auto x : s) v.push_back(5.0 / static_cast<double>(x));
    EXPECT_NEAR(log_log_slope(s, v), -1.0, 1e-12);
}

TEST(ConvergenceStudy, Shape)
{
    const ConvergenceReport r = convergence_study(1, 2, 3);
    ASSERT_EQ(r.sample_sizes.size(), 2u);
    EXPECT_EQ(r.sample_sizes[0], 200);
    EXPECT_EQ(r.sample_sizes[1], 400);
    for (double v : r.mean_sq_frobenius) EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(r.slope));
    EXPECT_THROW(convergence_study(0, 2, 1), Error);
    EXPECT_THROW(convergence_study(1, 1, 1), Error);
}

TEST(ElisaLike, ClassesOverlapLittle)
{
    const TrainingPopulation pop = sample_elisa_like(192, 268, 1);
    EXPECT_EQ(pop.n_negative(), 192);
    EXPECT_EQ(pop.n_positive(), 268);
    EXPECT_EQ(pop, sample_elisa_like(192, 268, 1));
    EXPECT_LT(pop.negatives().rowwise().mean().norm(), 0.2);
}
