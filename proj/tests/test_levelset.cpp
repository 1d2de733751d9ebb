#include <gtest/gtest.h>

#include <random>

#include <prevq/levelset.hpp>
#include <prevq/synth.hpp>

#include "oracles.hpp"

using namespace prevq;

namespace {

Measurement pt(double x, double y)
{
    Measurement r(2);
    r << x, y;
    return r;
}

// The exact optimal family of the parabolic-Gaussian model.
LevelSetFamily analytic_family()
{
    LevelSetFamily f;
    f.q_grid = default_q_grid();
    for (double q : f.q_grid) f.params.push_back(true_boundary(q));
    return f;
}

TrainingPopulation unit_square_corners()
{
    PointSet neg(2, 2);
    neg << 0, 1, 0, 0;
    PointSet pos(2, 2);
    pos << 0, 1, 1, 1;
    return {neg, pos};
}

} // namespace

TEST(QGrid, DefaultAndValidation)
{
    const auto g = default_q_grid();
    ASSERT_EQ(g.size(), 19u);
    EXPECT_DOUBLE_EQ(g.front(), 0.05);
    EXPECT_DOUBLE_EQ(g.back(), 0.95);
    EXPECT_THROW(validate_q_grid({0.5, 0.4}), Error);
    EXPECT_THROW(validate_q_grid({0.0, 0.4}), Error);
    EXPECT_THROW(validate_q_grid({}), Error);
}

TEST(ShadowGrid, SpansPaddedBox)
{
    const PointSet s = shadow_grid(unit_square_corners(), 10);
    ASSERT_EQ(s.cols(), 100);
    EXPECT_NEAR(s.row(0).minCoeff(), -0.1, 1e-15);
    EXPECT_NEAR(s.row(0).maxCoeff(), 1.1, 1e-15);
    EXPECT_NEAR(s.row(1).minCoeff(), -0.1, 1e-15);
    EXPECT_NEAR(s.row(1).maxCoeff(), 1.1, 1e-15);
    // Distinct points.
    for (Eigen::Index a = 0; a < s.cols(); ++a)
        for (Eigen::Index b = a + 1; b < s.cols(); ++b) ASSERT_GT((s.col(a) - s.col(b)).norm(), 1e-9);
}

TEST(ShadowGrid, SinglePointAtCenter)
{
    const PointSet s = shadow_grid(unit_square_corners(), 1);
    ASSERT_EQ(s.cols(), 1);
    EXPECT_NEAR(s(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(s(1, 0), 0.5, 1e-15);
}

TEST(ShadowGrid, ExtraPointsAppended)
{
    const PointSet s = shadow_grid(unit_square_corners(), 3, {pt(-1.91, -2.25)});
    ASSERT_EQ(s.cols(), 10);
    EXPECT_EQ(s(0, 9), -1.91);
    EXPECT_EQ(s(1, 9), -2.25);
    EXPECT_THROW(shadow_grid(unit_square_corners(), 3, {Measurement::Zero(3)}), Error);
}

TEST(Penalty, HingeValueAndGradient)
{
    std::mt19937_64 rng(5);
    const TrainingPopulation pop = sample_parabolic_population(30, 30, 4);
    const auto features = std::make_shared<const PopulationFeatures>(pop);
    const PointSet shadow = shadow_grid(pop, 4);
    const std::vector<double> grid{0.2, 0.5, 0.8};
    for (int trial = 0; trial < 20; ++trial) {
        const LevelSetObjective obj(features, grid, shadow, 0.5, 3.0);
        const Vector x = oracle::random_vector(obj.n_params(), rng, 0.5);
        Vector g;
        const double value = obj.penalty(x, &g);
        // Hinge by explicit loops.
        double expected = 0.0;
        const auto params = unstack_params(x, 2);
        for (Eigen::Index c = 0; c < shadow.cols(); ++c)
            for (std::size_t j = 0; j + 1 < params.size(); ++j) {
                const double d = oracle::dense_quadric(params[j].matrix(), shadow.col(c))
                               - oracle::dense_quadric(params[j + 1].matrix(), shadow.col(c));
                expected += d > 0.0 ? d * d : 0.0;
            }
        EXPECT_NEAR(value, expected, 1e-10 * (1.0 + expected));
        const auto pf = [&](const Vector& v) { return obj.penalty(v, nullptr); };
        EXPECT_LT(oracle::relative_error(g, oracle::central_gradient(pf, x)), 1e-5);
        Vector full;
        obj(x, full);
        const auto ff = [&](const Vector& v) {
            Vector tmp;
            return obj(v, tmp);
        };
        EXPECT_LT(oracle::relative_error(full, oracle::central_gradient(ff, x)), 1e-5);
    }
}

TEST(Penalty, ZeroForOrderedFamily)
{
    const TrainingPopulation pop = sample_parabolic_population(30, 30, 4);
    const LevelSetObjective obj(std::make_shared<const PopulationFeatures>(pop), {0.2, 0.5, 0.8},
                                shadow_grid(pop, 5), 0.1, 1.0);
    const Vector x = stack_params({true_boundary(0.2), true_boundary(0.5), true_boundary(0.8)});
    EXPECT_EQ(obj.penalty(x, nullptr), 0.0);
    EXPECT_EQ(monotonicity_violation(unstack_params(x, 2), shadow_grid(pop, 5)), 0.0);
}

TEST(StackParams, RoundTrip)
{
    const std::vector<QuadricParams> p{true_boundary(0.1), true_boundary(0.7)};
    const auto back = unstack_params(stack_params(p), 2);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], p[0]);
    EXPECT_EQ(back[1], p[1]);
}

TEST(FitLevelsets, SingleLevelIsPlainHomotopy)
{
    const TrainingPopulation pop = sample_parabolic_population(200, 200, 21);
    const SigmaSchedule schedule = sigma_schedule_from_data(pop, 4);
    const LevelSetFamily f = fit_levelsets(pop, {0.3}, PointSet(2, 0), schedule);
    const HomotopyResult h = homotopy_run(pop, 0.3, hyperplane_init(pop), schedule);
    ASSERT_EQ(f.params.size(), 1u);
    EXPECT_EQ(f.params[0], h.final_params);
    EXPECT_EQ(f.penalty_weight, 0.0);
}

TEST(FitLevelsets, SmallFamilyIsMonotone)
{
    const TrainingPopulation pop = sample_parabolic_population(400, 400, 22);
    const std::vector<double> grid{0.2, 0.4, 0.6, 0.8};
    const LevelSetFamily f =
        fit_levelsets(pop, grid, shadow_grid(pop, 6), sigma_schedule_from_data(pop, 5));
    EXPECT_LE(f.constraint_violation, 1e-8);
    EXPECT_EQ(f.grid_violations, 0);
    EXPECT_NO_THROW(assert_monotone(f, 50));
    // Higher prevalence pushes the boundary down (toward negatives).
    for (double x : {-1.0, 0.0, 1.0}) {
        const Measurement r = pt(x, x * x - 1.5);
        const auto classes = classes_across_levels(f, r);
        EXPECT_EQ(classes.front(), Label::negative);
        EXPECT_EQ(classes.back(), Label::positive);
    }
}

TEST(FitLevelsets, ArgumentChecks)
{
    const TrainingPopulation pop = sample_parabolic_population(20, 20, 1);
    const SigmaSchedule s({1.0});
    EXPECT_THROW(fit_levelsets(pop, {0.3, 0.6}, PointSet(2, 0), s), Error);
    EXPECT_THROW(fit_levelsets(pop, {0.6, 0.3}, shadow_grid(pop, 2), s), Error);
    EXPECT_THROW(fit_levelsets(pop, {0.3, 0.6}, PointSet::Zero(3, 2), s), Error);
}

TEST(FitLevelsets, UnreachableTargetRaises)
{
    const TrainingPopulation pop = sample_parabolic_population(100, 100, 3);
    LevelSetOptions opts;
    opts.penalty_max = 1.0;
    opts.penalty_margin = 0.0;
    opts.violation_tol = -1.0;  // cannot be met
    try {
        fit_levelsets(pop, {0.3, 0.6}, shadow_grid(pop, 3), SigmaSchedule({1.0, 0.1}), opts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::constraint_not_satisfied);
    }
}

TEST(Query, AnalyticFamilyBrackets)
{
    const LevelSetFamily f = analytic_family();
    // u = -1.5 gives g = 0.5; nudged off the grid boundary.
    const Measurement near = pt(0.3, 0.09 - 1.5 - 1e-3);
    const UncertaintyBracket mid = prevalence_function_query(f, near);
    EXPECT_NEAR(oracle::parabolic_g(0.3, 0.09 - 1.5), 0.5, 1e-15);
    EXPECT_EQ(mid.q_l, 0.5);
    EXPECT_EQ(mid.q_h, 0.55);
    EXPECT_LE(mid.q_l, oracle::parabolic_g(near[0], near[1]));
    // u = -2.5: g = 1 / (1 + e^-3)
    const double g = oracle::parabolic_g(0.0, -2.5);
    EXPECT_NEAR(g, 0.95257, 1e-5);
    const UncertaintyBracket high = prevalence_function_query(f, pt(0.0, -2.5));
    EXPECT_EQ(high.q_l, 0.95);
    EXPECT_EQ(high.q_h, 1.0);
    EXPECT_LE(high.q_l, g);
}

TEST(Query, PointOnGridBoundary)
{
    const LevelSetFamily f = analytic_family();
    // Exactly on the q = 1/2 curve: class 1 from q = 0.5 on.
    const UncertaintyBracket b = prevalence_function_query(f, pt(1.0, -0.5));
    EXPECT_NEAR(b.q_l, 0.45, 1e-15);
    EXPECT_NEAR(b.q_h, 0.5, 1e-15);
}

TEST(Query, AllPositiveAndAllNegative)
{
    const LevelSetFamily f = analytic_family();
    const UncertaintyBracket pos = prevalence_function_query(f, pt(0.0, 5.0));
    EXPECT_EQ(pos.q_l, 0.0);
    EXPECT_EQ(pos.q_h, 0.05);
    const UncertaintyBracket neg = prevalence_function_query(f, pt(0.0, -10.0));
    EXPECT_EQ(neg.q_l, 0.95);
    EXPECT_EQ(neg.q_h, 1.0);
}

TEST(Query, BracketContainsAnalyticValue)
{
    const LevelSetFamily f = analytic_family();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    std::uniform_real_distribution<double> uu(-3.0, 0.0);
    for (int i = 0; i < 200; ++i) {
        const double x = ux(rng);
        const double y = x * x + uu(rng);
        const UncertaintyBracket b = prevalence_function_query(f, pt(x, y));
        const double g = oracle::parabolic_g(x, y);
        EXPECT_LE(b.q_l, g + 1e-12);
        EXPECT_GE(b.q_h, g - 1e-12);
    }
}

TEST(Query, NonMonotoneRejected)
{
    LevelSetFamily f = analytic_family();
    std::swap(f.params[3], f.params[12]);
    const Measurement r = pt(0.0, -1.5 - std::log(0.3 / 0.7) / 3.0 - 0.01);
    try {
        prevalence_function_query(f, r);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::non_monotone_family);
    }
    EXPECT_GT(count_monotonicity_violations(f, shadow_grid(sample_parabolic_population(50, 50, 1), 20)),
              0);
}

TEST(Oracle, DensityRatio)
{
    EXPECT_EQ(prevalence_function_oracle(0.3, 0.3), 0.5);
    EXPECT_EQ(prevalence_function_oracle(0.2, 0.0), 1.0);
    // At u = -2.5 the negative density is g(u + 3) = g(0.5), the positive g(u) = g(2.5).
    const double r = prevalence_function_oracle(normal_pdf(0.5), normal_pdf(2.5));
    EXPECT_NEAR(r, 0.95257, 1e-5);
    EXPECT_NEAR(r, oracle::parabolic_g(0.0, -2.5), 1e-12);
    try {
        prevalence_function_oracle(0.0, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::both_zero);
    }
}

TEST(LocalAccuracy, Identities)
{
    EXPECT_EQ(local_accuracy(0.37, 0.37, Label::positive), 0.5);
    EXPECT_NEAR(local_accuracy(0.5, 0.3, Label::positive), 0.7, 1e-15);
    EXPECT_EQ(local_accuracy(0.4, 0.0, Label::positive), 1.0);
    EXPECT_EQ(local_accuracy(0.4, 1.0, Label::negative), 1.0);
    for (double q = 0.05; q < 1.0; q += 0.1)
        for (double p = 0.0; p <= 1.0; p += 0.125)
            EXPECT_NEAR(local_accuracy(q, p, Label::positive) + local_accuracy(q, p, Label::negative),
                        1.0, 1e-12);
}

TEST(LocalAccuracy, Errors)
{
    try {
        local_accuracy(0.0, 0.0, Label::positive);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::indeterminate_accuracy);
    }
    EXPECT_THROW(local_accuracy(1.2, 0.5, Label::positive), Error);
    EXPECT_THROW(local_accuracy(0.5, -0.1, Label::positive), Error);
}

TEST(Uncertainty, BoundsFromBracket)
{
    const LevelSetFamily f = analytic_family();
    const Measurement r = pt(0.0, -1.5);  // g = 0.5, on the q = 0.5 boundary
    const UncertaintyBracket b = uncertainty_at(f, r, 0.5, Label::positive);
    EXPECT_NEAR(b.z_low, local_accuracy(0.5, 0.5, Label::positive), 1e-15);
    EXPECT_NEAR(b.z_high, local_accuracy(0.5, 0.45, Label::positive), 1e-15);
    EXPECT_LE(b.z_low, b.z_high);
}
