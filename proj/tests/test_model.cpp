#include <gtest/gtest.h>

#include <prevq/model.hpp>

using namespace prevq;

namespace {

PointSet pts(std::initializer_list<std::initializer_list<double>> cols)
{
    std::vector<Measurement> v;
    for (auto c : cols) {
        Measurement r(static_cast<Eigen::Index>(c.size()));
        Eigen::Index i = 0;
        for (double x : c) r[i++] = x;
        v.push_back(r);
    }
    return to_point_set(v);
}

} // namespace

TEST(Population, MinimalIsValid)
{
    const TrainingPopulation pop(pts({{0, 0}}), pts({{1, 1}}));
    EXPECT_NO_THROW(validate_population(pop));
    EXPECT_EQ(pop.dim(), 2);
    EXPECT_DOUBLE_EQ(pop.training_prevalence(), 0.5);
}

TEST(Population, EmptyClassRejected)
{
    try {
        validate_population(TrainingPopulation(PointSet(2, 0), pts({{1, 1}})));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::empty_class);
        EXPECT_EQ(e.name(), "EmptyClass");
    }
}

TEST(Population, MixedDimensionsRejected)
{
    try {
        validate_population(TrainingPopulation(pts({{0, 0}}), pts({{1, 1, 1}})));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::dimension_mismatch);
    }
}

TEST(Population, NonFiniteRejected)
{
    PointSet n = pts({{0, 0}});
    n(1, 0) = std::nan("");
    EXPECT_THROW(validate_population(TrainingPopulation(n, pts({{1, 1}}))), Error);
}

TEST(Population, LabelAccess)
{
    const TrainingPopulation pop(pts({{0, 0}, {1, 0}}), pts({{5, 5}}));
    EXPECT_EQ(pop.of(Label::negative).cols(), 2);
    EXPECT_EQ(pop.of(Label::positive).cols(), 1);
    EXPECT_NEAR(pop.training_prevalence(), 1.0 / 3.0, 1e-15);
}

TEST(Labels, IntegerRoundTrip)
{
    EXPECT_EQ(label_from_int(0), Label::negative);
    EXPECT_EQ(label_from_int(1), Label::positive);
    EXPECT_EQ(to_int(Label::positive), 1);
    EXPECT_THROW(label_from_int(2), Error);
}

TEST(TestPopulationCheck, LabelCountMustMatch)
{
    TestPopulation t{pts({{0, 0}, {1, 1}}), std::vector<Label>{Label::negative}};
    EXPECT_THROW(validate_population(t), Error);
    t.true_labels->push_back(Label::positive);
    EXPECT_NO_THROW(validate_population(t));
}
