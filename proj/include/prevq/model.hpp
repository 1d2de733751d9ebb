#pragma once

// Measurements, labeled training populations and unlabeled test populations.
//
// A population stores each class as an m x n matrix whose columns are the
// individual measurements. Keeping the classes apart lets the objectives sum
// over each class independently.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace prevq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in measurement space (post-transform assay readout).
using Measurement = Eigen::VectorXd;

/// Column-wise collection of measurements sharing one dimension.
using PointSet = Eigen::MatrixXd;

enum class Label : int { negative = 0, positive = 1 };

constexpr int to_int(Label label) noexcept { return static_cast<int>(label); }

inline Label label_from_int(long value)
{
    require(value == 0 || value == 1, Errc::unknown_label_value,
            "label must be 0 or 1, got " + std::to_string(value));
    return value == 1 ? Label::positive : Label::negative;
}

struct LabeledSample {
    Measurement r;
    Label label = Label::negative;
};

/// Builds an m x n point set from a list of equally sized measurements.
inline PointSet to_point_set(const std::vector<Measurement>& points)
{
    if (points.empty()) return PointSet(0, 0);
    const auto m = points.front().size();
    PointSet out(m, static_cast<Eigen::Index>(points.size()));
    for (std::size_t j = 0; j < points.size(); ++j) {
        require(points[j].size() == m, Errc::dimension_mismatch,
                "measurement " + std::to_string(j) + " has dimension "
                    + std::to_string(points[j].size()) + ", expected " + std::to_string(m));
        out.col(static_cast<Eigen::Index>(j)) = points[j];
    }
    return out;
}

inline bool all_finite(const PointSet& points) { return points.allFinite(); }

class TrainingPopulation {
public:
    TrainingPopulation() = default;
    TrainingPopulation(PointSet negatives, PointSet positives)
        : negatives_(std::move(negatives)), positives_(std::move(positives))
    {
    }
    TrainingPopulation(const std::vector<Measurement>& negatives,
                       const std::vector<Measurement>& positives)
        : negatives_(to_point_set(negatives)), positives_(to_point_set(positives))
    {
    }

    const PointSet& negatives() const noexcept { return negatives_; }
    const PointSet& positives() const noexcept { return positives_; }

    Eigen::Index n_negative() const noexcept { return negatives_.cols(); }
    Eigen::Index n_positive() const noexcept { return positives_.cols(); }

    /// Dimension m taken from whichever class is non-empty.
    Eigen::Index dim() const noexcept
    {
        return negatives_.cols() > 0 ? negatives_.rows() : positives_.rows();
    }

    const PointSet& of(Label label) const noexcept
    {
        return label == Label::positive ? positives_ : negatives_;
    }

    /// Training prevalence n_p / (n_p + n_n).
    double training_prevalence() const noexcept
    {
        const auto total = static_cast<double>(n_negative() + n_positive());
        return total > 0 ? static_cast<double>(n_positive()) / total : 0.0;
    }

    friend bool operator==(const TrainingPopulation& a, const TrainingPopulation& b)
    {
        return a.negatives_.rows() == b.negatives_.rows()
            && a.negatives_.cols() == b.negatives_.cols()
            && a.positives_.rows() == b.positives_.rows()
            && a.positives_.cols() == b.positives_.cols() && a.negatives_ == b.negatives_
            && a.positives_ == b.positives_;
    }

private:
    PointSet negatives_;
    PointSet positives_;
};

struct TestPopulation {
    PointSet samples;
    std::optional<std::vector<Label>> true_labels;

    Eigen::Index size() const noexcept { return samples.cols(); }
    Eigen::Index dim() const noexcept { return samples.rows(); }
};

/// Checks the shape invariants every downstream operation relies on.
inline void validate_population(const TrainingPopulation& pop)
{
    require(pop.n_negative() > 0, Errc::empty_class, "negative class is empty");
    require(pop.n_positive() > 0, Errc::empty_class, "positive class is empty");
    require(pop.negatives().rows() == pop.positives().rows(), Errc::dimension_mismatch,
            "negatives have dimension " + std::to_string(pop.negatives().rows())
                + " but positives have dimension " + std::to_string(pop.positives().rows()));
    require(pop.dim() >= 1, Errc::dimension_mismatch, "measurements must have dimension >= 1");
    require(all_finite(pop.negatives()) && all_finite(pop.positives()),
            Errc::non_finite_coordinate, "training population contains NaN or Inf");
}

inline void validate_population(const TestPopulation& test)
{
    require(test.size() > 0, Errc::empty_class, "test population is empty");
    require(test.dim() >= 1, Errc::dimension_mismatch, "measurements must have dimension >= 1");
    require(all_finite(test.samples), Errc::non_finite_coordinate,
            "test population contains NaN or Inf");
    if (test.true_labels) {
        require(static_cast<Eigen::Index>(test.true_labels->size()) == test.size(),
                Errc::dimension_mismatch, "true_labels length differs from sample count");
    }
}

} // namespace prevq
