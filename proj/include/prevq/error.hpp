#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prevq {

enum class Errc {
    dimension_mismatch,
    empty_class,
    non_finite_coordinate,
    degenerate_means,
    insufficient_samples,
    non_finite_loss,
    degenerate_separation,
    constraint_not_satisfied,
    non_monotone_family,
    both_zero,
    indeterminate_accuracy,
    parse_error,
    unknown_label_value,
    io_error,
    unsupported_dimension,
    invalid_argument,
};

constexpr std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_class: return "EmptyClass";
    case Errc::non_finite_coordinate: return "NonFiniteCoordinate";
    case Errc::degenerate_means: return "DegenerateMeans";
    case Errc::insufficient_samples: return "InsufficientSamples";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::degenerate_separation: return "DegenerateSeparation";
    case Errc::constraint_not_satisfied: return "ConstraintNotSatisfied";
    case Errc::non_monotone_family: return "NonMonotoneFamily";
    case Errc::both_zero: return "BothZero";
    case Errc::indeterminate_accuracy: return "IndeterminateAccuracy";
    case Errc::parse_error: return "ParseError";
    case Errc::unknown_label_value: return "UnknownLabelValue";
    case Errc::io_error: return "IoError";
    case Errc::unsupported_dimension: return "UnsupportedDimension";
    case Errc::invalid_argument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes so
/// callers (and the CLI) can report the originating condition by name.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }
    std::string_view name() const noexcept { return errc_name(code_); }

private:
    Errc code_;
};

inline void require(bool condition, Errc code, const std::string& what)
{
    if (!condition) throw Error(code, what);
}

} // namespace prevq
