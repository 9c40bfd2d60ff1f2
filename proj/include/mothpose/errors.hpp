#pragma once

#include <stdexcept>
#include <string>

namespace mothpose {

/// Base class for every error raised by the toolkit.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct BoundsError : Error { using Error::Error; };
struct GeometryError : Error { using Error::Error; };       // non-integral layer output dims, bad architecture
struct ConsistencyError : Error { using Error::Error; };    // stale activations, mismatched histories
struct MissingWeightsError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };     // non-finite loss/gradient during training
struct InfeasibleAugmentation : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct DegenerateGeometry : Error { using Error::Error; };  // near-parallel rays, zero baseline
struct ProjectionError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace mothpose
