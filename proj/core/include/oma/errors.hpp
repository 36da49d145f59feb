#pragma once

#include <stdexcept>
#include <string>

namespace oma {

/// Base type for every error the library raises on purpose. Callers that do
/// not care about the exact condition can catch this one.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };

// population-gen
struct DegenerateMesh : Error { using Error::Error; };
struct NoSupportableNodes : Error { using Error::Error; };

// structural-sim
struct SingularSystem : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };

// spectral
struct BadLength : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };
struct AllZero : Error { using Error::Error; };

// nn-core / gnn-oma
struct ShapeMismatch : Error { using Error::Error; };
struct NotScalarLoss : Error { using Error::Error; };
struct EmptyGraph : Error { using Error::Error; };
struct NoKnownNodes : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct TooFewRecords : Error { using Error::Error; };
struct ZeroTarget : Error { using Error::Error; };

// fdd-baseline
struct NumericalFailure : Error { using Error::Error; };
struct InsufficientPeaks : Error {
    InsufficientPeaks(const std::string& what, int found_count)
        : Error(what), found(found_count) {}
    int found;
};

// evaluation
struct ZeroVector : Error { using Error::Error; };
struct Empty : Error { using Error::Error; };

// harness / persistence
struct SchemaMismatch : Error { using Error::Error; };
struct CorruptPayload : Error { using Error::Error; };

}  // namespace oma
