// freeq - errors.hpp
// Exception taxonomy shared by all modules.

#pragma once

#include <stdexcept>
#include <string>

namespace freeq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// geometry
struct EmptyProjection : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct EmptySelection : Error { using Error::Error; };

// superpoints
struct TooFewPoints : Error { using Error::Error; };
struct MissingLabelFeature : Error { using Error::Error; };

// spectral
struct ConvergenceFailure : Error { using Error::Error; };
struct TooFewEigenvalues : Error { using Error::Error; };

// embeddings
struct ZeroVector : Error { using Error::Error; };

// agents
struct ParseFailure : Error { using Error::Error; };
struct ProviderUnavailable : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };
struct RateLimited : Error { using Error::Error; };

// scenegraph
struct MissingDepth : Error { using Error::Error; };
struct EmptyScene : Error { using Error::Error; };

// reasoning
struct EmptyGraph : Error { using Error::Error; };
struct NotACandidate : Error { using Error::Error; };

// eval
struct IdMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct PlacementFailure : Error { using Error::Error; };

// io
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };

}  // namespace freeq
