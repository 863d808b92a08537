#pragma once

#include <stdexcept>
#include <string>

namespace pedsurv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// pedigree-io
struct MalformedRow : Error { using Error::Error; };
struct UnknownParent : Error { using Error::Error; };
struct SexInconsistentParent : Error { using Error::Error; };
struct AncestryCycle : Error { using Error::Error; };
struct DuplicateIndividualId : Error { using Error::Error; };

// genetic / inference
struct ContradictoryEvidence : Error { using Error::Error; };
struct InconsistentEvidence : Error { using Error::Error; };
struct TooLarge : Error { using Error::Error; };

// survival
struct NoEvents : Error { using Error::Error; };
struct Singular : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };

// simulator
struct NoFamiliesAscertained : Error { using Error::Error; };

// cli
struct UnknownColumn : Error { using Error::Error; };
struct UnknownGroupVariation : Error { using Error::Error; };

}  // namespace pedsurv
