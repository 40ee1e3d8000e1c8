#ifndef XXZ_ERROR_HPP
#define XXZ_ERROR_HPP

#include <stdexcept>
#include <string>

namespace xxz {

enum class ErrorKind {
    InvalidArgument,
    NoConvergence,
    ContinuityViolation,
    ZeroPartition,
    FitFailure,
    DegenerateSteadyState,
    UnlabeledJump,
    GapCollapse,
    StencilTooCoarse,
    BranchAmbiguity,
    NoSolution,
    IllConditionedFit
};

inline const char* kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ContinuityViolation: return "ContinuityViolation";
    case ErrorKind::ZeroPartition: return "ZeroPartition";
    case ErrorKind::FitFailure: return "FitFailure";
    case ErrorKind::DegenerateSteadyState: return "DegenerateSteadyState";
    case ErrorKind::UnlabeledJump: return "UnlabeledJump";
    case ErrorKind::GapCollapse: return "GapCollapse";
    case ErrorKind::StencilTooCoarse: return "StencilTooCoarse";
    case ErrorKind::BranchAmbiguity: return "BranchAmbiguity";
    case ErrorKind::NoSolution: return "NoSolution";
    case ErrorKind::IllConditionedFit: return "IllConditionedFit";
    }
    return "Unknown";
}

// Carries the failing module so the CLI can name it in its message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& what)
        : std::runtime_error(std::string(kind_name(kind)) + " [" + module + "]: " + what),
          kind_(kind), module_(std::move(module))
    {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

} // namespace xxz

#endif
