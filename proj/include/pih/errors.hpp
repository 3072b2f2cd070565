#pragma once

#include <stdexcept>
#include <string>

namespace pih {

/// Base class for all domain errors thrown by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateCloud : Error {
    explicit DegenerateCloud(const std::string& msg) : Error(msg) {}
};
struct InvalidDimension : Error {
    explicit InvalidDimension(const std::string& msg) : Error(msg) {}
};
struct PegExceedsHole : Error {
    explicit PegExceedsHole(const std::string& msg) : Error(msg) {}
};
struct CollinearContacts : Error {
    explicit CollinearContacts(const std::string& msg) : Error(msg) {}
};
struct JointLimit : Error {
    explicit JointLimit(const std::string& msg) : Error(msg) {}
};
struct InfeasibleTriangle : Error {
    explicit InfeasibleTriangle(const std::string& msg) : Error(msg) {}
};
struct NonConvergence : Error {
    explicit NonConvergence(const std::string& msg) : Error(msg) {}
};
struct DivergedTraining : Error {
    explicit DivergedTraining(const std::string& msg) : Error(msg) {}
};
struct WorkspaceExceeded : Error {
    explicit WorkspaceExceeded(const std::string& msg) : Error(msg) {}
};
struct SolverFailure : Error {
    explicit SolverFailure(const std::string& msg) : Error(msg) {}
};
struct GraspInfeasible : Error {
    explicit GraspInfeasible(const std::string& msg) : Error(msg) {}
};
struct WihmWorkspaceExceeded : Error {
    explicit WihmWorkspaceExceeded(const std::string& msg) : Error(msg) {}
};
struct TimeoutExceeded : Error {
    explicit TimeoutExceeded(const std::string& msg) : Error(msg) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};
struct UnknownObject : Error {
    explicit UnknownObject(const std::string& msg) : Error(msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace pih
