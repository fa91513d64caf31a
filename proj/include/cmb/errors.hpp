#ifndef CMB_ERRORS_HPP
#define CMB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cmb {

// Base class for all pipeline errors. Subcommands catch this and report
// the failing stage plus message on stderr.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingFile : Error {
    explicit MissingFile(const std::string& msg) : Error("MissingFile: " + msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("ShapeMismatch: " + msg) {}
};

struct NonFiniteVoxel : Error {
    explicit NonFiniteVoxel(const std::string& msg) : Error("NonFiniteVoxel: " + msg) {}
};

struct UnknownCohort : Error {
    explicit UnknownCohort(const std::string& msg) : Error("UnknownCohort: " + msg) {}
};

struct DegenerateVolume : Error {
    explicit DegenerateVolume(const std::string& msg) : Error("DegenerateVolume: " + msg) {}
};

struct IndexOutOfRange : Error {
    explicit IndexOutOfRange(const std::string& msg) : Error("IndexOutOfRange: " + msg) {}
};

struct NoLesions : Error {
    explicit NoLesions(const std::string& msg) : Error("NoLesions: " + msg) {}
};

struct NoLesionsInDataset : Error {
    explicit NoLesionsInDataset(const std::string& msg) : Error("NoLesionsInDataset: " + msg) {}
};

struct BackendFailure : Error {
    explicit BackendFailure(const std::string& msg) : Error("BackendFailure: " + msg) {}
};

struct EmptyMask : Error {
    explicit EmptyMask(const std::string& msg) : Error("EmptyMask: " + msg) {}
};

struct PlacementFailure : Error {
    explicit PlacementFailure(const std::string& msg) : Error("PlacementFailure: " + msg) {}
};

struct MissingModel : Error {
    explicit MissingModel(const std::string& msg) : Error("MissingModel: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("IoError: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("ConfigError: " + msg) {}
};

} // namespace cmb

#endif
