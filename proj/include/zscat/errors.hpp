#pragma once

#include <stdexcept>
#include <string>

namespace zscat {

/// Base class for all engine errors.
///
/// Every error carries a process exit code so the command-line driver can map
/// failures onto its documented taxonomy:
///   2 — configuration error (bad scenario file, bad flag value)
///   3 — numerical tolerance failure (integrator, conditioning, route mismatch)
///   4 — precondition violation (grid/support/threshold requirements not met)
class Error : public std::runtime_error {
public:
    Error(std::string what, int exit_code)
        : std::runtime_error(std::move(what)), exit_code_(exit_code) {}

    [[nodiscard]] int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// Scenario/flag parsing and validation problems. Exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// A numerical procedure could not reach its requested tolerance. Exit code 3.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, 3) {}
};

/// An operation was invoked outside its domain of validity. Exit code 4.
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what, 4) {}
};

// --- configuration ---------------------------------------------------------

// (plain ConfigError is thrown with a field path in the message)

// --- numerical tolerance failures ------------------------------------------

/// Step-halving ran out of budget before meeting the integration tolerance.
class NoConvergence : public NumericalError {
public:
    explicit NoConvergence(const std::string& what) : NumericalError(what) {}
};

/// Mode-basis conversion hit a (numerically) singular per-channel basis.
class SingularConversion : public NumericalError {
public:
    explicit SingularConversion(const std::string& what) : NumericalError(what) {}
};

/// A composition inverse was too ill-conditioned to trust.
class IllConditioned : public NumericalError {
public:
    explicit IllConditioned(const std::string& what) : NumericalError(what) {}
};

/// The two independent dwell-time routes disagreed beyond tolerance
/// (typically a sign of an inadequate k_t grid for the requested packet).
class RouteMismatch : public NumericalError {
public:
    explicit RouteMismatch(const std::string& what) : NumericalError(what) {}
};

// --- precondition violations ------------------------------------------------

/// Grid construction retained no channels.
class EmptyGrid : public PreconditionError {
public:
    explicit EmptyGrid(const std::string& what) : PreconditionError(what) {}
};

/// Two objects built over different channel grids were combined.
class GridMismatch : public PreconditionError {
public:
    explicit GridMismatch(const std::string& what) : PreconditionError(what) {}
};

/// A single propagation segment exceeded the evanescent-growth cap.
class SegmentTooLong : public PreconditionError {
public:
    explicit SegmentTooLong(const std::string& what) : PreconditionError(what) {}
};

/// The potential support sticks out of the requested slab, or a packet
/// violates its distance-from-boundary requirements.
class SupportViolation : public PreconditionError {
public:
    explicit SupportViolation(const std::string& what) : PreconditionError(what) {}
};

/// Too much amplitude mass sits next to the channel threshold, where the
/// time kernels diverge like 1/k_z^2.
class ThresholdDivergence : public PreconditionError {
public:
    explicit ThresholdDivergence(const std::string& what) : PreconditionError(what) {}
};

/// A delay time was requested for a vanishing reflected/transmitted current.
class ZeroCurrent : public PreconditionError {
public:
    explicit ZeroCurrent(const std::string& what) : PreconditionError(what) {}
};

// Mode constructors are defined only on their own channel kind.

class NotOpen : public PreconditionError {
public:
    explicit NotOpen(const std::string& what) : PreconditionError(what) {}
};

class NotClosed : public PreconditionError {
public:
    explicit NotClosed(const std::string& what) : PreconditionError(what) {}
};

class NotIntermediate : public PreconditionError {
public:
    explicit NotIntermediate(const std::string& what) : PreconditionError(what) {}
};

/// Time kernels exist only for propagating (open or closed) channels.
class NotPropagating : public PreconditionError {
public:
    explicit NotPropagating(const std::string& what) : PreconditionError(what) {}
};

} // namespace zscat
