// Typed error hierarchy. Every invariant violation or operation failure
// throws one of these; nothing in the library reports errors any other way.
#pragma once

#include <stdexcept>
#include <string>

namespace plapflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

// Two cell functions / matrices built on different partitions were combined.
struct PartitionMismatch : Error {
    using Error::Error;
};

// A NaN/Inf appeared where a finite value is required.
struct NonFinite : Error {
    using Error::Error;
};

// A point left the unit cube (0,1)^d.
struct OutOfDomain : Error {
    using Error::Error;
};

// A time coordinate left [0, T].
struct OutOfRange : Error {
    using Error::Error;
};

// The kernel moment c(p,d) vanished; the scaling 2/(c(p,d) eps^{d+p}) is undefined.
struct DegenerateKernel : Error {
    using Error::Error;
};

// The inner solver ran out of iterations before reaching its residual target.
struct NoConvergence : Error {
    int iterations;
    double final_residual;
    NoConvergence(const std::string& what, int iters, double residual)
        : Error(what), iterations(iters), final_residual(residual) {}
};

// The schedule formulas produced eps >= 1 or a step count past the cap:
// n is too small for the asymptotic regime.
struct InfeasibleSchedule : Error {
    using Error::Error;
};

// rho * K_ij > 1 for some pair; the edge probability is not a probability.
struct ScaleViolation : Error {
    using Error::Error;
};

// Brute-force reference asked to run past its size guard.
struct TooLarge : Error {
    using Error::Error;
};

// eps >= interior margin; the consistency test's interior window is invalid.
struct MarginViolation : Error {
    using Error::Error;
};

struct UnknownTest : Error {
    using Error::Error;
};

struct DegenerateFit : Error {
    using Error::Error;
};

// Filesystem / CSV parsing trouble in the CLI layer.
struct IoError : Error {
    using Error::Error;
};

}  // namespace plapflow
