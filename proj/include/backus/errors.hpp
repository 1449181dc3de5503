#pragma once

#include <stdexcept>

namespace backus {

// Input data is unusable: singular configuration, inadmissible trace data,
// malformed configuration file.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A solver failed to produce a solution within its contract.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace backus
