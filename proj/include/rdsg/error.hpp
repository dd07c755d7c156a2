#pragma once

#include <stdexcept>
#include <string>

namespace rdsg {

/// Malformed configuration or command line; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown (inadmissible field, indefinite system, ...); exit code 1.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// det J <= 0 on some cell for a given parameter sample.
class AdmissibilityError : public NumericalError {
public:
    AdmissibilityError(int cell, double det)
        : NumericalError("inadmissible transformation: det J = " + std::to_string(det) +
                         " on cell " + std::to_string(cell)),
          cell_(cell), det_(det) {}

    int cell() const noexcept { return cell_; }
    double det() const noexcept { return det_; }

private:
    int cell_;
    double det_;
};

/// A local system expected to be SPD failed its factorization.
class IndefiniteSystemError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace rdsg
