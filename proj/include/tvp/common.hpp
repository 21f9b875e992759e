#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tvp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Factorization failed even after jitter escalation.
class NumericalError : public Error {
public:
    using Error::Error;
};

// A requested object would exceed the configured memory ceiling.
class ResourceError : public Error {
public:
    using Error::Error;
};

// An algorithmic invariant (e.g. objective monotonicity) was breached.
class InvariantError : public Error {
public:
    using Error::Error;
};

// Thread budget handed down by the caller. threads <= 0 means "OpenMP default".
struct Parallelism {
    int threads = 0;
    int resolved() const;
};

} // namespace tvp
