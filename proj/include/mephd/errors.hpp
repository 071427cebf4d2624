// Error types shared across the library.
//
// Numerical routines throw subclasses of mephd::Error for conditions the
// caller must handle (bad domains, singular systems, unusable inputs).
// Solver non-convergence is NOT an exception: solvers report it in their
// result structs so that outer searches can skip failed points cheaply.

#ifndef MEPHD_ERRORS_HPP
#define MEPHD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mephd {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

class UnknownModelError : public Error {
public:
    explicit UnknownModelError(const std::string& name)
        : Error("unknown model: " + name) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t row, std::size_t col)
        : Error(msg + " (row " + std::to_string(row) + ", column " +
                std::to_string(col) + ")"),
          row(row), col(col) {}
    std::size_t row;
    std::size_t col;
};

class DimensionMismatchError : public Error {
public:
    explicit DimensionMismatchError(const std::string& msg) : Error(msg) {}
};

class SingularMatrixError : public Error {
public:
    explicit SingularMatrixError(const std::string& msg) : Error(msg) {}
};

class DegreesOfFreedomError : public Error {
public:
    explicit DegreesOfFreedomError(const std::string& msg) : Error(msg) {}
};

class NoInteriorPointError : public Error {
public:
    explicit NoInteriorPointError(const std::string& msg) : Error(msg) {}
};

class NoFeasibleThetaError : public Error {
public:
    explicit NoFeasibleThetaError(const std::string& msg) : Error(msg) {}
};

class NotConvergedError : public Error {
public:
    NotConvergedError(const std::string& msg, int iterations, double grad_norm)
        : Error(msg), iterations(iterations), grad_norm(grad_norm) {}
    int iterations;
    double grad_norm;
};

} // namespace mephd

#endif
