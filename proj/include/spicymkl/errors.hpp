#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (data files, labels, splits).
class InputError : public Error
{
  public:
    using Error::Error;
};

/// Invalid configuration (kernel bank, solver settings, CLI values).
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// A caller broke a precondition (dimension mismatch, missing rows).
class ContractError : public Error
{
  public:
    using Error::Error;
};

/// Floating-point breakdown: indefinite Gram matrix, failed factorization,
/// stalled line search.
class NumericalError : public Error
{
  public:
    using Error::Error;
};

/// Iteration budget exhausted before the tolerance was met.
class ConvergenceError : public Error
{
  public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual)
    {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

/// A point outside the domain of a convex conjugate. Carries the offending
/// sample indices so the caller can backtrack.
class DomainError : public Error
{
  public:
    DomainError(const std::string& what, std::vector<std::size_t> indices)
        : Error(what), indices_(std::move(indices))
    {}
    const std::vector<std::size_t>& indices() const noexcept { return indices_; }

  private:
    std::vector<std::size_t> indices_;
};

} // namespace mkl
