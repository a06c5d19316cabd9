#pragma once

#include <stdexcept>
#include <string>

namespace coxfield {

/// Invalid argument or violated precondition.
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown: overflow, NaN, failed root bracket, inconsistent fixed point.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace coxfield
