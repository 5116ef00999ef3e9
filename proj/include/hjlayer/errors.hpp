#pragma once

#include <stdexcept>
#include <string>

namespace hjlayer {

/// Evaluation requested outside [0, T] or outside a grid.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Malformed or invalid user input (initial data, grids, config values).
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A Hamiltonian layer does not have the structure it was tagged with.
class StructuralError : public std::runtime_error {
public:
  StructuralError(std::size_t layer, const std::string& what)
      : std::runtime_error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

private:
  std::size_t layer_;
};

/// Adaptive quadrature failed to reach the requested tolerance.
class ToleranceError : public std::runtime_error {
public:
  ToleranceError(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}

  double estimate() const noexcept { return estimate_; }

private:
  double estimate_;
};

/// A characteristic cannot be continued through a point where u(t1, .) has a kink.
class NondifferentiableJunction : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hjlayer
