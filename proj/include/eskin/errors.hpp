#pragma once

#include <stdexcept>

namespace eskin {

// A field was requested at a point coinciding with a dipole source.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Not enough samples to estimate something (calibration, training, ...).
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eskin
