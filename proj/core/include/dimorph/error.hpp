#pragma once

#include <stdexcept>
#include <string>

namespace dimorph {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MassMismatch : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroMass : public Error {
 public:
  using Error::Error;
};

class DegenerateRow : public Error {
 public:
  using Error::Error;
};

class UnsupportedKernel : public Error {
 public:
  using Error::Error;
};

class ExtinctPopulation : public Error {
 public:
  using Error::Error;
};

class StepRejected : public Error {
 public:
  using Error::Error;
};

class ExtinctionDetected : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class InsufficientReplicas : public Error {
 public:
  using Error::Error;
};

/// Root finder gave up; carries the best iterate it saw.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double best_m, double best_f, double best_residual)
      : Error(what), best_m_(best_m), best_f_(best_f), best_residual_(best_residual) {}

  double best_m() const { return best_m_; }
  double best_f() const { return best_f_; }
  double best_residual() const { return best_residual_; }

 private:
  double best_m_;
  double best_f_;
  double best_residual_;
};

}  // namespace dimorph
