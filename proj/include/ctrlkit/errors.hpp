#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ctrl {

enum class ErrorKind {
  Dimension,
  IntegrationBlowup,
  Grid,
  NotControllable,
  UnsupportedShape,
  Configuration,
  EquilibriumViolation,
  NotHurwitz,
  NormalizeFirst,
  ZeroLeading,
  NonConvergence,
  IllPosed,
  TimeDirection,
  KTooLarge,
  OutOfRange,
  Input,
  Numerical,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  // input errors map to CLI exit 2, everything else to exit 3
  bool is_input() const { return kind_ == ErrorKind::Input; }

 private:
  ErrorKind kind_;
};

class BlowupError : public Error {
 public:
  BlowupError(double t, const std::string& what)
      : Error(ErrorKind::IntegrationBlowup, what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

class EquilibriumError : public Error {
 public:
  EquilibriumError(double residual, const std::string& what)
      : Error(ErrorKind::EquilibriumViolation, what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class IllPosedError : public Error {
 public:
  IllPosedError(double min_sv, double cond, const std::string& what)
      : Error(ErrorKind::IllPosed, what), min_sv_(min_sv), cond_(cond) {}
  double min_singular_value() const { return min_sv_; }
  double condition() const { return cond_; }

 private:
  double min_sv_, cond_;
};

class KTooLargeError : public Error {
 public:
  KTooLargeError(int feasible, const std::string& what)
      : Error(ErrorKind::KTooLarge, what), feasible_(feasible) {}
  int largest_feasible() const { return feasible_; }

 private:
  int feasible_;
};

class InputError : public Error {
 public:
  InputError(std::string where, const std::string& what)
      : Error(ErrorKind::Input, where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

}  // namespace ctrl
