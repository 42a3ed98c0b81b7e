#pragma once

#include <stdexcept>
#include <string>

namespace geocon {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int column)
      : Error(msg + " at column " + std::to_string(column)), column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

class UnknownIdentifierError : public Error {
 public:
  UnknownIdentifierError(const std::string& name, int column)
      : Error("unknown identifier '" + name + "' at column " + std::to_string(column)),
        name_(name),
        column_(column) {}
  const std::string& name() const { return name_; }
  int column() const { return column_; }

 private:
  std::string name_;
  int column_;
};

/// Evaluation outside an operation's domain (log of nonpositive, x/0, ...).
class DomainError : public Error {
 public:
  DomainError(const std::string& msg, int column)
      : Error(msg + (column >= 0 ? " (column " + std::to_string(column) + ")" : std::string())),
        column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, double time)
      : Error(msg + " at t=" + std::to_string(time)), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// The finite-difference and forward-mode jet estimators disagree.
class NumericalFragilityError : public Error {
 public:
  using Error::Error;
};

/// A closed-form identity and its numerical realisation disagree.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A commutator jet is not aligned with the symbolic bracket.
class ConventionError : public Error {
 public:
  using Error::Error;
};

/// A structural sign or constancy requirement does not hold.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Momentum vanished along a biextremal.
class DegeneracyError : public Error {
 public:
  DegeneracyError(const std::string& msg, double time)
      : Error(msg + " at t=" + std::to_string(time)), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace geocon
