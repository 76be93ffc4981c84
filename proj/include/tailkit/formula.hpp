#pragma once

#include <string>
#include <vector>

#include "tailkit/common.hpp"

namespace tailkit {

struct FormulaTerm {
  enum class Kind { intercept, linear, indicator, spline };
  Kind kind = Kind::intercept;
  std::string var;
  double level = 0.0;  // indicator comparison value
  int basis_dim = 0;   // spline basis size

  std::string str() const;
  bool operator==(const FormulaTerm&) const = default;
};

// Additive model formula: `target ~ 1 + lin(VAR) + ind(VAR==LEVEL) + crs(VAR, B=INT)`.
struct Formula {
  std::string target;
  std::vector<FormulaTerm> terms;

  static Formula parse(const std::string& text);
  std::string str() const;
  std::vector<std::string> variables() const;
  bool has_intercept() const;
  bool operator==(const Formula&) const = default;
};

inline FormulaTerm intercept_term() { return {FormulaTerm::Kind::intercept, "", 0.0, 0}; }
inline FormulaTerm linear_term(const std::string& var) {
  return {FormulaTerm::Kind::linear, var, 0.0, 0};
}
inline FormulaTerm indicator_term(const std::string& var, double level) {
  return {FormulaTerm::Kind::indicator, var, level, 0};
}
inline FormulaTerm spline_term(const std::string& var, int basis_dim) {
  return {FormulaTerm::Kind::spline, var, 0.0, basis_dim};
}

}  // namespace tailkit
