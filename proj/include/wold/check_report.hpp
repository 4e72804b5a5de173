#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "wold/linalg.hpp"

namespace wold {

using linalg::ComplexMatrix;
using linalg::ComplexVector;

/// Whether a check runs on the whole space or on the exact sub-window of a
/// truncated model.
enum class Scope { Full, Window };

struct CheckReport {
  std::string name;
  bool passed = true;
  double residual = 0.0;
  double tolerance = 0.0;
  std::optional<ComplexVector> witness;
  bool window_restricted = false;
  std::map<std::string, double> metrics;
  std::string note;
};

/// Collects several residuals into one report, keeping the worst one and a
/// unit vector on which it is attained.
class ResidualTracker {
 public:
  void add(const std::string& label, const ComplexMatrix& r) {
    const auto res = linalg::operator_residual(r);
    add(label, res.norm, res.witness);
  }

  void add(const std::string& label, double value, const ComplexVector& witness) {
    auto [it, inserted] = per_label_.try_emplace(label, value);
    if (!inserted) it->second = std::max(it->second, value);
    if (!have_ || value > worst_) {
      have_ = true;
      worst_ = value;
      worst_label_ = label;
      witness_ = witness;
    }
  }

  double worst() const { return worst_; }

  CheckReport finish(std::string name, double tolerance, bool window_restricted) const {
    CheckReport rep;
    rep.name = std::move(name);
    rep.residual = worst_;
    rep.tolerance = tolerance;
    rep.passed = worst_ <= tolerance;
    rep.window_restricted = window_restricted;
    rep.metrics = per_label_;
    if (have_) {
      rep.witness = witness_;
      rep.note = "worst: " + worst_label_;
    }
    return rep;
  }

 private:
  bool have_ = false;
  double worst_ = 0.0;
  std::string worst_label_;
  ComplexVector witness_;
  std::map<std::string, double> per_label_;
};

inline CheckReport scalar_report(std::string name, double residual, double tolerance,
                                 bool window_restricted = false) {
  CheckReport rep;
  rep.name = std::move(name);
  rep.residual = residual;
  rep.tolerance = tolerance;
  rep.passed = residual <= tolerance;
  rep.window_restricted = window_restricted;
  return rep;
}

}  // namespace wold
