#pragma once
// Central-difference gradient checker (f64 only).

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xgan/tensor.hpp"

namespace xgan {

/// Parameters by name. The function must only combine them with tensor ops
/// so that it can be evaluated both on a tape and as plain values.
using ParamMap = std::map<std::string, Tensor<double>>;
using ScalarFn = std::function<Tensor<double>(const ParamMap&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  // Analytic and numeric values at the worst element.
  double analytic = 0.0;
  double numeric = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tol = 0.0;
  bool pass() const;
  double max_rel_err() const;
  std::string summary() const;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

GradCheckReport grad_check(const ScalarFn& f, const ParamMap& params, double h = 1e-5,
                           double tol = 1e-4);

}  // namespace xgan
