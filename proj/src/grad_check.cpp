#include "xgan/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xgan/errors.hpp"

namespace xgan {

bool GradCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

double GradCheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_err);
  return m;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& e : entries)
    os << (e.pass ? "ok   " : "FAIL ") << e.name << " rel_err=" << e.max_rel_err
       << " analytic=" << e.analytic << " numeric=" << e.numeric << '\n';
  return os.str();
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

GradCheckReport grad_check(const ScalarFn& f, const ParamMap& params, double h, double tol) {
  Tape<double> tape;
  ParamMap tracked;
  for (const auto& [name, value] : params) tracked.emplace(name, tape.leaf(name, value));
  const Tensor<double> root = f(tracked);
  const GradMap<double> grads = tape.backward(root);

  GradCheckReport report;
  report.tol = tol;
  for (const auto& [name, value] : params) {
    GradCheckEntry entry;
    entry.name = name;
    const Tensor<double>& analytic = grads.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      ParamMap shifted = params;
      Tensor<double>& p = shifted.at(name);
      p.mutable_data()[i] = value.at(i) + h;
      const double up = f(shifted).item();
      p.mutable_data()[i] = value.at(i) - h;
      const double down = f(shifted).item();
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic.at(i), numeric);
      if (err > entry.max_rel_err || i == 0) {
        entry.max_rel_err = err;
        entry.analytic = analytic.at(i);
        entry.numeric = numeric;
      }
    }
    entry.pass = entry.max_rel_err <= tol;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace xgan
