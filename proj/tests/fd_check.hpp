#pragma once

// Central finite-difference gradient oracle shared by the unit and acceptance
// suites. Independent of the autodiff engine: it only re-evaluates a forward
// closure at perturbed leaf values.

#include <cmath>
#include <functional>
#include <vector>

#include "polc/autodiff.hpp"
#include "polc/rng.hpp"

namespace polc::testing {

struct FdReport {
  double max_rel_err = 0;
  int checked = 0;
};

// forward() must rebuild the graph from current leaf values and return the
// scalar loss value. leaves are the tensors perturbed in place.
inline FdReport fd_check(const std::function<double()>& forward,
                         const std::function<Tensor()>& analytic_grad, polc::Var leaf,
                         int max_coords, polc::Rng& rng, double step = 1e-4) {
  FdReport rep;
  Tensor g = analytic_grad();
  const std::int64_t n = leaf->value.size();
  std::vector<std::int64_t> coords;
  if (n <= max_coords) {
    for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (int i = 0; i < max_coords; ++i) coords.push_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  }
  for (std::int64_t c : coords) {
    const double keep = leaf->value[c];
    auto central = [&](double h) {
      leaf->value[c] = keep + h;
      const double fp = forward();
      leaf->value[c] = keep - h;
      const double fm = forward();
      leaf->value[c] = keep;
      return (fp - fm) / (2 * h);
    };
    const double fd = central(step);
    // skip probe points on activation kinks (inconsistent central differences
    // across step sizes); consistent-but-wrong gradients are still caught
    const double fd2 = central(step / 2);
    if (std::fabs(fd - fd2) / std::max({std::fabs(fd), std::fabs(fd2), 1e-6}) > 1e-5) continue;
    const double ad = g[c];
    const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-6});
    const double rel = std::fabs(fd - ad) / denom;
    if (rel > rep.max_rel_err) rep.max_rel_err = rel;
    ++rep.checked;
  }
  return rep;
}

}  // namespace polc::testing
