#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "stoprec/common.hpp"

namespace stoprec {

struct LbfgsOptions {
  int history = 7;
  double tol = 1e-6;        // gradient-norm termination
  int max_iters = 100;
  double armijo_c1 = 1e-4;
  int max_halvings = 30;
};

struct LbfgsResult {
  std::vector<double> x;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

// Two-loop-recursion L-BFGS with backtracking Armijo line search. The
// objective callback fills `grad` and returns the loss. Accepted steps never
// increase the loss.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& objective,
    std::vector<double> x0, const LbfgsOptions& opts = {}) {
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);

  std::vector<double> grad(n), new_grad(n), direction(n), new_x(n);
  double loss = objective(res.x, grad);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    double gnorm = std::sqrt(squared_norm(grad));
    if (gnorm < opts.tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion.
    direction = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * dot(s_hist[i], direction);
      for (std::size_t j = 0; j < n; ++j) direction[j] -= alpha[i] * y_hist[i][j];
    }
    if (!s_hist.empty()) {
      double gamma = dot(s_hist.back(), y_hist.back()) / squared_norm(y_hist.back());
      for (double& d : direction) d *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * dot(y_hist[i], direction);
      for (std::size_t j = 0; j < n; ++j) direction[j] += (alpha[i] - beta) * s_hist[i][j];
    }
    for (double& d : direction) d = -d;

    double dir_deriv = dot(grad, direction);
    if (dir_deriv >= 0.0) {  // not a descent direction; fall back to steepest descent
      for (std::size_t j = 0; j < n; ++j) direction[j] = -grad[j];
      dir_deriv = -squared_norm(grad);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    double new_loss = loss;
    bool accepted = false;
    for (int h = 0; h < opts.max_halvings; ++h) {
      for (std::size_t j = 0; j < n; ++j) new_x[j] = res.x[j] + step * direction[j];
      new_loss = objective(new_x, new_grad);
      if (std::isfinite(new_loss) && new_loss <= loss + opts.armijo_c1 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    std::vector<double> s(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = new_x[j] - res.x[j];
      y[j] = new_grad[j] - grad[j];
    }
    double sy = dot(s, y);
    if (sy > 1e-10 * std::sqrt(squared_norm(s) * squared_norm(y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    } else {
      // The curvature condition failed; stale pairs would keep producing the
      // same near-flat direction, so restart the approximation instead.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    res.x = new_x;
    grad = new_grad;
    loss = new_loss;
    res.iterations = iter + 1;
  }
  res.loss = loss;
  return res;
}

}  // namespace stoprec
