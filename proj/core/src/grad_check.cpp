/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fusemt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fusemt {

namespace {

template <typename T>
double evaluate(const LossBuilder<T>& loss) {
  Tape<T> tape;
  Var<T> out = loss(tape);
  if (out.value().size() != 1) throw ContractError("grad_check: loss must be scalar");
  return static_cast<double>(out.value()[0]);
}

}  // namespace

template <typename T>
GradCheckReport grad_check(const LossBuilder<T>& loss, const std::vector<Tensor<T>*>& params,
                           GradCheckOptions options) {
  const double h = options.step > 0 ? options.step : default_fd_step<T>();
  for (Tensor<T>* p : params) {
    if (!p->requires_grad()) throw ContractError("grad_check: parameter without requires_grad");
    p->zero_grad();
  }
  {
    Tape<T> tape;
    Var<T> out = loss(tape);
    tape.backward(out);
  }

  GradCheckReport report;
  double max_tape = 0.0, max_fd = 0.0;
  std::vector<std::vector<double>> fd(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = *params[k];
    fd[k].resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T saved = p[i];
      const T hi = static_cast<T>(static_cast<double>(saved) + h);
      const T lo = static_cast<T>(static_cast<double>(saved) - h);
      double up = 0, down = 0;
      try {
        p[i] = hi;
        up = evaluate(loss);
        p[i] = lo;
        down = evaluate(loss);
      } catch (const NumericError&) {
        up = down = std::nan("");
      }
      p[i] = saved;
      // Divide by the step actually representable in T.
      const double est = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
      fd[k][i] = est;
      if (!std::isfinite(est)) report.non_finite = true;
      max_fd = std::max(max_fd, std::abs(est));
      max_tape = std::max(max_tape, std::abs(static_cast<double>(p.grad()[i])));
      ++report.coordinates;
    }
  }
  const double scale = std::max(max_tape, max_fd);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor<T>& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double diff = std::abs(static_cast<double>(p.grad()[i]) - fd[k][i]);
      if (diff > report.max_abs_error || !std::isfinite(diff)) {
        report.max_abs_error = diff;
        report.worst = std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.max_rel_error = scale > 0 ? report.max_abs_error / scale : 0.0;
  if (report.non_finite) report.max_rel_error = std::numeric_limits<double>::infinity();
  report.passed = !report.non_finite && report.max_rel_error < options.tolerance;
  return report;
}

template <typename T>
GradCheckReport grad_check(const std::function<Var<T>(Var<T>)>& f, Tensor<T> point, double tolerance) {
  point.set_requires_grad(true);
  LossBuilder<T> loss = [&](Tape<T>& tape) { return f(tape.parameter(point)); };
  GradCheckOptions options;
  options.tolerance = tolerance;
  return grad_check<T>(loss, {&point}, options);
}

template GradCheckReport grad_check<float>(const LossBuilder<float>&, const std::vector<Tensor<float>*>&,
                                           GradCheckOptions);
template GradCheckReport grad_check<double>(const LossBuilder<double>&, const std::vector<Tensor<double>*>&,
                                            GradCheckOptions);
template GradCheckReport grad_check<float>(const std::function<Var<float>(Var<float>)>&, Tensor<float>, double);
template GradCheckReport grad_check<double>(const std::function<Var<double>(Var<double>)>&, Tensor<double>, double);

}  // namespace fusemt
