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

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fusemt/autodiff.hpp"

namespace fusemt {

struct GradCheckReport {
  // max_i |tape_i - fd_i| / max(max_i |tape_i|, max_i |fd_i|); 0 when both
  // gradients vanish identically.
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
  // A finite-difference estimate came out NaN/Inf. The check fails but does
  // not throw.
  bool non_finite = false;
  bool passed = false;
  std::string worst;  // "<tensor index>[<flat offset>]" of the largest deviation
};

struct GradCheckOptions {
  double step = 0.0;  // 0 selects the per-precision default
  double tolerance = 1e-5;
};

// Central-difference step: 1e-4 in 64-bit, 1e-2 in 32-bit.
template <typename T>
constexpr double default_fd_step() {
  return sizeof(T) >= 8 ? 1e-4 : 1e-2;
}

// Builds a scalar loss on the given tape from the current values of `params`.
template <typename T>
using LossBuilder = std::function<Var<T>(Tape<T>&)>;

// Compares the tape gradient of `loss` w.r.t. every coordinate of `params`
// (each must have requires_grad set) against central finite differences.
template <typename T>
GradCheckReport grad_check(const LossBuilder<T>& loss, const std::vector<Tensor<T>*>& params,
                           GradCheckOptions options = {});

// Single-point form: f maps a Var bound to `point` to a scalar.
template <typename T>
GradCheckReport grad_check(const std::function<Var<T>(Var<T>)>& f, Tensor<T> point, double tolerance);

extern template GradCheckReport grad_check<float>(const LossBuilder<float>&, const std::vector<Tensor<float>*>&,
                                                  GradCheckOptions);
extern template GradCheckReport grad_check<double>(const LossBuilder<double>&, const std::vector<Tensor<double>*>&,
                                                   GradCheckOptions);
extern template GradCheckReport grad_check<float>(const std::function<Var<float>(Var<float>)>&, Tensor<float>,
                                                  double);
extern template GradCheckReport grad_check<double>(const std::function<Var<double>(Var<double>)>&, Tensor<double>,
                                                   double);

}  // namespace fusemt
