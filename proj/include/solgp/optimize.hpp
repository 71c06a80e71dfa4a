/*
 * Copyright 2026 The solgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace solgp {

// Objective returning f(x) and writing df/dx into `grad`. Throwing
// solgp::Error marks x as infeasible (treated as +inf by the line search).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BfgsOptions {
  int max_iter = 200;
  double grad_tol = 1e-6;    // on the projected gradient, infinity norm
  double f_rel_tol = 1e-10;  // relative objective change between iterates
  double max_step = 5.0;     // cap on the infinity norm of a trial step
};

struct BfgsResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
};

// Box-constrained quasi-Newton: BFGS inverse-Hessian updates on the free
// variables, projected backtracking (Armijo) line search. Throws the
// objective's error if the starting point itself cannot be evaluated.
BfgsResult minimize_box_bfgs(const Objective& f, std::vector<double> x0,
                             std::span<const double> lower, std::span<const double> upper,
                             const BfgsOptions& opts = {});

}  // namespace solgp
