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

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "solgp/gp.hpp"
#include "solgp/linalg.hpp"

namespace solgp {

enum class LocalMethod { NearestNeighbor, GreedyVariance };

std::string_view to_string(LocalMethod m);  // "nn" / "alc"

struct LocalConfig {
  std::size_t n = 50;        // sub-design size
  LocalMethod method = LocalMethod::NearestNeighbor;
  std::size_t n_start = 6;   // nearest neighbours seeding the greedy search
  // Greedy candidates come from the pool_factor * n nearest points.
  std::size_t pool_factor = 10;
  // Fixed kernel used only to score greedy candidates. The lengthscale
  // defaults to the squared distance from the query to its n-th nearest
  // neighbour.
  std::optional<double> search_lengthscale;
  double search_nugget = 1e-4;
  GpFitConfig fit;           // per-query hyperparameter fit
  unsigned jobs = 1;
};

// Kernel used to score greedy candidates around `query`.
KernelParams local_search_params(const Matrix& x, std::span<const double> query,
                                 const LocalConfig& cfg);

// Indices (ascending) of the local sub-design for `query`. Throws
// InsufficientDataError when N < cfg.n and Error on an invalid config.
std::vector<std::size_t> select_subdesign(const Matrix& x, std::span<const double> query,
                                          const LocalConfig& cfg);

struct LocalStats {
  std::size_t queries = 0;
  std::size_t max_factorized_dim = 0;  // largest covariance factorized for any query
};

// Independent per-query local GP: select a sub-design, fit hyperparameters
// on it, predict. Fit failures are rethrown as FitError naming the query.
Prediction local_predict(const Matrix& x, std::span<const double> y, const Matrix& xnew,
                         const LocalConfig& cfg, bool include_noise = false,
                         LocalStats* stats = nullptr);

}  // namespace solgp
