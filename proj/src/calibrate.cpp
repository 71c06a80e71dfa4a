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

#include "solgp/calibrate.hpp"

#include <algorithm>

#include "solgp/error.hpp"

namespace solgp {

Emulator Emulator::train(const Matrix& x, std::span<const double> y, const GpFitConfig& fit,
                         const std::optional<LocalConfig>& local) {
  if (!local) return Emulator(fit_gp(x, y, fit));
  if (y.size() != x.rows()) throw ShapeError("emulator: y length differs from X rows");
  if (x.rows() < local->n)
    throw InsufficientDataError("local emulator needs " + std::to_string(local->n) + " points, have " +
                                std::to_string(x.rows()));
  LocalConfig cfg = *local;
  cfg.fit = fit;
  return Emulator(Local{x, std::vector<double>(y.begin(), y.end()), cfg});
}

Prediction Emulator::predict(const Matrix& xnew, bool include_noise) const {
  if (const auto* g = std::get_if<GPModel>(&impl_)) return g->predict(xnew, include_noise);
  if (const auto* l = std::get_if<Local>(&impl_))
    return local_predict(l->x, l->y, xnew, l->config, include_noise);
  const auto& c = std::get<Constant>(impl_);
  Prediction p;
  p.mean.assign(xnew.rows(), c.value);
  p.variance.assign(xnew.rows(), 0.0);
  return p;
}

std::optional<double> Emulator::noise_variance() const {
  if (const auto* g = std::get_if<GPModel>(&impl_))
    return g->params().nugget * g->params().signal_variance;
  if (std::holds_alternative<Constant>(impl_)) return 0.0;
  return std::nullopt;
}

BiasModel fit_bias(const Matrix& x_field, std::span<const double> y_field,
                   std::shared_ptr<const Emulator> surrogate, const Prediction& surrogate_at_field,
                   const GpFitConfig& fit, const std::optional<LocalConfig>& local) {
  if (!surrogate) throw Error("fit_bias: no surrogate");
  if (y_field.size() != x_field.rows() || surrogate_at_field.size() != y_field.size())
    throw ShapeError("fit_bias: field data and surrogate predictions differ in length");
  if (y_field.size() < 5)
    throw InsufficientDataError("bias model needs at least 5 residuals, have " +
                                std::to_string(y_field.size()));
  std::vector<double> resid(y_field.size());
  for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = y_field[i] - surrogate_at_field.mean[i];
  Emulator disc = Emulator::train(x_field, resid, fit, local);
  const auto noise = disc.noise_variance();
  return BiasModel{std::move(surrogate), std::move(disc), noise};
}

Prediction bias_corrected_predict(const BiasModel& bm, const Matrix& xnew, bool include_noise) {
  Prediction s = bm.surrogate->predict(xnew, false);
  const Prediction b = bm.discrepancy.predict(xnew, include_noise);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.mean[i] += b.mean[i];
    s.variance[i] += b.variance[i];
  }
  return s;
}

Prediction bias_corrected_predict(const BiasModel& bm, const Matrix& xnew,
                                  std::span<const std::optional<double>> true_sim, bool include_noise) {
  if (true_sim.size() != xnew.rows())
    throw CoverageError("true simulator values cover " + std::to_string(true_sim.size()) + " of " +
                        std::to_string(xnew.rows()) + " query rows");
  for (std::size_t i = 0; i < true_sim.size(); ++i)
    if (!true_sim[i]) throw CoverageError("no simulator value for query row " + std::to_string(i));
  Prediction b = bm.discrepancy.predict(xnew, include_noise);
  for (std::size_t i = 0; i < b.size(); ++i) b.mean[i] += *true_sim[i];
  return b;
}

Prediction ivw_fuse(std::span<const Prediction> sources, double floor) {
  if (sources.empty()) throw EmptyInputError("ivw_fuse: no sources");
  const std::size_t m = sources.front().size();
  for (const auto& s : sources)
    if (s.size() != m || s.variance.size() != m) throw ShapeError("ivw_fuse: sources differ in length");
  if (sources.size() == 1) return sources.front();
  Prediction out;
  out.mean.resize(m);
  out.variance.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double wsum = 0.0, wm = 0.0;
    for (const auto& s : sources) {
      const double w = 1.0 / std::max(s.variance[i], floor);
      wsum += w;
      wm += w * s.mean[i];
    }
    out.mean[i] = wm / wsum;
    out.variance[i] = 1.0 / wsum;
  }
  return out;
}

}  // namespace solgp
