// Copyright 2026 The rulstm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "rulstm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rulstm/errors.hpp"

namespace rulstm {

double GradcheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) {
    // NaN must fail the check, so propagate it explicitly.
    if (std::isnan(b.max_relative_error)) return b.max_relative_error;
    worst = std::max(worst, b.max_relative_error);
  }
  return worst;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(const std::function<double()>& loss,
                          std::span<const std::pair<std::string, Matrix*>> params,
                          std::span<const std::pair<std::string, const Matrix*>> analytic,
                          const GradcheckOptions& options) {
  if (params.size() != analytic.size()) throw ShapeError("gradcheck: block count mismatch");
  const double first = loss();
  const double second = loss();
  if (first != second) {
    throw NonDeterminismError("gradcheck: loss closure is not deterministic (" +
                              std::to_string(first) + " vs " + std::to_string(second) + ")");
  }

  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Matrix& theta = *params[b].second;
    const Matrix& grad = *analytic[b].second;
    if (theta.size() != grad.size()) {
      throw ShapeError("gradcheck: block " + params[b].first + " size mismatch");
    }
    BlockCheck check;
    check.name = params[b].first;
    check.entries = theta.size();
    auto values = theta.data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + options.step;
      const double plus = loss();
      values[k] = saved - options.step;
      const double minus = loss();
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = grad.data()[k];
      const double err = relative_error(a, numeric, options.denominator_floor);
      if (std::isnan(err) || err > check.max_relative_error || k == 0) {
        check.max_relative_error = err;
        check.worst_index = k;
        check.analytic_at_worst = a;
        check.numeric_at_worst = numeric;
        if (std::isnan(err)) break;
      }
    }
    report.blocks.push_back(check);
  }
  return report;
}

}  // namespace rulstm
