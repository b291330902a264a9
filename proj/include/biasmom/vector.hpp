// Copyright 2026 The biasmom Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "biasmom/error.hpp"

namespace biasmom {

// Model parameters x in R^d.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

inline void require_finite(const Vector& v, const std::string& what) {
  if (!all_finite(v)) throw DataError(what + ": non-finite entry");
}

inline void require_dimension(const Vector& v, std::size_t d,
                              const std::string& what) {
  if (static_cast<std::size_t>(v.size()) != d) {
    throw DimensionError(what + ": expected dimension " + std::to_string(d) +
                         ", got " + std::to_string(v.size()));
  }
}

namespace detail {

inline Vector pairwise_sum(std::span<const Vector> parts) {
  if (parts.size() == 1) return parts[0];
  const std::size_t mid = parts.size() / 2;
  Vector left = pairwise_sum(parts.first(mid));
  left += pairwise_sum(parts.subspan(mid));
  return left;
}

inline double pairwise_sum(std::span<const double> parts) {
  if (parts.size() == 1) return parts[0];
  const std::size_t mid = parts.size() / 2;
  return pairwise_sum(parts.first(mid)) + pairwise_sum(parts.subspan(mid));
}

}  // namespace detail

/// Server-side aggregation (1/n) sum_i parts[i].
///
/// Parts are reduced in ascending index order by a balanced pairwise tree and
/// the sum is then divided by n. Every aggregate in the library (exact full
/// gradients, worker averages, subset averages) goes through this function so
/// that identical inputs give identical bits.
inline Vector average(std::span<const Vector> parts) {
  if (parts.empty()) throw DimensionError("average: no parts");
  Vector sum = detail::pairwise_sum(parts);
  sum /= static_cast<double>(parts.size());
  return sum;
}

inline double average(std::span<const double> parts) {
  if (parts.empty()) throw DimensionError("average: no parts");
  return detail::pairwise_sum(parts) / static_cast<double>(parts.size());
}

}  // namespace biasmom
