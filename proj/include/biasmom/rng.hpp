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

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace biasmom {

// Purpose tags keep the noise, subsampling, initialization and Monte-Carlo
// streams of one (seed, trial, worker, k) coordinate disjoint.
enum class StreamTag : std::uint64_t {
  noise = 1,
  sampling = 2,
  init = 3,
  measure = 4,
  audit = 5,
};

/// SplitMix64 generator (Steele, Lea & Flood; constants from Vigna's
/// reference implementation) with Box-Muller Gaussians.
///
/// Every random quantity in a run is drawn from a substream keyed by
/// (seed, trial, worker, k, tag). A substream is a pure function of its key,
/// so trajectories do not depend on execution order or thread count, and the
/// output is identical on every platform (no std:: distributions are used).
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static Rng substream(std::uint64_t seed, std::uint64_t trial,
                       std::uint64_t worker, std::uint64_t k, StreamTag tag) {
    constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
    std::uint64_t h = mix(seed + golden);
    h = mix(h ^ (trial + 2 * golden));
    h = mix(h ^ (worker + 3 * golden));
    h = mix(h ^ (k + 4 * golden));
    h = mix(h ^ (static_cast<std::uint64_t>(tag) + 5 * golden));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  // Standard normal via the Box-Muller transform; the second variate of each
  // pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace biasmom
