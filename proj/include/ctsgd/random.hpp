// Copyright 2026 The ctsgd Authors
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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ctsgd {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The output
/// is a pure function of (key, counter), so draws can be addressed directly
/// by (seed, path, step, agent) without any sequential state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Counter operator()(Counter counter) const noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Standard normal addressed by (seed, stream, index, lane): Box-Muller on the
/// two 53-bit uniforms of one Philox block.
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                      std::uint32_t lane) noexcept;

/// Sequential view over one Philox stream, for callers that only need
/// reproducible draws in order.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

  double next() noexcept { return counter_normal(seed_, stream_, position_++, 0); }
  std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
};

/// n independent Normal(0, h) draws.
std::vector<double> brownian_increments(NormalStream& rng, std::size_t n, double h);

}  // namespace ctsgd
