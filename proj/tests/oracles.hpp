// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used to check the library.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

// Full-table Levenshtein distance, written without the rolling-row trick.
template <typename T>
std::size_t edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t best = d[i - 1][j] + 1;
      if (d[i][j - 1] + 1 < best) best = d[i][j - 1] + 1;
      const std::size_t diag = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      if (diag < best) best = diag;
      d[i][j] = best;
    }
  }
  return d[a.size()][b.size()];
}

// Bitwise CRC-32 (reflected 0xEDB88320), no table.
inline uint32_t crc32(const std::vector<uint8_t>& bytes, std::size_t n) {
  uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= bytes[i];
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (c >> 1) ^ 0xEDB88320u : c >> 1;
  }
  return ~c;
}

// Parameter count of one pre-norm encoder layer and one decoder layer with
// biased linears and feed-forward width f.
inline uint64_t encoder_layer_params(uint64_t d, uint64_t f) {
  const uint64_t attn = 4 * (d * d + d);
  const uint64_t ff = (d * f + f) + (f * d + d);
  const uint64_t norms = 2 * 2 * d;
  return attn + ff + norms;
}

inline uint64_t decoder_layer_params(uint64_t d, uint64_t f) {
  return 2 * 4 * (d * d + d) + (d * f + f) + (f * d + d) + 3 * 2 * d;
}

inline std::vector<float> uniform(std::mt19937& rng, std::size_t n, float lo, float hi) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
