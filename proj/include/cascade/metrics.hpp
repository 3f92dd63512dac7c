// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cascade/audio.hpp"
#include "cascade/error.hpp"

namespace cascade {

/// Unit-cost Levenshtein distance over arbitrary comparable tokens.
template <typename T>
std::size_t edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

/// Word error rate in percent; may exceed 100 for long hypotheses.
template <typename T>
double wer(std::span<const T> ref, std::span<const T> hyp) {
  if (ref.empty()) throw Error(ErrorCode::EmptyReference, "WER reference is empty");
  return 100.0 * static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

std::vector<std::string> split_words(const std::string& text);

/// Whitespace-tokenized WER.
double wer(const std::string& reference, const std::string& hypothesis);

/// Mean of squared elementwise differences.
double mse_loss(const MelSpec& pred, const MelSpec& target);

}  // namespace cascade
