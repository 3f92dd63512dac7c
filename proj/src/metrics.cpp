// SPDX-License-Identifier: Apache-2.0
#include "cascade/metrics.hpp"

#include <sstream>

namespace cascade {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

double wer(const std::string& reference, const std::string& hypothesis) {
  const auto ref = split_words(reference);
  const auto hyp = split_words(hypothesis);
  return wer(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

double mse_loss(const MelSpec& pred, const MelSpec& target) {
  if (pred.frames.shape() != target.frames.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "mse_loss: spectrogram shapes differ");
  }
  const auto a = pred.frames.f32();
  const auto b = target.frames.f32();
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace cascade
