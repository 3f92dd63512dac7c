// SPDX-License-Identifier: Apache-2.0
//
// Dense float kernels shared by the encoder and decoder. Row-major throughout;
// every kernel walks its loops in a fixed order so results are reproducible
// bit for bit within one build.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cascade/model.hpp"
#include "cascade/tensor.hpp"

namespace cascade::detail {

struct Mat {
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<float> data;

  Mat() = default;
  Mat(uint32_t r, uint32_t c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0f) {}

  std::span<float> row(uint32_t i) { return {data.data() + std::size_t(i) * cols, cols}; }
  std::span<const float> row(uint32_t i) const {
    return {data.data() + std::size_t(i) * cols, cols};
  }
};

Mat from_tensor(const Tensor& t);
Tensor to_tensor(const Mat& m);

// y = x W + b, W stored [in, out].
Mat linear(const Mat& x, const Tensor& weight, const Tensor& bias, OpCounter* ops);
Mat layer_norm(const Mat& x, const Tensor& gamma, const Tensor& beta);
void gelu_inplace(Mat& x);
void add_inplace(Mat& x, const Mat& y);
void softmax_inplace(std::span<float> row);

// Multi-head scaled dot-product attention. With `causal_offset` >= 0, query
// row i may attend to key rows [0, causal_offset + i]. When `capture` is set,
// one [n_q, n_k] weight matrix per head is appended to it.
Mat attention(const Mat& q, const Mat& k, const Mat& v, uint32_t n_heads,
              int64_t causal_offset, OpCounter* ops, std::vector<Tensor>* capture);

void add_positional_encoding(Mat& x, uint32_t first_position, uint32_t n_rows);

}  // namespace cascade::detail
