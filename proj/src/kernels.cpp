// SPDX-License-Identifier: Apache-2.0
#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cascade::detail {

Mat from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.dtype() != DType::FP32) {
    throw Error(ErrorCode::ShapeMismatch, "expected a rank-2 FP32 tensor");
  }
  Mat m(t.shape()[0], t.shape()[1]);
  std::copy(t.f32().begin(), t.f32().end(), m.data.begin());
  return m;
}

Tensor to_tensor(const Mat& m) { return Tensor({m.rows, m.cols}, m.data); }

Mat linear(const Mat& x, const Tensor& weight, const Tensor& bias, OpCounter* ops) {
  const uint32_t in = weight.shape()[0];
  const uint32_t out = weight.shape()[1];
  if (x.cols != in) {
    throw Error(ErrorCode::ShapeMismatch, "linear: input width does not match weight");
  }
  const float* w = weight.f32().data();
  const float* b = bias.f32().data();
  Mat y(x.rows, out);
  for (uint32_t r = 0; r < x.rows; ++r) {
    float* yr = y.row(r).data();
    std::copy(b, b + out, yr);
    const float* xr = x.row(r).data();
    for (uint32_t i = 0; i < in; ++i) {
      const float xi = xr[i];
      const float* wi = w + std::size_t(i) * out;
      for (uint32_t j = 0; j < out; ++j) yr[j] += xi * wi[j];
    }
  }
  if (ops) ops->macs += uint64_t(x.rows) * in * out;
  return y;
}

Mat layer_norm(const Mat& x, const Tensor& gamma, const Tensor& beta) {
  constexpr double kEps = 1e-5;
  const float* g = gamma.f32().data();
  const float* b = beta.f32().data();
  Mat y(x.rows, x.cols);
  for (uint32_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    double mean = 0.0;
    for (float v : xr) mean += v;
    mean /= x.cols;
    double var = 0.0;
    for (float v : xr) var += (v - mean) * (v - mean);
    var /= x.cols;
    const double inv = 1.0 / std::sqrt(var + kEps);
    auto yr = y.row(r);
    for (uint32_t c = 0; c < x.cols; ++c) {
      yr[c] = static_cast<float>((xr[c] - mean) * inv) * g[c] + b[c];
    }
  }
  return y;
}

void gelu_inplace(Mat& x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  for (float& v : x.data) {
    v = 0.5f * v * (1.0f + std::tanh(kC * (v + 0.044715f * v * v * v)));
  }
}

void add_inplace(Mat& x, const Mat& y) {
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += y.data[i];
}

void softmax_inplace(std::span<float> row) {
  float mx = -std::numeric_limits<float>::infinity();
  for (float v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (float& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const auto inv = static_cast<float>(1.0 / sum);
  for (float& v : row) v *= inv;
}

namespace {

// Eight independent partial sums so the compiler can vectorize.
float dot(const float* a, const float* b, uint32_t n) {
  float acc[8] = {};
  uint32_t c = 0;
  for (; c + 8 <= n; c += 8) {
    for (uint32_t l = 0; l < 8; ++l) acc[l] += a[c + l] * b[c + l];
  }
  float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; c < n; ++c) s += a[c] * b[c];
  return s;
}

}  // namespace

Mat attention(const Mat& q, const Mat& k, const Mat& v, uint32_t n_heads,
              int64_t causal_offset, OpCounter* ops, std::vector<Tensor>* capture) {
  const uint32_t d = q.cols;
  const uint32_t dh = d / n_heads;
  const uint32_t nk = k.rows;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Mat out(q.rows, d);
  std::vector<float> scores(nk);
  // With several queries, keys of one head are stored transposed, [dh, nk],
  // so the score loop runs over contiguous memory. A single query (one
  // decoder step) is cheaper as plain dot products.
  const bool transpose = q.rows > 1;
  std::vector<float> kt(transpose ? std::size_t(dh) * nk : 0);
  for (uint32_t h = 0; h < n_heads; ++h) {
    const uint32_t off = h * dh;
    for (uint32_t j = 0; transpose && j < nk; ++j) {
      const float* kj = k.row(j).data() + off;
      for (uint32_t c = 0; c < dh; ++c) kt[std::size_t(c) * nk + j] = kj[c];
    }
    std::vector<float> weights;
    if (capture) weights.assign(std::size_t(q.rows) * nk, 0.0f);
    for (uint32_t i = 0; i < q.rows; ++i) {
      const uint32_t visible =
          causal_offset < 0 ? nk : static_cast<uint32_t>(std::min<int64_t>(nk, causal_offset + i + 1));
      const float* qi = q.row(i).data() + off;
      float* sc = scores.data();
      if (transpose) {
        std::fill_n(sc, visible, 0.0f);
        for (uint32_t c = 0; c < dh; ++c) {
          const float qc = qi[c];
          const float* kc = kt.data() + std::size_t(c) * nk;
          for (uint32_t j = 0; j < visible; ++j) sc[j] += qc * kc[j];
        }
        for (uint32_t j = 0; j < visible; ++j) sc[j] *= scale;
      } else {
        for (uint32_t j = 0; j < visible; ++j) sc[j] = dot(qi, k.row(j).data() + off, dh) * scale;
      }
      std::span<float> row(sc, visible);
      softmax_inplace(row);
      float* oi = out.row(i).data() + off;
      for (uint32_t j = 0; j < visible; ++j) {
        const float p = sc[j];
        const float* vj = v.row(j).data() + off;
        for (uint32_t c = 0; c < dh; ++c) oi[c] += p * vj[c];
      }
      if (capture) {
        std::copy(row.begin(), row.end(), weights.begin() + std::size_t(i) * nk);
      }
      if (ops) ops->macs += 2ull * visible * dh;
    }
    if (capture) capture->emplace_back(Shape{q.rows, nk}, std::move(weights));
  }
  return out;
}

void add_positional_encoding(Mat& x, uint32_t first_position, uint32_t n_rows) {
  const uint32_t d = x.cols;
  for (uint32_t r = 0; r < n_rows; ++r) {
    const double pos = first_position + r;
    auto xr = x.row(r);
    for (uint32_t i = 0; i + 1 < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      xr[i] += static_cast<float>(std::sin(pos * freq));
      xr[i + 1] += static_cast<float>(std::cos(pos * freq));
    }
  }
}

}  // namespace cascade::detail
