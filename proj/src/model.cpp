// SPDX-License-Identifier: Apache-2.0
#include "cascade/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "kernels.hpp"

namespace cascade {

using detail::Mat;

const char* task_name(Task task) noexcept { return task == Task::STT ? "stt" : "tts"; }

Task parse_task(const std::string& name) {
  if (name == "stt" || name == "STT") return Task::STT;
  if (name == "tts" || name == "TTS") return Task::TTS;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + name + "' (expected stt or tts)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (d_model == 0 || n_heads == 0) fail("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (n_enc_layers_edge < 1 || n_enc_layers_edge > n_enc_layers_full) {
    fail("need 1 <= n_enc_layers_edge <= n_enc_layers_full");
  }
  if (n_dec_layers < 1) fail("n_dec_layers must be at least 1");
  if (vocab_size < 2) fail("vocab_size must be at least 2");
  if (n_mel == 0) fail("n_mel must be positive");
  if (max_src_len == 0 || max_tgt_len == 0) fail("max_src_len and max_tgt_len must be positive");
  if (task == Task::STT && enc_fixed_len == 0) fail("STT requires enc_fixed_len");
  if (sample_rate == 0 || n_fft == 0 || hop_length == 0 || hop_length > n_fft) {
    fail("audio front end needs sample_rate > 0 and 0 < hop_length <= n_fft");
  }
}

ModelConfig ModelConfig::bundled_stt() {
  ModelConfig c;
  c.task = Task::STT;
  c.n_enc_layers_full = 8;
  c.n_enc_layers_edge = 3;
  c.n_dec_layers = 5;
  c.vocab_size = 128;
  c.n_mel = 40;
  c.max_src_len = 3000;
  c.max_tgt_len = 64;
  c.enc_fixed_len = 64;
  c.n_fft = 400;
  c.hop_length = 160;
  return c;
}

ModelConfig ModelConfig::bundled_tts() {
  ModelConfig c;
  c.task = Task::TTS;
  c.n_enc_layers_full = 8;
  c.n_enc_layers_edge = 2;
  c.n_dec_layers = 2;
  c.vocab_size = 128;
  c.n_mel = 40;
  c.max_src_len = 512;
  c.max_tgt_len = 1200;
  c.enc_fixed_len = 0;
  c.n_fft = 1024;
  c.hop_length = 256;
  return c;
}

const Tensor& SplitModel::edge_param(const std::string& name) const {
  auto it = edge.find(name);
  if (it == edge.end()) throw Error(ErrorCode::InvalidArgument, "missing edge parameter " + name);
  return it->second;
}

const Tensor& SplitModel::cloud_param(const std::string& name) const {
  auto it = cloud.find(name);
  if (it == cloud.end()) throw Error(ErrorCode::InvalidArgument, "missing cloud parameter " + name);
  return it->second;
}

namespace {

class ParamBuilder {
 public:
  ParamBuilder(uint64_t seed, uint32_t d_model)
      : rng_(seed), bound_(1.0 / std::sqrt(static_cast<double>(d_model))) {}

  void uniform(ParamMap& into, const std::string& name, Shape shape) {
    std::vector<float> v(shape_elements(shape));
    for (float& x : v) {
      // 53 random bits -> [0, 1), mapped onto [-a, a].
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      x = static_cast<float>((2.0 * u - 1.0) * bound_);
    }
    into.emplace(name, Tensor(std::move(shape), std::move(v)));
  }

  void constant(ParamMap& into, const std::string& name, uint32_t n, float value) {
    into.emplace(name, Tensor(Shape{n}, std::vector<float>(n, value)));
  }

  void linear(ParamMap& into, const std::string& name, uint32_t in, uint32_t out) {
    uniform(into, name + ".weight", {in, out});
    uniform(into, name + ".bias", {out});
  }

  void norm(ParamMap& into, const std::string& name, uint32_t d) {
    constant(into, name + ".gamma", d, 1.0f);
    constant(into, name + ".beta", d, 0.0f);
  }

  void attention(ParamMap& into, const std::string& name, uint32_t d) {
    for (const char* p : {".q", ".k", ".v", ".o"}) linear(into, name + p, d, d);
  }

  void encoder_layer(ParamMap& into, const std::string& prefix, uint32_t d, uint32_t ff) {
    norm(into, prefix + ".ln1", d);
    attention(into, prefix + ".attn", d);
    norm(into, prefix + ".ln2", d);
    linear(into, prefix + ".ff1", d, ff);
    linear(into, prefix + ".ff2", ff, d);
  }

  void decoder_layer(ParamMap& into, const std::string& prefix, uint32_t d, uint32_t ff) {
    norm(into, prefix + ".ln1", d);
    attention(into, prefix + ".self", d);
    norm(into, prefix + ".ln2", d);
    attention(into, prefix + ".cross", d);
    norm(into, prefix + ".ln3", d);
    linear(into, prefix + ".ff1", d, ff);
    linear(into, prefix + ".ff2", ff, d);
  }

 private:
  std::mt19937_64 rng_;
  double bound_;
};

std::string layer_name(const char* stack, uint32_t i) {
  return std::string(stack) + ".layer" + std::to_string(i);
}

const char* encoder_stack(EncoderBranch which) {
  return which == EncoderBranch::Edge ? "edge_enc" : "cloud_enc";
}

}  // namespace

SplitModel build_split_model(const ModelConfig& config) {
  config.validate();
  SplitModel m;
  m.config = config;
  const uint32_t d = config.d_model;
  const uint32_t ff = config.ffn_width();
  ParamBuilder pb(config.seed, d);

  if (config.task == Task::STT) {
    pb.linear(m.edge, "prenet.proj", config.n_mel, d);
  } else {
    pb.uniform(m.edge, "prenet.embed", {config.vocab_size, d});
  }
  for (uint32_t i = 0; i < config.n_enc_layers_edge; ++i) {
    pb.encoder_layer(m.edge, layer_name("edge_enc", i), d, ff);
  }
  pb.norm(m.edge, "edge_enc.norm", d);

  if (config.task == Task::STT) {
    pb.uniform(m.edge, "dec.embed", {config.vocab_size, d});
  } else {
    pb.linear(m.edge, "dec.prenet", config.n_mel, d);
  }
  for (uint32_t i = 0; i < config.n_dec_layers; ++i) {
    pb.decoder_layer(m.edge, layer_name("dec", i), d, ff);
  }
  pb.norm(m.edge, "dec.norm", d);
  if (config.task == Task::STT) {
    pb.linear(m.edge, "dec.out", d, config.vocab_size);
  } else {
    pb.linear(m.edge, "postnet.mel", d, config.n_mel);
    pb.linear(m.edge, "postnet.stop", d, 1);
  }

  for (uint32_t i = 0; i < config.n_enc_layers_full; ++i) {
    pb.encoder_layer(m.cloud, layer_name("cloud_enc", i), d, ff);
  }
  pb.norm(m.cloud, "cloud_enc.norm", d);
  return m;
}

void quantize_edge(SplitModel& model) {
  ParamMap q;
  for (const auto& [name, t] : model.edge) q.emplace(name, quantize_linear(t));
  model.edge_quantized = std::move(q);
}

SplitModel with_int8_edge_weights(const SplitModel& model) {
  SplitModel out = model;
  for (auto& [name, t] : out.edge) t = dequantize(quantize_linear(t));
  out.edge_quantized.reset();
  return out;
}

SplitModel with_identity_extended_cloud(const SplitModel& model) {
  SplitModel out = model;
  out.cloud.clear();
  const uint32_t d = model.config.d_model;
  const uint32_t ff = model.config.ffn_width();
  const std::string edge_prefix = "edge_enc.";
  for (const auto& [name, t] : model.edge) {
    if (name.rfind(edge_prefix, 0) == 0) {
      out.cloud.emplace("cloud_enc." + name.substr(edge_prefix.size()), t);
    }
  }
  for (uint32_t i = model.config.n_enc_layers_edge; i < model.config.n_enc_layers_full; ++i) {
    const std::string p = layer_name("cloud_enc", i);
    // Any finite values work for the inner weights; only the residual
    // branches' output projections must vanish.
    const std::string src = layer_name("edge_enc", 0);
    for (const char* suffix : {".ln1.gamma", ".ln1.beta", ".attn.q.weight", ".attn.q.bias",
                               ".attn.k.weight", ".attn.k.bias", ".attn.v.weight",
                               ".attn.v.bias", ".ln2.gamma", ".ln2.beta", ".ff1.weight",
                               ".ff1.bias"}) {
      out.cloud.emplace(p + suffix, model.edge_param(src + suffix));
    }
    out.cloud.emplace(p + ".attn.o.weight", Tensor::zeros({d, d}));
    out.cloud.emplace(p + ".attn.o.bias", Tensor::zeros({d}));
    out.cloud.emplace(p + ".ff2.weight", Tensor::zeros({ff, d}));
    out.cloud.emplace(p + ".ff2.bias", Tensor::zeros({d}));
  }
  return out;
}

uint64_t param_count(const SplitModel& model, Part part) {
  auto count = [](const ParamMap& params) {
    uint64_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
  };
  switch (part) {
    case Part::Edge: return count(model.edge);
    case Part::Cloud: return count(model.cloud);
    case Part::All: return count(model.edge) + count(model.cloud);
  }
  return 0;
}

std::vector<int32_t> text_to_tokens(const std::string& text, uint32_t vocab_size) {
  std::vector<int32_t> tokens;
  tokens.reserve(text.size());
  for (unsigned char c : text) {
    if (c >= vocab_size) {
      throw Error(ErrorCode::TokenOutOfRange,
                  "character code " + std::to_string(c) + " outside vocabulary of " +
                      std::to_string(vocab_size));
    }
    tokens.push_back(c);
  }
  return tokens;
}

Tensor prenet_forward(const SplitModel& model, const MelSpec& mel, OpCounter* ops) {
  const auto& cfg = model.config;
  if (cfg.task != Task::STT) {
    throw Error(ErrorCode::InvalidArgument, "mel prenet requires an STT model");
  }
  if (mel.frames.rank() != 2 || mel.n_mel() != cfg.n_mel) {
    throw Error(ErrorCode::ShapeMismatch, "mel input does not have n_mel columns");
  }
  if (mel.n_frames() > cfg.max_src_len) {
    throw Error(ErrorCode::InputTooLong, std::to_string(mel.n_frames()) +
                                             " mel frames exceed max_src_len " +
                                             std::to_string(cfg.max_src_len));
  }
  const Mat proj = detail::linear(detail::from_tensor(mel.frames), model.edge_param("prenet.proj.weight"),
                                  model.edge_param("prenet.proj.bias"), ops);

  // Stride-2 pooling over time; an odd trailing frame stands alone.
  const uint32_t pooled = (proj.rows + 1) / 2;
  const uint32_t kept = std::min(pooled, cfg.enc_fixed_len);
  Mat out(cfg.enc_fixed_len, cfg.d_model);
  for (uint32_t r = 0; r < kept; ++r) {
    const uint32_t a = 2 * r;
    const uint32_t b = std::min(a + 1, proj.rows - 1);
    auto dst = out.row(r);
    const auto ra = proj.row(a);
    const auto rb = proj.row(b);
    for (uint32_t c = 0; c < cfg.d_model; ++c) dst[c] = 0.5f * (ra[c] + rb[c]);
  }
  detail::add_positional_encoding(out, 0, kept);
  return detail::to_tensor(out);
}

Tensor prenet_forward(const SplitModel& model, std::span<const int32_t> tokens, OpCounter*) {
  const auto& cfg = model.config;
  if (cfg.task != Task::TTS) {
    throw Error(ErrorCode::InvalidArgument, "token prenet requires a TTS model");
  }
  if (tokens.empty()) throw Error(ErrorCode::InvalidArgument, "empty token sequence");
  if (tokens.size() > cfg.max_src_len) {
    throw Error(ErrorCode::InputTooLong, std::to_string(tokens.size()) +
                                             " tokens exceed max_src_len " +
                                             std::to_string(cfg.max_src_len));
  }
  const auto embed = model.edge_param("prenet.embed").f32();
  Mat out(static_cast<uint32_t>(tokens.size()), cfg.d_model);
  for (uint32_t r = 0; r < out.rows; ++r) {
    const int32_t t = tokens[r];
    if (t < 0 || static_cast<uint32_t>(t) >= cfg.vocab_size) {
      throw Error(ErrorCode::TokenOutOfRange, "token id " + std::to_string(t) + " out of range");
    }
    std::copy_n(embed.begin() + std::size_t(t) * cfg.d_model, cfg.d_model, out.row(r).begin());
  }
  detail::add_positional_encoding(out, 0, out.rows);
  return detail::to_tensor(out);
}

namespace {

struct AttnWeights {
  const Tensor *qw, *qb, *kw, *kb, *vw, *vb, *ow, *ob;
};

AttnWeights attn_weights(const ParamMap& params, const std::string& prefix) {
  auto get = [&](const char* s) -> const Tensor* {
    auto it = params.find(prefix + s);
    if (it == params.end()) throw Error(ErrorCode::InvalidArgument, "missing parameter " + prefix + s);
    return &it->second;
  };
  return {get(".q.weight"), get(".q.bias"), get(".k.weight"), get(".k.bias"),
          get(".v.weight"), get(".v.bias"), get(".o.weight"), get(".o.bias")};
}

const Tensor& param(const ParamMap& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw Error(ErrorCode::InvalidArgument, "missing parameter " + name);
  return it->second;
}

Mat feed_forward(const ParamMap& params, const std::string& p, const Mat& x, OpCounter* ops) {
  Mat h = detail::linear(x, param(params, p + ".ff1.weight"), param(params, p + ".ff1.bias"), ops);
  detail::gelu_inplace(h);
  return detail::linear(h, param(params, p + ".ff2.weight"), param(params, p + ".ff2.bias"), ops);
}

}  // namespace

HiddenStates encoder_forward(const SplitModel& model, const Tensor& features, EncoderBranch which,
                             OpCounter* ops, std::vector<Tensor>* attention_capture) {
  const auto& cfg = model.config;
  if (features.rank() != 2 || features.dtype() != DType::FP32 ||
      features.shape()[1] != cfg.d_model) {
    throw Error(ErrorCode::ShapeMismatch, "encoder features must be FP32 [len, d_model]");
  }
  const uint32_t len = features.shape()[0];
  if (cfg.task == Task::STT ? len != cfg.enc_fixed_len : (len == 0 || len > cfg.max_src_len)) {
    throw Error(ErrorCode::ShapeMismatch,
                "encoder input length " + std::to_string(len) + " invalid for this config");
  }
  const ParamMap& params = which == EncoderBranch::Edge ? model.edge : model.cloud;
  const uint32_t layers = which == EncoderBranch::Edge ? cfg.n_enc_layers_edge : cfg.n_enc_layers_full;
  const std::string stack = encoder_stack(which);

  Mat x = detail::from_tensor(features);
  for (uint32_t i = 0; i < layers; ++i) {
    const std::string p = layer_name(stack.c_str(), i);
    const Mat h = detail::layer_norm(x, param(params, p + ".ln1.gamma"), param(params, p + ".ln1.beta"));
    const auto w = attn_weights(params, p + ".attn");
    const Mat q = detail::linear(h, *w.qw, *w.qb, ops);
    const Mat k = detail::linear(h, *w.kw, *w.kb, ops);
    const Mat v = detail::linear(h, *w.vw, *w.vb, ops);
    const Mat a = detail::attention(q, k, v, cfg.n_heads, -1, ops, attention_capture);
    detail::add_inplace(x, detail::linear(a, *w.ow, *w.ob, ops));
    const Mat h2 = detail::layer_norm(x, param(params, p + ".ln2.gamma"), param(params, p + ".ln2.beta"));
    detail::add_inplace(x, feed_forward(params, p, h2, ops));
  }
  x = detail::layer_norm(x, param(params, stack + ".norm.gamma"), param(params, stack + ".norm.beta"));
  return {detail::to_tensor(x), which};
}

namespace {

// Incremental causal decoder: each step pushes one row through every layer,
// caching that layer's self-attention keys and values.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const SplitModel& model, const Mat& memory, OpCounter* ops)
      : model_(model), cfg_(model.config), ops_(ops) {
    for (uint32_t i = 0; i < cfg_.n_dec_layers; ++i) {
      LayerState st;
      st.prefix = layer_name("dec", i);
      st.self = attn_weights(model.edge, st.prefix + ".self");
      st.cross = attn_weights(model.edge, st.prefix + ".cross");
      st.cross_k = detail::linear(memory, *st.cross.kw, *st.cross.kb, ops);
      st.cross_v = detail::linear(memory, *st.cross.vw, *st.cross.vb, ops);
      for (const char* n : {".ln1", ".ln2", ".ln3"}) {
        st.norms.push_back(&param(model.edge, st.prefix + n + ".gamma"));
        st.norms.push_back(&param(model.edge, st.prefix + n + ".beta"));
      }
      st.ff = {&param(model.edge, st.prefix + ".ff1.weight"), &param(model.edge, st.prefix + ".ff1.bias"),
               &param(model.edge, st.prefix + ".ff2.weight"), &param(model.edge, st.prefix + ".ff2.bias")};
      st.self_k = Mat(0, cfg_.d_model);
      st.self_v = Mat(0, cfg_.d_model);
      layers_.push_back(std::move(st));
    }
  }

  // Consumes the embedded input row for position `pos`, returns the final
  // normalized decoder state for that position.
  Mat step(Mat x, uint32_t pos) {
    for (auto& st : layers_) {
      Mat h = detail::layer_norm(x, *st.norms[0], *st.norms[1]);
      const Mat q = detail::linear(h, *st.self.qw, *st.self.qb, ops_);
      append_row(st.self_k, detail::linear(h, *st.self.kw, *st.self.kb, ops_));
      append_row(st.self_v, detail::linear(h, *st.self.vw, *st.self.vb, ops_));
      const Mat a = detail::attention(q, st.self_k, st.self_v, cfg_.n_heads, pos, ops_, nullptr);
      detail::add_inplace(x, detail::linear(a, *st.self.ow, *st.self.ob, ops_));

      h = detail::layer_norm(x, *st.norms[2], *st.norms[3]);
      const Mat cq = detail::linear(h, *st.cross.qw, *st.cross.qb, ops_);
      const Mat ca = detail::attention(cq, st.cross_k, st.cross_v, cfg_.n_heads, -1, ops_, nullptr);
      detail::add_inplace(x, detail::linear(ca, *st.cross.ow, *st.cross.ob, ops_));

      h = detail::layer_norm(x, *st.norms[4], *st.norms[5]);
      Mat f = detail::linear(h, *st.ff[0], *st.ff[1], ops_);
      detail::gelu_inplace(f);
      detail::add_inplace(x, detail::linear(f, *st.ff[2], *st.ff[3], ops_));
    }
    return detail::layer_norm(x, *final_gamma_, *final_beta_);
  }

 private:
  struct LayerState {
    std::string prefix;
    AttnWeights self{};
    AttnWeights cross{};
    std::vector<const Tensor*> norms;  // ln1..ln3 gamma, beta
    std::array<const Tensor*, 4> ff{};
    Mat cross_k, cross_v, self_k, self_v;
  };

  static void append_row(Mat& m, const Mat& row) {
    m.data.insert(m.data.end(), row.data.begin(), row.data.end());
    ++m.rows;
  }

  const SplitModel& model_;
  const ModelConfig& cfg_;
  OpCounter* ops_;
  std::vector<LayerState> layers_;
  const Tensor* final_gamma_ = &param(model_.edge, "dec.norm.gamma");
  const Tensor* final_beta_ = &param(model_.edge, "dec.norm.beta");
};

}  // namespace

DecodeResult decoder_greedy(const SplitModel& model, const HiddenStates& hidden, OpCounter* ops,
                            std::optional<uint32_t> max_steps) {
  const auto& cfg = model.config;
  if (hidden.states.rank() != 2 || hidden.states.shape()[1] != cfg.d_model) {
    throw Error(ErrorCode::ShapeMismatch, "hidden states must be [enc_len, d_model]");
  }
  const Mat memory = detail::from_tensor(hidden.states);
  const uint32_t limit = std::min(cfg.max_tgt_len, max_steps.value_or(cfg.max_tgt_len));
  IncrementalDecoder dec(model, memory, ops);
  DecodeResult result;

  if (cfg.task == Task::STT) {
    const auto embed = model.edge_param("dec.embed").f32();
    const Tensor& ow = model.edge_param("dec.out.weight");
    const Tensor& ob = model.edge_param("dec.out.bias");
    int32_t prev = kBosToken;
    for (uint32_t pos = 0; pos < limit; ++pos) {
      Mat x(1, cfg.d_model);
      std::copy_n(embed.begin() + std::size_t(prev) * cfg.d_model, cfg.d_model, x.data.begin());
      detail::add_positional_encoding(x, pos, 1);
      const Mat h = dec.step(std::move(x), pos);
      Mat logits = detail::linear(h, ow, ob, ops);
      auto row = logits.row(0);
      const auto best = static_cast<int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
      // log-softmax of the chosen entry
      const float mx = row[best];
      double sum = 0.0;
      for (float v : row) sum += std::exp(static_cast<double>(v) - mx);
      result.step_logprobs.push_back(static_cast<float>(-std::log(sum)));
      ++result.steps;
      if (best == kEosToken) break;
      result.tokens.push_back(best);
      prev = best;
    }
    return result;
  }

  const uint32_t src_len = hidden.states.shape()[0];
  const uint32_t min_frames = std::min(limit, cfg.min_frames_per_token * src_len);
  const Tensor& pw = model.edge_param("dec.prenet.weight");
  const Tensor& pb = model.edge_param("dec.prenet.bias");
  const Tensor& mw = model.edge_param("postnet.mel.weight");
  const Tensor& mb = model.edge_param("postnet.mel.bias");
  const Tensor& sw = model.edge_param("postnet.stop.weight");
  const Tensor& sb = model.edge_param("postnet.stop.bias");
  std::vector<float> frames;
  Mat prev(1, cfg.n_mel);
  for (uint32_t pos = 0; pos < limit; ++pos) {
    Mat x = detail::linear(prev, pw, pb, ops);
    detail::add_positional_encoding(x, pos, 1);
    const Mat h = dec.step(std::move(x), pos);
    Mat frame = detail::linear(h, mw, mb, ops);
    const Mat stop = detail::linear(h, sw, sb, ops);
    frames.insert(frames.end(), frame.data.begin(), frame.data.end());
    ++result.steps;
    const double p_stop = 1.0 / (1.0 + std::exp(-static_cast<double>(stop.data[0])));
    if (pos + 1 >= min_frames && p_stop > 0.5) break;
    prev = std::move(frame);
  }
  MelSpec mel;
  mel.frames = Tensor({result.steps, cfg.n_mel}, std::move(frames));
  mel.frame_hop = cfg.hop_length;
  mel.sample_rate = cfg.sample_rate;
  result.mel = std::move(mel);
  return result;
}

}  // namespace cascade
