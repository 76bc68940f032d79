// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dual-path masking network: overlapping chunking of a frame sequence,
// repeated intra-chunk / inter-chunk transformer stacks, a PReLU + 1x1
// projection post-net, overlap-add merge, and a tanh/sigmoid gated mask
// head whose outputs always lie in [0, 1).
//
// Frame sequences are frame-major [L, F]; chunked data is [S, C, d]
// (chunk index, intra-chunk position, feature).

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dualpath/nn.hpp"
#include "dualpath/tensor.hpp"

namespace dualpath {

// ---------------------------------------------------------------------------
// Configuration and parameters
// ---------------------------------------------------------------------------

struct MaskerConfig {
  size_t repeats = 2;    // dual-path repetitions
  size_t k_intra = 4;    // transformer blocks per intra-chunk stack
  size_t k_inter = 4;    // transformer blocks per inter-chunk stack
  size_t d_model = 256;
  size_t d_ff = 256;
  size_t n_heads = 8;
  size_t chunk_size = 250;  // C; hop is C/2 (50% overlap)
  bool use_positional_encoding = true;

  void validate() const {
    if (repeats > 64 || k_intra > 64 || k_inter > 64)
      throw std::invalid_argument("MaskerConfig: implausible stack depth");
    if (d_model == 0 || d_ff == 0 || n_heads == 0 || d_model % n_heads != 0)
      throw std::invalid_argument("MaskerConfig: widths must be positive and divisible by heads");
    if (chunk_size < 2 || chunk_size % 2 != 0)
      throw std::invalid_argument("MaskerConfig: chunk size must be even and >= 2");
  }
};

struct GateParams {
  LinearLayer tanh_path;     // F -> F
  LinearLayer sigmoid_path;  // F -> F
};

struct SepFormerParams {
  LinearLayer input_proj;  // F -> d_model; empty weight means identity (F == d_model)
  std::vector<TransformerBlockParams> intra;  // repeats * k_intra
  std::vector<TransformerBlockParams> inter;  // repeats * k_inter
  Tensor prelu_slope;                         // scalar
  LinearLayer post;                           // d_model -> F (1x1 conv over features)
  GateParams gate;
};

inline SepFormerParams make_sepformer(std::mt19937_64& rng, size_t feature_width, const MaskerConfig& cfg) {
  cfg.validate();
  SepFormerParams p;
  if (feature_width != cfg.d_model) p.input_proj = make_linear(rng, cfg.d_model, feature_width);
  for (size_t i = 0; i < cfg.repeats * cfg.k_intra; ++i)
    p.intra.push_back(make_transformer_block(rng, cfg.d_model, cfg.d_ff, cfg.n_heads));
  for (size_t i = 0; i < cfg.repeats * cfg.k_inter; ++i)
    p.inter.push_back(make_transformer_block(rng, cfg.d_model, cfg.d_ff, cfg.n_heads));
  p.prelu_slope = Tensor::scalar(0.25);
  p.post = make_linear(rng, feature_width, cfg.d_model);
  p.gate.tanh_path = make_linear(rng, feature_width, feature_width);
  p.gate.sigmoid_path = make_linear(rng, feature_width, feature_width);
  return p;
}

inline size_t masker_parameter_count(const SepFormerParams& p) {
  size_t n = p.input_proj.weight.defined() ? p.input_proj.weight.numel() + p.input_proj.bias.numel() : 0;
  auto add_block = [&n](const TransformerBlockParams& b) {
    for (const LinearLayer* l : {&b.mha.q, &b.mha.k, &b.mha.v, &b.mha.o, &b.ffw.in, &b.ffw.out})
      n += l->weight.numel() + l->bias.numel();
    n += b.norm1.gain.numel() + b.norm1.bias.numel() + b.norm2.gain.numel() + b.norm2.bias.numel();
  };
  for (const auto& b : p.intra) add_block(b);
  for (const auto& b : p.inter) add_block(b);
  n += p.prelu_slope.numel();
  n += p.post.weight.numel() + p.post.bias.numel();
  n += p.gate.tanh_path.weight.numel() + p.gate.tanh_path.bias.numel();
  n += p.gate.sigmoid_path.weight.numel() + p.gate.sigmoid_path.bias.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

// Chunked view of a frame sequence. data[s, c, :] = frames[s*C/2 + c, :],
// zero-padded past the end of the sequence.
struct ChunkTensor {
  Tensor data;           // [S, C, d]
  size_t chunk_size = 0; // C
  size_t seq_len = 0;    // L before padding
};

// Number of hop-C/2 chunks needed to cover L frames.
inline size_t chunk_count(size_t seq_len, size_t chunk_size) {
  size_t hop = chunk_size / 2;
  if (seq_len <= chunk_size) return 1;
  return 1 + (seq_len - chunk_size + hop - 1) / hop;
}

inline ChunkTensor chunk_rows(const Tensor& w, size_t chunk_size) {
  if (w.ndim() != 2) throw std::invalid_argument("chunk_rows: input must be [frames, features]");
  size_t L = w.shape[0], d = w.shape[1];
  if (chunk_size < 2 || chunk_size % 2 != 0)
    throw std::invalid_argument("chunk_rows: chunk size must be even and >= 2");
  if (chunk_size > 2 * L)
    throw std::invalid_argument("chunk_rows: chunk size " + std::to_string(chunk_size) +
                                " exceeds twice the sequence length " + std::to_string(L));
  size_t C = chunk_size, hop = C / 2;
  size_t S = chunk_count(L, C);

  Tensor out = Tensor::zeros({S, C, d});
  for (size_t s = 0; s < S; ++s)
    for (size_t c = 0; c < C; ++c) {
      size_t l = s * hop + c;
      if (l < L) std::memcpy(out.data() + (s * C + c) * d, w.data() + l * d, d * sizeof(double));
    }
  Tape* tp = detail::common_tape({&w});
  if (tp)
    detail::attach(out, tp, {w.node}, [wn = w.node, S, C, d, hop, L](Tape& tape, const std::vector<double>& up) {
      auto& gw = tape.adjoint(wn);
      for (size_t s = 0; s < S; ++s)
        for (size_t c = 0; c < C; ++c) {
          size_t l = s * hop + c;
          if (l < L)
            for (size_t j = 0; j < d; ++j) gw[l * d + j] += up[(s * C + c) * d + j];
        }
    });
  return {out, C, L};
}

// Overlap-add of the chunks normalized by the per-frame overlap count, so
// merge_rows(chunk_rows(x)) == x and padding never biases amplitudes.
inline Tensor merge_rows(const ChunkTensor& ct) {
  if (ct.data.ndim() != 3) throw std::invalid_argument("merge_rows: chunk data must be [S, C, d]");
  size_t S = ct.data.shape[0], C = ct.data.shape[1], d = ct.data.shape[2];
  size_t L = ct.seq_len, hop = C / 2;
  if (C != ct.chunk_size || S != chunk_count(L, C))
    throw std::invalid_argument("merge_rows: sequence length inconsistent with chunk count");

  std::vector<double> counts(L, 0.0);
  for (size_t s = 0; s < S; ++s)
    for (size_t c = 0; c < C; ++c)
      if (s * hop + c < L) counts[s * hop + c] += 1.0;

  Tensor out = Tensor::zeros({L, d});
  for (size_t s = 0; s < S; ++s)
    for (size_t c = 0; c < C; ++c) {
      size_t l = s * hop + c;
      if (l < L)
        for (size_t j = 0; j < d; ++j) out.data()[l * d + j] += ct.data.data()[(s * C + c) * d + j];
    }
  for (size_t l = 0; l < L; ++l)
    for (size_t j = 0; j < d; ++j) out.data()[l * d + j] /= counts[l];

  Tape* tp = detail::common_tape({&ct.data});
  if (tp)
    detail::attach(out, tp, {ct.data.node},
                   [dn = ct.data.node, S, C, d, hop, L, counts](Tape& tape, const std::vector<double>& up) {
                     auto& gd = tape.adjoint(dn);
                     for (size_t s = 0; s < S; ++s)
                       for (size_t c = 0; c < C; ++c) {
                         size_t l = s * hop + c;
                         if (l < L)
                           for (size_t j = 0; j < d; ++j)
                             gd[(s * C + c) * d + j] += up[l * d + j] / counts[l];
                       }
                   });
  return out;
}

// ---------------------------------------------------------------------------
// Dual-path core
// ---------------------------------------------------------------------------

namespace detail {

// Tiles a constant [rows, d] encoding across a leading batch axis.
inline Tensor tile_leading(const Tensor& pe, size_t batch) {
  size_t rows = pe.shape[0], d = pe.shape[1];
  Tensor out = Tensor::zeros({batch, rows, d});
  for (size_t b = 0; b < batch; ++b)
    std::memcpy(out.data() + b * rows * d, pe.data(), rows * d * sizeof(double));
  return out;
}

}  // namespace detail

// repeats x (intra-chunk stack over positions, batched over chunks;
// transpose; inter-chunk stack over chunks, batched over positions;
// transpose back). Positional encoding is added once at the input of each
// stack entry.
inline ChunkTensor dual_path_forward(const ChunkTensor& ct, const SepFormerParams& p, const MaskerConfig& cfg) {
  cfg.validate();
  size_t S = ct.data.shape[0], C = ct.data.shape[1], d = ct.data.shape[2];
  if (d != cfg.d_model) throw std::invalid_argument("dual_path_forward: feature width must equal d_model");
  if (p.intra.size() != cfg.repeats * cfg.k_intra || p.inter.size() != cfg.repeats * cfg.k_inter)
    throw std::invalid_argument("dual_path_forward: parameter stack sizes do not match the config");

  Tensor x = ct.data;  // [S, C, d]
  for (size_t r = 0; r < cfg.repeats; ++r) {
    if (cfg.use_positional_encoding && cfg.k_intra > 0)
      x = add(x, detail::tile_leading(positional_encoding(C, d), S));
    for (size_t k = 0; k < cfg.k_intra; ++k) x = transformer_block_forward(x, p.intra[r * cfg.k_intra + k]);
    x = swap_axes(x, 0, 1);  // [C, S, d]
    if (cfg.use_positional_encoding && cfg.k_inter > 0)
      x = add(x, detail::tile_leading(positional_encoding(S, d), C));
    for (size_t k = 0; k < cfg.k_inter; ++k) x = transformer_block_forward(x, p.inter[r * cfg.k_inter + k]);
    x = swap_axes(x, 0, 1);  // [S, C, d]
  }
  return {x, ct.chunk_size, ct.seq_len};
}

// ---------------------------------------------------------------------------
// Mask head
// ---------------------------------------------------------------------------

// m = ReLU(tanh(A y) * sigmoid(B y)); the product lies in (-1, 1), so after
// ReLU every element is in [0, 1). The exact product is strictly below one,
// but under deep saturation float64 rounds it to 1.0; the final clamp to the
// largest double below one restores the documented half-open range (the true
// derivative there is ~1e-87, i.e. zero to machine precision).
inline Tensor mask_gate(const Tensor& y, const GateParams& g) {
  constexpr double kBelowOne = 1.0 - 1.1102230246251565e-16;  // nextafter(1.0, 0.0)
  Tensor a = tanh(linear_forward(y, g.tanh_path));
  Tensor b = sigmoid(linear_forward(y, g.sigmoid_path));
  Tensor m = relu(mul(a, b));
  return detail::unary_elementwise(
      m, [](double v) { return v < kBelowOne ? v : kBelowOne; },
      [](double v, double) { return v < kBelowOne ? 1.0 : 0.0; });
}

// Full masking network over a frame-major [L, F] feature sequence.
inline Tensor masker_forward(const Tensor& w, const SepFormerParams& p, const MaskerConfig& cfg) {
  cfg.validate();
  if (w.ndim() != 2) throw std::invalid_argument("masker_forward: input must be [frames, features]");
  Tensor h = p.input_proj.weight.defined() ? linear_forward(w, p.input_proj) : w;
  ChunkTensor ct = chunk_rows(h, cfg.chunk_size);
  ct = dual_path_forward(ct, p, cfg);
  Tensor y = prelu(ct.data, p.prelu_slope);
  y = linear_forward(y, p.post);  // [S, C, F]
  Tensor merged = merge_rows({y, ct.chunk_size, ct.seq_len});
  return mask_gate(merged, p.gate);
}

}  // namespace dualpath
