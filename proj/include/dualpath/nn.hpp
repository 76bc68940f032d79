// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Neural building blocks: linear layers, sinusoidal positional encoding,
// multi-head attention, pre-norm transformer blocks, and the 1-D
// convolution / transposed-convolution pair used by the learned encoder
// and decoder.
//
// Layout conventions: sequences are [B, L, d] (batch, position, feature);
// framed signals are frame-major [L, F] (row l = feature vector of frame l).
// Attention heads are processed sequentially to keep the peak size of the
// score matrices at 1/n_heads of the full batched form.

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dualpath/tensor.hpp"

namespace dualpath {

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

struct LinearLayer {
  Tensor weight;  // [d_out, d_in]
  Tensor bias;    // [d_out]
};

struct LayerNormParams {
  Tensor gain;  // [d]
  Tensor bias;  // [d]
};

struct MultiHeadAttentionParams {
  LinearLayer q, k, v, o;  // all [d, d]
  size_t n_heads = 8;
};

struct FeedForwardParams {
  LinearLayer in;   // d -> d_ff
  LinearLayer out;  // d_ff -> d
};

struct TransformerBlockParams {
  MultiHeadAttentionParams mha;
  LayerNormParams norm1, norm2;
  FeedForwardParams ffw;
};

struct Conv1dLayer {
  Tensor kernels;  // [n_filters, kernel_size], single input channel
  Tensor bias;     // [n_filters]
  size_t stride = 1;
};

struct ConvTranspose1dLayer {
  Tensor kernels;  // [n_filters, kernel_size], single output channel
  size_t stride = 1;
};

// ---------------------------------------------------------------------------
// Initialization: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) on weights/biases
// ---------------------------------------------------------------------------

inline Tensor uniform_init(std::mt19937_64& rng, std::vector<size_t> shape, size_t fan_in) {
  double bound = 1.0 / std::sqrt(double(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = u(rng);
  return t;
}

inline LinearLayer make_linear(std::mt19937_64& rng, size_t d_out, size_t d_in) {
  return {uniform_init(rng, {d_out, d_in}, d_in), uniform_init(rng, {d_out}, d_in)};
}

inline LayerNormParams make_layer_norm(size_t d) { return {Tensor::filled({d}, 1.0), Tensor::zeros({d})}; }

inline MultiHeadAttentionParams make_mha(std::mt19937_64& rng, size_t d, size_t n_heads) {
  MultiHeadAttentionParams p;
  p.n_heads = n_heads;
  p.q = make_linear(rng, d, d);
  p.k = make_linear(rng, d, d);
  p.v = make_linear(rng, d, d);
  p.o = make_linear(rng, d, d);
  return p;
}

inline TransformerBlockParams make_transformer_block(std::mt19937_64& rng, size_t d, size_t d_ff, size_t n_heads) {
  TransformerBlockParams p;
  p.mha = make_mha(rng, d, n_heads);
  p.norm1 = make_layer_norm(d);
  p.norm2 = make_layer_norm(d);
  p.ffw.in = make_linear(rng, d_ff, d);
  p.ffw.out = make_linear(rng, d, d_ff);
  return p;
}

// All-zero weights with identity norms: the block reduces to its skips.
inline TransformerBlockParams make_transformer_block_zero(size_t d, size_t d_ff, size_t n_heads) {
  TransformerBlockParams p;
  p.mha.n_heads = n_heads;
  p.mha.q = {Tensor::zeros({d, d}), Tensor::zeros({d})};
  p.mha.k = {Tensor::zeros({d, d}), Tensor::zeros({d})};
  p.mha.v = {Tensor::zeros({d, d}), Tensor::zeros({d})};
  p.mha.o = {Tensor::zeros({d, d}), Tensor::zeros({d})};
  p.norm1 = make_layer_norm(d);
  p.norm2 = make_layer_norm(d);
  p.ffw.in = {Tensor::zeros({d_ff, d}), Tensor::zeros({d_ff})};
  p.ffw.out = {Tensor::zeros({d, d_ff}), Tensor::zeros({d})};
  return p;
}

inline Conv1dLayer make_conv1d(std::mt19937_64& rng, size_t n_filters, size_t kernel_size, size_t stride) {
  return {uniform_init(rng, {n_filters, kernel_size}, kernel_size), uniform_init(rng, {n_filters}, kernel_size),
          stride};
}

inline ConvTranspose1dLayer make_conv_transpose1d(std::mt19937_64& rng, size_t n_filters, size_t kernel_size,
                                                  size_t stride) {
  return {uniform_init(rng, {n_filters, kernel_size}, kernel_size), stride};
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

// y[..., o] = sum_i x[..., i] * W[o, i] + b[o]
inline Tensor linear_forward(const Tensor& x, const LinearLayer& layer) {
  size_t d_out = layer.weight.shape[0], d_in = layer.weight.shape[1];
  if (x.ndim() < 1 || x.shape.back() != d_in)
    throw std::invalid_argument("linear_forward: input width does not match the layer");
  size_t rows = x.numel() / d_in;
  Tensor flat = reshape(x, {rows, d_in});
  Tensor y = add_bias(matmul(flat, transpose_last2(layer.weight)), layer.bias);
  std::vector<size_t> out_shape = x.shape;
  out_shape.back() = d_out;
  return reshape(y, out_shape);
}

inline Tensor layer_norm_affine(const Tensor& x, const LayerNormParams& p) {
  return layer_norm(x, p.gain, p.bias);
}

// Sinusoidal encoding: PE(pos, 2i) = sin(pos / 10000^(2i/d)),
// PE(pos, 2i+1) = cos(same angle). Returned as a plain (constant) tensor.
inline Tensor positional_encoding(size_t length, size_t d_model) {
  if (length < 1 || d_model < 1) throw std::invalid_argument("positional_encoding: dimensions must be positive");
  Tensor pe = Tensor::zeros({length, d_model});
  for (size_t pos = 0; pos < length; ++pos)
    for (size_t j = 0; j < d_model; ++j) {
      double angle = double(pos) / std::pow(10000.0, double(2 * (j / 2)) / double(d_model));
      pe.data()[pos * d_model + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

// Full bidirectional scaled dot-product attention over [B, L, d], heads
// processed one at a time, concatenated, then output-projected.
inline Tensor mha_forward(const Tensor& x, const MultiHeadAttentionParams& p) {
  if (x.ndim() != 3) throw std::invalid_argument("mha_forward: input must be [batch, length, width]");
  size_t d = x.shape[2];
  if (p.n_heads == 0 || d % p.n_heads != 0)
    throw std::invalid_argument("mha_forward: width must be divisible by the head count");
  size_t hd = d / p.n_heads;
  double scale = 1.0 / std::sqrt(double(hd));

  Tensor q = linear_forward(x, p.q);
  Tensor k = linear_forward(x, p.k);
  Tensor v = linear_forward(x, p.v);

  std::vector<Tensor> heads;
  heads.reserve(p.n_heads);
  for (size_t h = 0; h < p.n_heads; ++h) {
    Tensor qh = slice_last_axis(q, h * hd, hd);
    Tensor kh = slice_last_axis(k, h * hd, hd);
    Tensor vh = slice_last_axis(v, h * hd, hd);
    Tensor attn = softmax(smul(matmul(qh, transpose_last2(kh)), scale));
    heads.push_back(matmul(attn, vh));
  }
  return linear_forward(concat_last_axis(heads), p.o);
}

// Pre-norm residual block: y = x + MHA(Norm(x)); z = y + FFW(Norm(y)).
// Positional encoding is the caller's concern (added once per stack entry).
inline Tensor transformer_block_forward(const Tensor& x, const TransformerBlockParams& p) {
  Tensor y = add(x, mha_forward(layer_norm_affine(x, p.norm1), p.mha));
  Tensor h = relu(linear_forward(layer_norm_affine(y, p.norm2), p.ffw.in));
  return add(y, linear_forward(h, p.ffw.out));
}

// Valid (no padding) strided correlation of a rank-1 signal with a filter
// bank; returns frame-major [L, n_filters].
inline Tensor conv1d_forward(const Tensor& x, const Conv1dLayer& layer) {
  size_t ks = layer.kernels.shape[1];
  if (layer.stride == 0 || ks < layer.stride)
    throw std::invalid_argument("conv1d_forward: need stride >= 1 and kernel_size >= stride");
  Tensor frames = frame_rows(x, ks, layer.stride);              // [L, ks]
  Tensor y = matmul(frames, transpose_last2(layer.kernels));    // [L, F]
  if (layer.bias.numel() > 0) y = add_bias(y, layer.bias);
  return y;
}

// Overlap-add of kernel-weighted rows at stride spacing; input is
// frame-major [L, n_filters], output a rank-1 signal of
// (L-1)*stride + kernel_size samples.
inline Tensor conv_transpose1d_forward(const Tensor& d, const ConvTranspose1dLayer& layer) {
  size_t ks = layer.kernels.shape[1];
  if (layer.stride == 0 || ks < layer.stride)
    throw std::invalid_argument("conv_transpose1d_forward: need stride >= 1 and kernel_size >= stride");
  if (d.ndim() != 2 || d.shape[1] != layer.kernels.shape[0])
    throw std::invalid_argument("conv_transpose1d_forward: column width must match the filter count");
  Tensor cols = matmul(d, layer.kernels);  // [L, ks]
  return overlap_add_rows(cols, layer.stride, (d.shape[0] - 1) * layer.stride + ks);
}

}  // namespace dualpath
