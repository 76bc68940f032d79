// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form multiply-accumulate model of the enhancement network. It
// predicts the cost of a forward pass from the configuration alone, stage by
// stage, without running the network, and exposes the asymptotic behaviour of
// the dual-path masker as the input grows.

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dualpath/pipeline.hpp"

namespace dualpath {

// Chunk count of the analyzer. Matches the runtime chunking for even chunk
// sizes and extends it to odd ones by keeping the exact half-chunk hop:
//   S = 1 + ceil((L - C) / (C / 2)) = 1 + ceil(2 (L - C) / C)
inline size_t analyzer_chunk_count(size_t seq_len, size_t chunk) {
  if (chunk < 2) throw std::invalid_argument("analyzer_chunk_count: chunk size must be at least 2");
  if (seq_len <= chunk) return 1;
  return 1 + (2 * (seq_len - chunk) + chunk - 1) / chunk;
}

// Static description of one benchmark point: a model configuration plus the
// input length it is evaluated on.
struct ComplexityConfig {
  size_t samples = 160000;  // ten seconds at 16 kHz
  size_t frame_len = 512;
  size_t hop = 128;
  size_t chunk = 50;
  size_t repeats = 2;
  size_t k_intra = 4;
  size_t k_inter = 4;
  size_t d_model = 256;
  size_t d_ff = 256;
  size_t n_heads = 8;
  size_t feature_width = 257;
  ModelConfig::EncoderKind encoder_kind = ModelConfig::EncoderKind::stft_mag;

  static ComplexityConfig from_model(const ModelConfig& m, size_t samples) {
    ComplexityConfig c;
    c.samples = samples;
    c.frame_len = m.frame_len;
    c.hop = m.hop;
    c.chunk = m.masker.chunk_size;
    c.repeats = m.masker.repeats;
    c.k_intra = m.masker.k_intra;
    c.k_inter = m.masker.k_inter;
    c.d_model = m.masker.d_model;
    c.d_ff = m.masker.d_ff;
    c.n_heads = m.masker.n_heads;
    c.feature_width = m.feature_width();
    c.encoder_kind = m.encoder_kind;
    return c;
  }

  void validate() const {
    if (frame_len == 0 || hop == 0) throw std::invalid_argument("complexity: frame length and hop must be positive");
    if (hop > frame_len) throw std::invalid_argument("complexity: hop must not exceed the frame length");
    if (samples <= frame_len) throw std::invalid_argument("complexity: input must be longer than one frame");
    if (chunk < 2) throw std::invalid_argument("complexity: chunk size must be at least 2");
    if (d_model == 0 || d_ff == 0 || n_heads == 0 || feature_width == 0)
      throw std::invalid_argument("complexity: widths and head count must be positive");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("complexity: model width must be divisible by the head count");
  }
};

// Per-stage multiply-accumulate counts for one forward pass.
//
// `total` follows the convention of module-hook profilers: convolutions,
// standalone linear layers and norms are visible, while the matrix products
// inside the attention modules are not. That is the convention behind the
// published ten-second figures. `dense_total` additionally includes the
// attention projections and score/context products, i.e. every dense
// multiply-accumulate the network executes; it equals the sum of all stages.
struct MacBreakdown {
  size_t frames = 0;     // L
  size_t chunks = 0;     // S
  size_t positions = 0;  // S * C, after padding

  double encoder = 0.0;
  double input_projection = 0.0;
  double intra_attention = 0.0;
  double intra_ffw = 0.0;
  double inter_attention = 0.0;
  double inter_ffw = 0.0;
  double norms = 0.0;  // affine normalization cost; not a matrix product
  double gates = 0.0;
  double output_projection = 0.0;
  double decoder = 0.0;

  double total = 0.0;        // hook-visible stages
  double dense_total = 0.0;  // every stage

  double gmacs() const { return total / 1e9; }
  double dense_gmacs() const { return dense_total / 1e9; }
};

inline MacBreakdown count_macs(const ComplexityConfig& cfg) {
  cfg.validate();
  MacBreakdown b;
  b.frames = frame_count(cfg.samples, cfg.frame_len, cfg.hop);
  b.chunks = analyzer_chunk_count(b.frames, cfg.chunk);
  b.positions = b.chunks * cfg.chunk;

  double L = double(b.frames), S = double(b.chunks), C = double(cfg.chunk), P = double(b.positions);
  double d = double(cfg.d_model), dff = double(cfg.d_ff), F = double(cfg.feature_width);
  double M = double(cfg.frame_len);
  double R = double(cfg.repeats), Ki = double(cfg.k_intra), Ke = double(cfg.k_inter);

  // One synthesis/analysis transform per frame. Convolutions cost one MAC per
  // tap; the fast transform is modeled as (M/2) log2 M butterflies at five
  // real multiply-accumulates each.
  double frame_transform = (cfg.encoder_kind == ModelConfig::EncoderKind::learned)
                               ? M * F
                               : 2.5 * M * std::log2(M);
  b.encoder = L * frame_transform;
  b.decoder = L * frame_transform;

  b.input_projection = (cfg.feature_width == cfg.d_model) ? 0.0 : L * F * d;

  // Per block: query/key/value/output projections, the two score/context
  // products, and the two feed-forward layers. Intra blocks see S sequences
  // of length C; inter blocks the transpose.
  b.intra_attention = R * Ki * S * (4.0 * C * d * d + 2.0 * C * C * d);
  b.intra_ffw = R * Ki * S * C * 2.0 * d * dff;
  b.inter_attention = R * Ke * C * (4.0 * S * d * d + 2.0 * S * S * d);
  b.inter_ffw = R * Ke * C * S * 2.0 * d * dff;

  // Two normalizations per block, scale plus shift per element.
  b.norms = R * (Ki + Ke) * 2.0 * (2.0 * d) * P;
  b.gates = 2.0 * L * F * F;
  b.output_projection = P * d * F;

  b.total = b.encoder + b.input_projection + b.intra_ffw + b.inter_ffw + b.norms + b.gates +
            b.output_projection + b.decoder;
  b.dense_total = b.total + b.intra_attention + b.inter_attention;
  return b;
}

inline double reduction_factor(const ComplexityConfig& a, const ComplexityConfig& b) {
  return count_macs(a).total / count_macs(b).total;
}

// Chunk size balancing the intra and inter stage costs: the square root of
// the sequence length, rounded to the even grid the chunker operates on.
inline size_t optimal_chunk(size_t seq_len) {
  if (seq_len < 4) throw std::invalid_argument("optimal_chunk: sequence must have at least 4 frames");
  long long c = 2 * std::llround(std::sqrt(double(seq_len)) / 2.0);
  return c < 2 ? 2u : size_t(c);
}

struct RegimePoint {
  size_t samples = 0;
  double inter_share = 0.0;  // inter-chunk attention as a fraction of all dense work
  double gmacs = 0.0;
  double dense_gmacs = 0.0;
};

struct RegimeReport {
  std::vector<RegimePoint> points;
  std::optional<size_t> crossover_samples;  // first input where the share exceeds one half
};

inline RegimeReport asymptotic_regime(const ComplexityConfig& cfg, const std::vector<size_t>& sample_grid) {
  if (sample_grid.empty()) throw std::invalid_argument("asymptotic_regime: empty input grid");
  for (size_t i = 1; i < sample_grid.size(); ++i)
    if (sample_grid[i] <= sample_grid[i - 1])
      throw std::invalid_argument("asymptotic_regime: input lengths must be strictly increasing");
  RegimeReport rep;
  for (size_t n : sample_grid) {
    ComplexityConfig c = cfg;
    c.samples = n;
    MacBreakdown b = count_macs(c);
    RegimePoint p;
    p.samples = n;
    p.inter_share = b.inter_attention / b.dense_total;
    p.gmacs = b.gmacs();
    p.dense_gmacs = b.dense_gmacs();
    if (p.inter_share > 0.5 && !rep.crossover_samples) rep.crossover_samples = n;
    rep.points.push_back(p);
  }
  return rep;
}

// Flat record view for CSV emission.
inline std::vector<std::pair<std::string, double>> breakdown_rows(const MacBreakdown& b) {
  return {
      {"frames", double(b.frames)},
      {"chunks", double(b.chunks)},
      {"positions", double(b.positions)},
      {"encoder_macs", b.encoder},
      {"input_projection_macs", b.input_projection},
      {"intra_attention_macs", b.intra_attention},
      {"intra_ffw_macs", b.intra_ffw},
      {"inter_attention_macs", b.inter_attention},
      {"inter_ffw_macs", b.inter_ffw},
      {"norms_macs", b.norms},
      {"gates_macs", b.gates},
      {"output_projection_macs", b.output_projection},
      {"decoder_macs", b.decoder},
      {"total_macs", b.total},
      {"dense_total_macs", b.dense_total},
      {"gmacs", b.gmacs()},
      {"dense_gmacs", b.dense_gmacs()},
  };
}

// The six benchmark configurations the cost model is calibrated against:
// both learned-encoder chunkings, three spectral chunkings at 32 ms / 75%
// overlap, and the 32 ms / 50% overlap variant.
inline std::vector<ModelConfig> benchmark_preset_configs() {
  auto stft = [](size_t hop, size_t chunk) {
    ModelConfig c = ModelConfig::stft_default();
    c.hop = hop;
    c.masker.chunk_size = chunk;
    return c;
  };
  auto learned = [](size_t chunk) {
    ModelConfig c = ModelConfig::learned_default();
    c.masker.chunk_size = chunk;
    return c;
  };
  return {learned(250), learned(100), stft(128, 100), stft(128, 50), stft(128, 25), stft(256, 25)};
}

}  // namespace dualpath
