// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Measured-performance harness: forward-pass wall time (median over repeated
// runs), peak allocation as the input grows, and a chunk-by-chunk streaming
// simulation producing real-time-factor curves. All times come from the
// monotonic clock; memory comes from the allocator's high-water counter.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dualpath/complexity.hpp"
#include "dualpath/pipeline.hpp"

namespace dualpath {

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string config_id(const ModelConfig& cfg) {
  return encoder_kind_name(cfg.encoder_kind) + "_M" + std::to_string(cfg.frame_len) + "_H" +
         std::to_string(cfg.hop) + "_C" + std::to_string(cfg.masker.chunk_size);
}

// Seconds of audio a chunk spans before it can be processed: its own length
// plus the half-chunk shift to the next one.
inline double chunk_budget_seconds(const ModelConfig& cfg) {
  double C = double(cfg.masker.chunk_size), H = double(cfg.hop);
  return (C * H + (C / 2.0) * H) / cfg.sample_rate;
}

struct LatencyReport {
  double chunk_budget_s = 0.0;     // chunk length plus shift
  double with_frame_tail_s = 0.0;  // plus the trailing analysis frame
};

inline LatencyReport latency(const ModelConfig& cfg) {
  LatencyReport r;
  r.chunk_budget_s = chunk_budget_seconds(cfg);
  r.with_frame_tail_s = r.chunk_budget_s + double(cfg.frame_len) / cfg.sample_rate;
  return r;
}

// ---------------------------------------------------------------------------
// Forward-pass profiling
// ---------------------------------------------------------------------------

struct ProfileReport {
  std::string config_id;
  double seconds = 0.0;
  size_t runs = 0;
  std::vector<double> run_wall_ms;  // one entry per measured run
  double median_wall_ms = 0.0;
  long long peak_bytes = 0;
  double gmacs = 0.0;  // analyzer headline figure for this input length
  std::string memory_method = "allocator-high-water";
};

namespace detail {

inline std::vector<double> profiling_input(size_t n) {
  std::mt19937_64 rng(97);  // fixed input so repeat profiles are comparable
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace detail

inline ProfileReport profile_forward(const EnhancementModel& model, double seconds, size_t runs) {
  if (runs == 0) throw std::invalid_argument("profile_forward: at least one measured run is required");
  size_t n = size_t(std::llround(seconds * model.config.sample_rate));
  if (seconds <= 0.0 || n <= model.config.frame_len)
    throw std::invalid_argument("profile_forward: input must be longer than one frame");

  ProfileReport rep;
  rep.config_id = config_id(model.config);
  rep.seconds = seconds;
  rep.runs = runs;
  rep.gmacs = count_macs(ComplexityConfig::from_model(model.config, n)).gmacs();

  std::vector<double> x = detail::profiling_input(n);
  enhance_forward(model, x);  // warm-up, excluded from the statistics
  AllocStats::reset_peak();
  for (size_t r = 0; r < runs; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    enhance_forward(model, x);
    auto t1 = std::chrono::steady_clock::now();
    rep.run_wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  rep.peak_bytes = AllocStats::peak();
  rep.median_wall_ms = median(rep.run_wall_ms);
  return rep;
}

// ---------------------------------------------------------------------------
// Memory growth with utterance length
// ---------------------------------------------------------------------------

struct MemoryPoint {
  double seconds = 0.0;
  long long peak_bytes = 0;
};

inline std::vector<MemoryPoint> memory_curve(const EnhancementModel& model,
                                             const std::vector<double>& seconds_list) {
  for (size_t i = 1; i < seconds_list.size(); ++i)
    if (seconds_list[i] <= seconds_list[i - 1])
      throw std::invalid_argument("memory_curve: utterance lengths must be strictly increasing");
  std::vector<MemoryPoint> curve;
  for (double t : seconds_list) {
    size_t n = size_t(std::llround(t * model.config.sample_rate));
    if (t <= 0.0 || n <= model.config.frame_len)
      throw std::invalid_argument("memory_curve: utterance must be longer than one frame");
    std::vector<double> x = detail::profiling_input(n);
    AllocStats::reset_peak();
    enhance_forward(model, x);
    curve.push_back({t, AllocStats::peak()});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Streaming simulation
// ---------------------------------------------------------------------------

struct RtfPoint {
  size_t chunk_index = 0;  // 1-based count of chunks seen so far
  double seconds = 0.0;    // utterance time at the end of this chunk
  double proc_s = 0.0;     // measured processing time for this step
  double budget_s = 0.0;   // chunk length plus shift
  double rtf = 0.0;        // proc / budget
};

struct StreamOptions {
  size_t max_points = 40;      // measurement grid size over the chunk range
  double stop_after_rtf = 0;   // > 0: stop once the factor reaches this value
};

// Chunk-by-chunk cost of the masker as the history grows. Per new chunk the
// intra stage runs on that chunk alone (earlier chunks are assumed cached),
// while the inter stage re-attends over every chunk seen so far. The blocks
// are real transformer blocks of the configured width; odd chunk sizes from
// the published table are accepted since no signal-level chunking happens.
inline std::vector<RtfPoint> simulate_streaming(const ModelConfig& cfg, double seconds,
                                                const StreamOptions& opt = {}) {
  size_t C = cfg.masker.chunk_size, d = cfg.masker.d_model;
  if (C < 2) throw std::invalid_argument("simulate_streaming: chunk size must be at least 2");
  if (d == 0 || cfg.masker.n_heads == 0 || d % cfg.masker.n_heads != 0)
    throw std::invalid_argument("simulate_streaming: model width must divide into heads");
  size_t n = size_t(std::llround(seconds * cfg.sample_rate));
  if (seconds <= 0.0 || n <= cfg.frame_len)
    throw std::invalid_argument("simulate_streaming: sweep must cover more than one frame");

  size_t frames = frame_count(n, cfg.frame_len, cfg.hop);
  size_t total = analyzer_chunk_count(frames, C);
  double budget = chunk_budget_seconds(cfg);

  std::mt19937_64 rng(2024);
  std::vector<TransformerBlockParams> intra, inter;
  for (size_t i = 0; i < cfg.masker.repeats * cfg.masker.k_intra; ++i)
    intra.push_back(make_transformer_block(rng, d, cfg.masker.d_ff, cfg.masker.n_heads));
  for (size_t i = 0; i < cfg.masker.repeats * cfg.masker.k_inter; ++i)
    inter.push_back(make_transformer_block(rng, d, cfg.masker.d_ff, cfg.masker.n_heads));

  std::vector<size_t> grid;
  size_t dense = std::min<size_t>(16, total);
  for (size_t s = 1; s <= dense; ++s) grid.push_back(s);
  if (total > dense) {
    size_t tail_budget = opt.max_points > dense ? opt.max_points - dense : 1;
    size_t step = std::max<size_t>(1, (total - dense) / tail_budget);
    for (size_t s = dense + step; s < total; s += step) grid.push_back(s);
    grid.push_back(total);
  }

  Tensor new_chunk = Tensor::filled({1, C, d}, 0.01);
  std::vector<RtfPoint> points;
  for (size_t s : grid) {
    Tensor history = Tensor::filled({C, s, d}, 0.01);
    auto t0 = std::chrono::steady_clock::now();
    Tensor y = new_chunk;
    for (const auto& blk : intra) y = transformer_block_forward(y, blk);
    Tensor h = history;
    for (const auto& blk : inter) h = transformer_block_forward(h, blk);
    auto t1 = std::chrono::steady_clock::now();

    RtfPoint p;
    p.chunk_index = s;
    p.seconds = ((double(s - 1) * double(C) / 2.0 + double(C)) * double(cfg.hop) +
                 double(cfg.frame_len - cfg.hop)) /
                cfg.sample_rate;
    p.proc_s = std::chrono::duration<double>(t1 - t0).count();
    p.budget_s = budget;
    p.rtf = p.proc_s / p.budget_s;
    points.push_back(p);
    if (opt.stop_after_rtf > 0.0 && p.rtf >= opt.stop_after_rtf) break;
  }
  return points;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

// With include_median an extra summary row per report carries the median
// wall time in the run column slot labelled "median".
inline void write_profile_csv(std::ostream& out, const std::vector<ProfileReport>& reports,
                              bool include_median = false) {
  out << "config,seconds,run,wall_ms,peak_bytes,gmacs\n";
  out << std::setprecision(10);
  for (const auto& r : reports) {
    for (size_t i = 0; i < r.run_wall_ms.size(); ++i)
      out << r.config_id << ',' << r.seconds << ',' << (i + 1) << ',' << r.run_wall_ms[i] << ','
          << r.peak_bytes << ',' << r.gmacs << '\n';
    if (include_median)
      out << r.config_id << ',' << r.seconds << ",median," << r.median_wall_ms << ',' << r.peak_bytes << ','
          << r.gmacs << '\n';
  }
}

inline void write_rtf_csv(std::ostream& out,
                          const std::vector<std::pair<std::string, std::vector<RtfPoint>>>& curves) {
  out << "config,seconds,chunk_idx,proc_ms,budget_ms,rtf\n";
  out << std::setprecision(10);
  for (const auto& [id, pts] : curves)
    for (const RtfPoint& p : pts)
      out << id << ',' << p.seconds << ',' << p.chunk_index << ',' << p.proc_s * 1e3 << ','
          << p.budget_s * 1e3 << ',' << p.rtf << '\n';
}

inline void write_memory_csv(std::ostream& out,
                             const std::vector<std::pair<std::string, std::vector<MemoryPoint>>>& curves) {
  out << "config,seconds,peak_bytes\n";
  out << std::setprecision(10);
  for (const auto& [id, pts] : curves)
    for (const MemoryPoint& p : pts) out << id << ',' << p.seconds << ',' << p.peak_bytes << '\n';
}

}  // namespace dualpath
