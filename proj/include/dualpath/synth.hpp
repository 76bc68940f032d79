// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic speech-like and noise-like signal generators, SNR mixing, and
// dataset generation with a CSV manifest. Everything here is deterministic
// given the seed, so two runs produce byte-identical files.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dualpath/dsp.hpp"
#include "dualpath/wav.hpp"

namespace dualpath {

// Harmonic stack with slow pitch and amplitude modulation: a crude but
// well-behaved stand-in for voiced speech. Peak-normalized to 0.5.
inline std::vector<double> synth_speech(std::mt19937_64& rng, size_t n, double sample_rate) {
  if (n == 0) throw std::invalid_argument("synth_speech: zero-length signal");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double f0 = 80.0 + 220.0 * u01(rng);
  size_t n_harm = 3 + size_t(std::uniform_int_distribution<int>(0, 5)(rng));
  double vib_rate = 2.0 + 4.0 * u01(rng);    // Hz
  double trem_rate = 0.5 + 1.5 * u01(rng);   // Hz
  double vib_phase = 2.0 * M_PI * u01(rng);
  double trem_phase = 2.0 * M_PI * u01(rng);

  std::vector<double> amp(n_harm), phase(n_harm);
  for (size_t k = 0; k < n_harm; ++k) {
    amp[k] = (0.6 + 0.4 * u01(rng)) / double(k + 1);
    phase[k] = 2.0 * M_PI * u01(rng);
  }

  std::vector<double> x(n);
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double t = double(i) / sample_rate;
    // Phase accumulation keeps the pitch drift free of discontinuities.
    double inst = f0 * (1.0 + 0.02 * std::sin(2.0 * M_PI * vib_rate * t + vib_phase));
    double s = 0.0;
    for (size_t k = 0; k < n_harm; ++k) {
      phase[k] += 2.0 * M_PI * double(k + 1) * inst / sample_rate;
      s += amp[k] * std::sin(phase[k]);
    }
    x[i] = (1.0 + 0.3 * std::sin(2.0 * M_PI * trem_rate * t + trem_phase)) * s;
    peak = std::max(peak, std::abs(x[i]));
  }
  if (peak > 0.0)
    for (double& v : x) v *= 0.5 / peak;
  return x;
}

// White noise shaped by a random stable two-pole resonator. Peak-normalized
// to 0.5.
inline std::vector<double> synth_noise(std::mt19937_64& rng, size_t n) {
  if (n == 0) throw std::invalid_argument("synth_noise: zero-length signal");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double r = 0.5 + 0.45 * u01(rng);
  double theta = 0.2 + (M_PI - 0.4) * u01(rng);
  double a1 = 2.0 * r * std::cos(theta);
  double a2 = -r * r;

  std::vector<double> y(n);
  double y1 = 0.0, y2 = 0.0, peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double v = gauss(rng) + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = v;
    y[i] = v;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0)
    for (double& v : y) v *= 0.5 / peak;
  return y;
}

// ---------------------------------------------------------------------------
// Dataset generation and manifest
// ---------------------------------------------------------------------------

struct ManifestRow {
  std::string clean, noise, mix;  // file paths
  double snr_db = 0.0;
  uint64_t seed = 0;
};

struct DatasetOptions {
  size_t pairs = 4;
  double seconds = 4.0;
  std::vector<double> snr_grid = {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0};
  double sample_rate = 16000.0;
  double peak_target = 0.7;  // common rescale so the mix never clips at -10 dB
};

inline std::string format_snr(double snr_db) {
  std::ostringstream out;
  out.precision(12);
  out << snr_db;
  return out.str();
}

inline void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("manifest: cannot open '" + path + "' for writing");
  out << "clean,noise,mix,snr_db,seed\n";
  for (const auto& r : rows)
    out << r.clean << "," << r.noise << "," << r.mix << "," << format_snr(r.snr_db) << "," << r.seed << "\n";
  if (!out) throw std::runtime_error("manifest: write to '" + path + "' failed");
}

// Reads a manifest; relative file paths are resolved against the manifest's
// own directory.
inline std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open '" + path + "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("manifest: '" + path + "' is empty");
  std::vector<ManifestRow> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 5)
      throw std::runtime_error("manifest: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                               " fields, expected 5");
    ManifestRow r;
    r.clean = resolve(f[0]);
    r.noise = resolve(f[1]);
    r.mix = resolve(f[2]);
    try {
      r.snr_db = std::stod(f[3]);
      r.seed = std::stoull(f[4]);
    } catch (const std::exception&) {
      throw std::runtime_error("manifest: line " + std::to_string(lineno) + " has a malformed number");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("manifest: '" + path + "' lists no files");
  return rows;
}

// Generates `pairs` (clean, noise, mix) triplets, cycling through the SNR
// grid, and writes them plus manifest.csv into out_dir. The noise file holds
// the scaled noise, so mix == clean + noise sample for sample, and all three
// share one rescale so SNR survives the gain exactly.
inline std::vector<ManifestRow> generate_dataset(const std::string& out_dir, uint64_t seed,
                                                 const DatasetOptions& opt = {}) {
  if (opt.pairs == 0) throw std::invalid_argument("generate_dataset: pairs must be positive");
  if (opt.seconds <= 0.0) throw std::invalid_argument("generate_dataset: seconds must be positive");
  if (opt.snr_grid.empty()) throw std::invalid_argument("generate_dataset: SNR grid is empty");
  std::filesystem::create_directories(out_dir);
  size_t n = size_t(std::llround(opt.seconds * opt.sample_rate));

  std::vector<ManifestRow> rows;
  for (size_t i = 0; i < opt.pairs; ++i) {
    uint64_t pair_seed = seed + 1000003ull * i;
    std::mt19937_64 rng(pair_seed);
    std::vector<double> clean = synth_speech(rng, n, opt.sample_rate);
    std::vector<double> noise = synth_noise(rng, n);
    double snr = opt.snr_grid[i % opt.snr_grid.size()];
    MixResult mr = mix_at_snr(clean, noise, snr);
    std::vector<double> noise_scaled(n);
    for (size_t j = 0; j < n; ++j) noise_scaled[j] = mr.alpha * noise[j];

    double peak = 0.0;
    for (size_t j = 0; j < n; ++j) {
      peak = std::max(peak, std::abs(clean[j]));
      peak = std::max(peak, std::abs(noise_scaled[j]));
      peak = std::max(peak, std::abs(mr.mix[j]));
    }
    double g = (peak > 0.0) ? opt.peak_target / peak : 1.0;
    for (size_t j = 0; j < n; ++j) {
      clean[j] *= g;
      noise_scaled[j] *= g;
      mr.mix[j] *= g;
    }

    char stem[32];
    std::snprintf(stem, sizeof stem, "pair_%04zu", i);
    ManifestRow r;
    r.clean = std::string(stem) + "_clean.wav";
    r.noise = std::string(stem) + "_noise.wav";
    r.mix = std::string(stem) + "_mix.wav";
    r.snr_db = snr;
    r.seed = pair_seed;
    std::filesystem::path dir(out_dir);
    write_wav((dir / r.clean).string(), clean, opt.sample_rate);
    write_wav((dir / r.noise).string(), noise_scaled, opt.sample_rate);
    write_wav((dir / r.mix).string(), mr.mix, opt.sample_rate);
    rows.push_back(std::move(r));
  }
  write_manifest((std::filesystem::path(out_dir) / "manifest.csv").string(), rows);
  return rows;
}

// Loads the (mixture, clean) waveform pairs a manifest points at.
inline std::vector<std::pair<std::vector<double>, std::vector<double>>> load_training_pairs(
    const std::string& manifest_path) {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (const ManifestRow& r : read_manifest(manifest_path)) {
    WavData mix = read_wav(r.mix);
    WavData clean = read_wav(r.clean);
    if (mix.samples.size() != clean.samples.size())
      throw std::runtime_error("manifest: '" + r.mix + "' and '" + r.clean + "' differ in length");
    pairs.emplace_back(std::move(mix.samples), std::move(clean.samples));
  }
  return pairs;
}

}  // namespace dualpath
