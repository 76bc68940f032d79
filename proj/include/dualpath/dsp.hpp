// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Short-time Fourier analysis/synthesis and signal utilities.
//
// Conventions: periodic Hann window, no centering or padding (frames start at
// l*H and must fit entirely inside the signal), one-sided spectra with
// M/2 + 1 bins, float64 throughout. Synthesis uses weighted overlap-add with
// per-sample window-energy normalization.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualpath {

inline constexpr double kTau = 6.28318530717958647692;

// ---------------------------------------------------------------------------
// Window and framing
// ---------------------------------------------------------------------------

// Periodic Hann window: w(n) = 0.5 * (1 - cos(2*pi*n / M)). w(0) == 0.
inline std::vector<double> hann_window(size_t length) {
  if (length < 2 || length % 2 != 0)
    throw std::invalid_argument("hann_window: length must be even and >= 2, got " + std::to_string(length));
  std::vector<double> w(length);
  for (size_t n = 0; n < length; ++n) w[n] = 0.5 * (1.0 - std::cos(kTau * double(n) / double(length)));
  return w;
}

// Number of full frames of length M with hop H in a signal of N samples.
inline size_t frame_count(size_t n_samples, size_t win_length, size_t hop) {
  if (win_length == 0 || hop == 0) throw std::invalid_argument("frame_count: window length and hop must be positive");
  if (n_samples < win_length)
    throw std::invalid_argument("frame_count: signal shorter than one window (" + std::to_string(n_samples) + " < " +
                                std::to_string(win_length) + ")");
  return 1 + (n_samples - win_length) / hop;
}

struct WindowSpec {
  size_t length = 512;
  size_t hop = 128;

  void validate() const {
    if (length < 2 || length % 2 != 0)
      throw std::invalid_argument("WindowSpec: length must be even and >= 2, got " + std::to_string(length));
    if (hop == 0 || hop > length) throw std::invalid_argument("WindowSpec: hop must satisfy 0 < hop <= length");
  }
  size_t bins() const { return length / 2 + 1; }
};

// ---------------------------------------------------------------------------
// FFT
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey transform, in place. sign = -1 forward,
// +1 inverse (inverse applies the 1/M scale).
inline void fft_pow2(std::vector<std::complex<double>>& a, int sign) {
  size_t n = a.size();
  if (n <= 1) return;
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = double(sign) * kTau / double(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (sign > 0)
    for (auto& c : a) c /= double(n);
}

// Direct O(M^2) transform for lengths that are not powers of two.
inline void dft_direct(std::vector<std::complex<double>>& a, int sign) {
  size_t n = a.size();
  std::vector<std::complex<double>> out(n, {0.0, 0.0});
  for (size_t k = 0; k < n; ++k) {
    for (size_t t = 0; t < n; ++t) {
      double ang = double(sign) * kTau * double(k) * double(t) / double(n);
      out[k] += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
  }
  if (sign > 0)
    for (auto& c : out) c /= double(n);
  a = std::move(out);
}

inline void transform(std::vector<std::complex<double>>& a, int sign) {
  if (is_pow2(a.size()))
    fft_pow2(a, sign);
  else
    dft_direct(a, sign);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectrogram containers
// ---------------------------------------------------------------------------

// One-sided complex spectrogram stored frame-major: v[l * bins + f].
struct ComplexSpectrogram {
  size_t frames = 0;
  size_t bins = 0;
  size_t win_length = 0;
  size_t hop = 0;
  std::vector<std::complex<double>> v;

  std::complex<double>& at(size_t frame, size_t bin) { return v[frame * bins + bin]; }
  const std::complex<double>& at(size_t frame, size_t bin) const { return v[frame * bins + bin]; }
};

// Magnitude/phase view of a one-sided spectrogram, same frame-major layout.
struct MagPhase {
  size_t frames = 0;
  size_t bins = 0;
  size_t win_length = 0;
  size_t hop = 0;
  std::vector<double> mag;
  std::vector<double> phase;
};

// ---------------------------------------------------------------------------
// Analysis / synthesis
// ---------------------------------------------------------------------------

inline ComplexSpectrogram stft(const std::vector<double>& x, const WindowSpec& spec) {
  spec.validate();
  size_t m = spec.length, h = spec.hop;
  size_t n_frames = frame_count(x.size(), m, h);
  auto w = hann_window(m);

  ComplexSpectrogram sg;
  sg.frames = n_frames;
  sg.bins = spec.bins();
  sg.win_length = m;
  sg.hop = h;
  sg.v.resize(n_frames * sg.bins);

  std::vector<std::complex<double>> buf(m);
  for (size_t l = 0; l < n_frames; ++l) {
    for (size_t n = 0; n < m; ++n) buf[n] = {x[l * h + n] * w[n], 0.0};
    detail::transform(buf, -1);
    for (size_t f = 0; f < sg.bins; ++f) sg.v[l * sg.bins + f] = buf[f];
  }
  return sg;
}

// Weighted overlap-add synthesis. Fills the full spectrum from the one-sided
// half by Hermitian symmetry (imaginary parts of DC/Nyquist are discarded by
// taking the real part of the inverse transform), multiplies each time frame
// by the synthesis window, accumulates, and normalizes by the summed squared
// window. Output is truncated or zero-padded to out_len.
inline std::vector<double> istft(const ComplexSpectrogram& sg, const WindowSpec& spec, size_t out_len) {
  spec.validate();
  if (sg.bins != spec.bins())
    throw std::invalid_argument("istft: spectrogram bins do not match the window spec");
  size_t m = spec.length, h = spec.hop;
  auto w = hann_window(m);

  size_t span = (sg.frames == 0) ? 0 : (sg.frames - 1) * h + m;
  std::vector<double> acc(span, 0.0), norm(span, 0.0);
  std::vector<std::complex<double>> buf(m);

  for (size_t l = 0; l < sg.frames; ++l) {
    for (size_t f = 0; f < sg.bins; ++f) buf[f] = sg.v[l * sg.bins + f];
    for (size_t f = 1; f + 1 < sg.bins; ++f) buf[m - f] = std::conj(sg.v[l * sg.bins + f]);
    detail::transform(buf, +1);
    for (size_t n = 0; n < m; ++n) {
      acc[l * h + n] += buf[n].real() * w[n];
      norm[l * h + n] += w[n] * w[n];
    }
  }

  std::vector<double> out(out_len, 0.0);
  size_t upto = std::min(out_len, span);
  for (size_t i = 0; i < upto; ++i) out[i] = (norm[i] > 1e-15) ? acc[i] / norm[i] : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Magnitude / phase
// ---------------------------------------------------------------------------

inline MagPhase mag_phase_split(const ComplexSpectrogram& sg) {
  MagPhase mp;
  mp.frames = sg.frames;
  mp.bins = sg.bins;
  mp.win_length = sg.win_length;
  mp.hop = sg.hop;
  mp.mag.resize(sg.v.size());
  mp.phase.resize(sg.v.size());
  for (size_t i = 0; i < sg.v.size(); ++i) {
    double re = sg.v[i].real(), im = sg.v[i].imag();
    mp.mag[i] = std::hypot(re, im);
    mp.phase[i] = (re == 0.0 && im == 0.0) ? 0.0 : std::atan2(im, re);
  }
  return mp;
}

inline ComplexSpectrogram recombine(const MagPhase& mp) {
  ComplexSpectrogram sg;
  sg.frames = mp.frames;
  sg.bins = mp.bins;
  sg.win_length = mp.win_length;
  sg.hop = mp.hop;
  sg.v.resize(mp.mag.size());
  for (size_t i = 0; i < mp.mag.size(); ++i) {
    if (mp.mag[i] < 0.0) throw std::invalid_argument("recombine: magnitudes must be nonnegative");
    sg.v[i] = std::polar(mp.mag[i], mp.phase[i]);
  }
  return sg;
}

// ---------------------------------------------------------------------------
// SNR-controlled mixing
// ---------------------------------------------------------------------------

struct MixResult {
  std::vector<double> mix;
  double alpha = 0.0;  // scale applied to the noise component
};

// mix = speech + alpha * noise where alpha realizes the requested SNR in dB
// computed from total energies. Throws if either component has zero energy.
inline MixResult mix_at_snr(const std::vector<double>& speech, const std::vector<double>& noise, double snr_db) {
  if (speech.size() != noise.size()) throw std::invalid_argument("mix_at_snr: component lengths differ");
  double es = 0.0, en = 0.0;
  for (double v : speech) es += v * v;
  for (double v : noise) en += v * v;
  if (es <= 0.0 || en <= 0.0) throw std::invalid_argument("mix_at_snr: both components need nonzero energy");
  MixResult r;
  r.alpha = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  r.mix.resize(speech.size());
  for (size_t i = 0; i < speech.size(); ++i) r.mix[i] = speech[i] + r.alpha * noise[i];
  return r;
}

}  // namespace dualpath
