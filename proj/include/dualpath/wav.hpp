// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal RIFF/WAVE reader and writer for the format the tools exchange:
// PCM, 16-bit signed little-endian, mono. Doubles are clipped to [-1, 1),
// scaled by 32768 and rounded to nearest even, so a write-read round trip
// reproduces integer samples exactly.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualpath {

struct WavData {
  std::vector<double> samples;
  double sample_rate = 16000.0;
};

inline int16_t sample_to_pcm16(double x) {
  if (x < -1.0) x = -1.0;
  if (x > 1.0) x = 1.0;
  long v = std::lrint(x * 32768.0);  // ties to even under the default rounding mode
  if (v > 32767) v = 32767;
  if (v < -32768) v = -32768;
  return int16_t(v);
}

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                        (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u16(std::ostream& out, uint16_t v) {
  unsigned char b[2] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("wav: truncated file");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

inline uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw std::runtime_error("wav: truncated file");
  return uint16_t(b[0]) | (uint16_t(b[1]) << 8);
}

}  // namespace detail

inline void write_wav(const std::string& path, const std::vector<double>& samples, double sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("wav: cannot open '" + path + "' for writing");
  uint32_t data_bytes = uint32_t(samples.size() * 2);
  uint32_t rate = uint32_t(std::lround(sample_rate));
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * 2);  // bytes per second
  detail::put_u16(out, 2);         // block align
  detail::put_u16(out, 16);        // bits per sample
  out.write("data", 4);
  detail::put_u32(out, data_bytes);
  for (double x : samples) {
    int16_t s = sample_to_pcm16(x);
    unsigned char b[2] = {(unsigned char)(uint16_t(s) & 0xff), (unsigned char)((uint16_t(s) >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw std::runtime_error("wav: write to '" + path + "' failed");
}

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("wav: cannot open '" + path + "'");
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("wav: '" + path + "' is not a RIFF file");
  detail::get_u32(in);  // container size; chunk sizes below are authoritative
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("wav: '" + path + "' is not a WAVE file");

  WavData wav;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    uint32_t chunk = detail::get_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk < 16) throw std::runtime_error("wav: malformed format chunk");
      uint16_t fmt = detail::get_u16(in);
      uint16_t channels = detail::get_u16(in);
      uint32_t rate = detail::get_u32(in);
      detail::get_u32(in);  // byte rate
      detail::get_u16(in);  // block align
      uint16_t bits = detail::get_u16(in);
      if (fmt != 1) throw std::runtime_error("wav: only PCM data is supported");
      if (channels != 1) throw std::runtime_error("wav: only mono files are supported");
      if (bits != 16) throw std::runtime_error("wav: only 16-bit samples are supported");
      wav.sample_rate = double(rate);
      in.ignore(std::streamsize(chunk - 16));
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data before format chunk");
      size_t n = chunk / 2;
      wav.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        uint16_t u = detail::get_u16(in);
        wav.samples[i] = double(int16_t(u)) / 32768.0;
      }
      return wav;
    } else {
      in.ignore(std::streamsize(chunk + (chunk & 1)));  // skip unknown chunk (word aligned)
      if (!in) throw std::runtime_error("wav: truncated chunk in '" + path + "'");
    }
  }
  throw std::runtime_error("wav: '" + path + "' has no data chunk");
}

}  // namespace dualpath
