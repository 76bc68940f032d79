// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end speech enhancement: encoder (spectral magnitude with retained
// phases, or a learned strided convolution), masking network, element-wise
// mask application, decoder (weighted overlap-add synthesis against the
// retained phases, or a transposed convolution), the scale-invariant SDR
// metric and training loss, the optimizer/schedule used for training, and a
// bit-exact binary checkpoint container.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dualpath/dsp.hpp"
#include "dualpath/masker.hpp"
#include "dualpath/nn.hpp"
#include "dualpath/tensor.hpp"

namespace dualpath {

struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 16000.0;
};

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
  enum class EncoderKind { stft_mag, learned };

  EncoderKind encoder_kind = EncoderKind::stft_mag;
  size_t frame_len = 512;       // analysis window / encoder kernel, samples
  size_t hop = 128;             // analysis hop / encoder stride, samples
  size_t learned_filters = 256; // filter count of the learned encoder
  MaskerConfig masker;          // includes the chunk size
  double sample_rate = 16000.0;

  static ModelConfig stft_default() {
    ModelConfig c;
    c.encoder_kind = EncoderKind::stft_mag;
    c.frame_len = 512;
    c.hop = 128;
    c.masker.chunk_size = 50;
    return c;
  }
  static ModelConfig learned_default() {
    ModelConfig c;
    c.encoder_kind = EncoderKind::learned;
    c.frame_len = 32;
    c.hop = 16;
    c.learned_filters = 256;
    c.masker.chunk_size = 250;
    return c;
  }

  size_t feature_width() const {
    return encoder_kind == EncoderKind::stft_mag ? frame_len / 2 + 1 : learned_filters;
  }

  void validate() const {
    masker.validate();
    if (frame_len < 2 || frame_len % 2 != 0)
      throw std::invalid_argument("ModelConfig: frame length must be even and >= 2");
    if (hop == 0 || hop > frame_len) throw std::invalid_argument("ModelConfig: hop must satisfy 0 < hop <= frame");
    if (encoder_kind == EncoderKind::learned && learned_filters == 0)
      throw std::invalid_argument("ModelConfig: learned encoder needs at least one filter");
    if (sample_rate <= 0.0) throw std::invalid_argument("ModelConfig: sample rate must be positive");
  }
};

inline std::string encoder_kind_name(ModelConfig::EncoderKind k) {
  return k == ModelConfig::EncoderKind::stft_mag ? "stft_mag" : "learned";
}

inline ModelConfig::EncoderKind encoder_kind_from_name(const std::string& s) {
  if (s == "stft_mag") return ModelConfig::EncoderKind::stft_mag;
  if (s == "learned") return ModelConfig::EncoderKind::learned;
  throw std::invalid_argument("unknown encoder kind '" + s + "' (expected stft_mag or learned)");
}

struct EnhancementModel {
  ModelConfig config;
  Conv1dLayer encoder;           // learned path only
  SepFormerParams masker;
  ConvTranspose1dLayer decoder;  // learned path only
};

inline EnhancementModel make_model(std::mt19937_64& rng, const ModelConfig& cfg) {
  cfg.validate();
  EnhancementModel m;
  m.config = cfg;
  if (cfg.encoder_kind == ModelConfig::EncoderKind::learned) {
    m.encoder = make_conv1d(rng, cfg.learned_filters, cfg.frame_len, cfg.hop);
    m.decoder = make_conv_transpose1d(rng, cfg.learned_filters, cfg.frame_len, cfg.hop);
  }
  m.masker = make_sepformer(rng, cfg.feature_width(), cfg.masker);
  return m;
}

// ---------------------------------------------------------------------------
// Parameter enumeration (single source of truth for counting, training and
// checkpoints)
// ---------------------------------------------------------------------------

template <class Fn>
inline void visit_params(EnhancementModel& m, Fn&& fn) {
  auto lin = [&fn](const std::string& prefix, LinearLayer& l) {
    if (!l.weight.defined()) return;
    fn(prefix + ".weight", l.weight);
    fn(prefix + ".bias", l.bias);
  };
  auto block = [&](const std::string& prefix, TransformerBlockParams& b) {
    lin(prefix + ".mha.q", b.mha.q);
    lin(prefix + ".mha.k", b.mha.k);
    lin(prefix + ".mha.v", b.mha.v);
    lin(prefix + ".mha.o", b.mha.o);
    fn(prefix + ".norm1.gain", b.norm1.gain);
    fn(prefix + ".norm1.bias", b.norm1.bias);
    fn(prefix + ".norm2.gain", b.norm2.gain);
    fn(prefix + ".norm2.bias", b.norm2.bias);
    lin(prefix + ".ffw.in", b.ffw.in);
    lin(prefix + ".ffw.out", b.ffw.out);
  };

  if (m.encoder.kernels.defined()) {
    fn("encoder.kernels", m.encoder.kernels);
    fn("encoder.bias", m.encoder.bias);
  }
  lin("masker.input_proj", m.masker.input_proj);
  for (size_t i = 0; i < m.masker.intra.size(); ++i) block("masker.intra." + std::to_string(i), m.masker.intra[i]);
  for (size_t i = 0; i < m.masker.inter.size(); ++i) block("masker.inter." + std::to_string(i), m.masker.inter[i]);
  fn("masker.prelu_slope", m.masker.prelu_slope);
  lin("masker.post", m.masker.post);
  lin("masker.gate.tanh", m.masker.gate.tanh_path);
  lin("masker.gate.sigmoid", m.masker.gate.sigmoid_path);
  if (m.decoder.kernels.defined()) fn("decoder.kernels", m.decoder.kernels);
}

inline size_t parameter_count(const EnhancementModel& m) {
  size_t n = 0;
  // visitation never mutates; the const_cast keeps one enumeration routine
  visit_params(const_cast<EnhancementModel&>(m), [&n](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

inline std::vector<Tensor*> trainable_params(EnhancementModel& m) {
  std::vector<Tensor*> out;
  visit_params(m, [&out](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

// ---------------------------------------------------------------------------
// Encode / mask / decode
// ---------------------------------------------------------------------------

struct Encoded {
  Tensor w;                   // nonnegative features, frame-major [L, F]
  std::vector<double> phase;  // per-bin phases (spectral path), else empty
};

inline Encoded encode(const std::vector<double>& x, const EnhancementModel& m) {
  const ModelConfig& cfg = m.config;
  if (x.size() < cfg.frame_len)
    throw std::invalid_argument("encode: input has " + std::to_string(x.size()) +
                                " samples, shorter than one " + std::to_string(cfg.frame_len) + "-sample frame");
  if (cfg.encoder_kind == ModelConfig::EncoderKind::stft_mag) {
    MagPhase mp = mag_phase_split(stft(x, WindowSpec{cfg.frame_len, cfg.hop}));
    Encoded e;
    e.w = Tensor::from({mp.frames, mp.bins}, std::move(mp.mag));
    e.phase = std::move(mp.phase);
    return e;
  }
  Tensor xt = Tensor::from({x.size()}, x);
  return {relu(conv1d_forward(xt, m.encoder)), {}};
}

inline Tensor apply_mask(const Tensor& m, const Tensor& w) {
  detail::check_same_shape(m, w, "apply_mask");
  return mul(m, w);
}

// Differentiable weighted overlap-add synthesis of magnitude frames against
// fixed per-bin phases. The adjoint of the synthesis is an analysis
// transform of the normalized, windowed upstream gradient:
//   f_l(n) = g(lH+n) * w(n) / norm(lH+n)
//   dL/dS_l(k) = (c_k / M) * DFT(f_l)(k),  c_k = 1 at DC/Nyquist, else 2
//   dL/dmag_l(k) = Re(dL/dS_l(k) * e^{-j phase}),
// which follows from the Hermitian completion of the one-sided spectrum.
inline Tensor istft_apply(const Tensor& mag, const std::vector<double>& phase, const WindowSpec& spec,
                          size_t out_len) {
  spec.validate();
  if (mag.ndim() != 2 || mag.shape[1] != spec.bins())
    throw std::invalid_argument("istft_apply: magnitudes must be [frames, bins] for the window spec");
  if (phase.size() != mag.numel()) throw std::invalid_argument("istft_apply: phase layout must match magnitudes");
  size_t L = mag.shape[0], F = mag.shape[1], M = spec.length, H = spec.hop;

  ComplexSpectrogram sg;
  sg.frames = L;
  sg.bins = F;
  sg.win_length = M;
  sg.hop = H;
  sg.v.resize(L * F);
  for (size_t i = 0; i < sg.v.size(); ++i) sg.v[i] = std::polar(mag.data()[i], phase[i]);
  std::vector<double> y = istft(sg, spec, out_len);
  Tensor out = Tensor::from({out_len}, std::move(y));

  Tape* tp = detail::common_tape({&mag});
  if (tp) {
    auto w = hann_window(M);
    size_t span = (L - 1) * H + M;
    std::vector<double> norm(span, 0.0);
    for (size_t l = 0; l < L; ++l)
      for (size_t n = 0; n < M; ++n) norm[l * H + n] += w[n] * w[n];
    detail::attach(out, tp, {mag.node},
                   [mn = mag.node, phase, w, norm, L, F, M, H, out_len](Tape& tape, const std::vector<double>& up) {
                     auto& gm = tape.adjoint(mn);
                     std::vector<std::complex<double>> buf(M);
                     for (size_t l = 0; l < L; ++l) {
                       for (size_t n = 0; n < M; ++n) {
                         size_t idx = l * H + n;
                         double f = 0.0;
                         if (idx < out_len && norm[idx] > 1e-15) f = up[idx] * w[n] / norm[idx];
                         buf[n] = {f, 0.0};
                       }
                       detail::transform(buf, -1);
                       for (size_t k = 0; k < F; ++k) {
                         double ck = (k == 0 || k == M / 2) ? 1.0 : 2.0;
                         double re = buf[k].real() * ck / double(M);
                         double im = buf[k].imag() * ck / double(M);
                         double ph = phase[l * F + k];
                         gm[l * F + k] += re * std::cos(ph) + im * std::sin(ph);
                       }
                     }
                   });
  }
  return out;
}

inline Tensor decode(const Tensor& d, const std::vector<double>& phase, const EnhancementModel& m,
                     size_t out_len) {
  const ModelConfig& cfg = m.config;
  if (cfg.encoder_kind == ModelConfig::EncoderKind::stft_mag) {
    if (phase.size() != d.numel())
      throw std::invalid_argument("decode: the spectral path needs one phase per masked magnitude");
    return istft_apply(d, phase, WindowSpec{cfg.frame_len, cfg.hop}, out_len);
  }
  Tensor y = conv_transpose1d_forward(d, m.decoder);
  if (y.shape[0] == out_len) return y;
  return (y.shape[0] > out_len) ? slice_last_axis(y, 0, out_len) : pad_last_axis(y, out_len);
}

// Full enhancement pass; differentiable w.r.t. every model parameter when a
// tape is watching them.
inline Tensor enhance_forward(const EnhancementModel& m, const std::vector<double>& x) {
  Encoded e = encode(x, m);
  Tensor mask = masker_forward(e.w, m.masker, m.config.masker);
  Tensor d = apply_mask(mask, e.w);
  return decode(d, e.phase, m, x.size());
}

inline AudioBuffer enhance(const EnhancementModel& m, const AudioBuffer& in) {
  Tensor y = enhance_forward(m, in.samples);
  return {std::vector<double>(y.data(), y.data() + y.numel()), in.sample_rate};
}

// ---------------------------------------------------------------------------
// Scale-invariant SDR (metric and loss), capped to +-100 dB
// ---------------------------------------------------------------------------

inline double si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size()) throw std::invalid_argument("si_sdr: signals differ in length");
  double rr = 0.0, dot = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    dot += est[i] * ref[i];
  }
  if (rr == 0.0) throw std::invalid_argument("si_sdr: reference has zero energy");
  double alpha = dot / rr;
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    double t = alpha * ref[i];
    num += t * t;
    den += (t - est[i]) * (t - est[i]);
  }
  if (num == 0.0) return -100.0;
  if (den == 0.0) return 100.0;
  double db = 10.0 * std::log10(num / den);
  return std::min(100.0, std::max(-100.0, db));
}

inline double si_sdr_interior(const std::vector<double>& est, const std::vector<double>& ref, size_t margin) {
  if (est.size() != ref.size() || est.size() <= 2 * margin)
    throw std::invalid_argument("si_sdr_interior: margin leaves no samples");
  std::vector<double> e(est.begin() + margin, est.end() - margin);
  std::vector<double> r(ref.begin() + margin, ref.end() - margin);
  return si_sdr(e, r);
}

// Differentiable negative SI-SDR. The cap is realized by clamping the final
// value to [-100, 100]; the gradient is exact away from the cap and zero at
// it.
inline Tensor si_sdr_loss(const Tensor& est, const Tensor& ref) {
  detail::check_same_shape(est, ref, "si_sdr_loss");
  double rr = 0.0;
  for (size_t i = 0; i < ref.numel(); ++i) rr += ref.data()[i] * ref.data()[i];
  if (rr == 0.0) throw std::invalid_argument("si_sdr_loss: reference has zero energy");

  Tensor alpha = smul(sum_all(mul(est, ref)), 1.0 / rr);
  Tensor target = scale_by(ref, alpha);
  Tensor err = sub(target, est);
  Tensor num = sum_all(mul(target, target));
  Tensor den = sum_all(mul(err, err));
  if (num.item() == 0.0 && den.item() == 0.0) return Tensor::scalar(100.0);  // zero estimate: undefined ratio

  Tensor loss = smul(log_scalar(mul(num, inv_scalar(den))), -10.0 / std::log(10.0));
  return detail::unary_elementwise(
      loss, [](double v) { return std::min(100.0, std::max(-100.0, v)); },
      [](double v, double) { return (v > -100.0 && v < 100.0) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_global_norm(const std::vector<Tensor*>& params, double max_norm) {
  double sq = 0.0;
  for (Tensor* p : params)
    if (p->grad)
      for (double g : p->grad->v) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (Tensor* p : params)
      if (p->grad)
        for (double& g : p->grad->v) g *= s;
  }
  return norm;
}

class Adam {
 public:
  Adam(std::vector<Tensor*> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr(learning_rate), params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps) {
    for (Tensor* p : params_) {
      m_.emplace_back(p->numel(), 0.0);
      v_.emplace_back(p->numel(), 0.0);
    }
  }

  double lr;  // adjusted externally by the plateau schedule

  void step() {
    ++t_;
    double c1 = 1.0 - std::pow(b1_, double(t_));
    double c2 = 1.0 - std::pow(b2_, double(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor* p = params_[i];
      if (!p->grad) continue;
      for (size_t j = 0; j < p->numel(); ++j) {
        double g = p->grad->v[j];
        m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * g;
        v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * g * g;
        p->data()[j] -= lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_);
      }
    }
  }

 private:
  std::vector<Tensor*> params_;
  double b1_, b2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Halves the learning rate after `patience` consecutive epochs whose loss
// fails to improve on the best seen by more than min_delta.
struct PlateauScheduler {
  PlateauScheduler(double factor = 0.5, size_t patience = 5, double min_delta = 1e-4)
      : factor_(factor), patience_(patience), min_delta_(min_delta) {}

  // Feed one epoch loss; scales lr in place and reports whether it fired.
  bool observe(double epoch_loss, double& lr) {
    if (epoch_loss < best_ - min_delta_) {
      best_ = epoch_loss;
      flat_ = 0;
      return false;
    }
    if (++flat_ >= patience_) {
      flat_ = 0;
      lr *= factor_;
      return true;
    }
    return false;
  }

 private:
  double factor_;
  size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  size_t flat_ = 0;
};

// Overfits the model on a small in-memory dataset of (noisy, clean) pairs.
// One epoch = one pass over the dataset; the plateau schedule observes mean
// epoch loss. Returns the per-step training losses.
inline std::vector<double> train_toy(EnhancementModel& model,
                                     const std::vector<std::pair<std::vector<double>, std::vector<double>>>& data,
                                     size_t steps, double learning_rate = 1e-3, double clip = 5.0) {
  if (data.empty()) throw std::invalid_argument("train_toy: dataset is empty");
  std::vector<Tensor*> params = trainable_params(model);
  Adam opt(params, learning_rate);
  PlateauScheduler sched;
  std::vector<double> trace;
  trace.reserve(steps);
  double epoch_acc = 0.0;
  size_t epoch_n = 0;
  for (size_t step = 0; step < steps; ++step) {
    const auto& pair = data[step % data.size()];
    Tape tape;
    for (Tensor* p : params) {
      tape.watch(*p);
      p->zero_grad();
    }
    Tensor est = enhance_forward(model, pair.first);
    Tensor ref = Tensor::from({pair.second.size()}, pair.second);
    Tensor loss = si_sdr_loss(est, ref);
    if (loss.node >= 0) {  // at the cap the gradient is undefined; skip the update
      tape.backward(loss);
      clip_global_norm(params, clip);
      opt.step();
    }
    for (Tensor* p : params) p->detach();
    trace.push_back(loss.item());
    epoch_acc += loss.item();
    ++epoch_n;
    if ((step + 1) % data.size() == 0) {
      sched.observe(epoch_acc / double(epoch_n), opt.lr);
      epoch_acc = 0.0;
      epoch_n = 0;
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Flat key = value serialization of the model configuration
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
  };
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + " is not 'key = value': " + s);
    std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + " has an empty key");
    kv[key] = value;
  }
  return kv;
}

inline std::string serialize_model_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "encoder = " << encoder_kind_name(c.encoder_kind) << "\n";
  out << "frame_len = " << c.frame_len << "\n";
  out << "hop = " << c.hop << "\n";
  out << "learned_filters = " << c.learned_filters << "\n";
  out << "chunk_size = " << c.masker.chunk_size << "\n";
  out << "repeats = " << c.masker.repeats << "\n";
  out << "k_intra = " << c.masker.k_intra << "\n";
  out << "k_inter = " << c.masker.k_inter << "\n";
  out << "d_model = " << c.masker.d_model << "\n";
  out << "d_ff = " << c.masker.d_ff << "\n";
  out << "n_heads = " << c.masker.n_heads << "\n";
  out << "positional_encoding = " << (c.masker.use_positional_encoding ? 1 : 0) << "\n";
  std::ostringstream sr;
  sr.precision(17);
  sr << c.sample_rate;
  out << "sample_rate = " << sr.str() << "\n";
  return out.str();
}

inline ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  auto get_size = [&kv](const char* key, size_t& field) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      field = std::stoull(it->second);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("config key '") + key + "' is not a nonnegative integer: " +
                                  it->second);
    }
  };
  if (auto it = kv.find("encoder"); it != kv.end()) c.encoder_kind = encoder_kind_from_name(it->second);
  get_size("frame_len", c.frame_len);
  get_size("hop", c.hop);
  get_size("learned_filters", c.learned_filters);
  get_size("chunk_size", c.masker.chunk_size);
  get_size("repeats", c.masker.repeats);
  get_size("k_intra", c.masker.k_intra);
  get_size("k_inter", c.masker.k_inter);
  get_size("d_model", c.masker.d_model);
  get_size("d_ff", c.masker.d_ff);
  get_size("n_heads", c.masker.n_heads);
  if (auto it = kv.find("positional_encoding"); it != kv.end())
    c.masker.use_positional_encoding = (it->second != "0");
  if (auto it = kv.find("sample_rate"); it != kv.end()) {
    try {
      c.sample_rate = std::stod(it->second);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key 'sample_rate' is not a number: " + it->second);
    }
  }
  return c;
}

inline const std::vector<std::string>& known_model_config_keys() {
  static const std::vector<std::string> keys = {
      "encoder",  "frame_len", "hop",  "learned_filters", "chunk_size",          "repeats",     "k_intra",
      "k_inter",  "d_model",   "d_ff", "n_heads",         "positional_encoding", "sample_rate"};
  return keys;
}

inline void validate_model_config_keys(const std::map<std::string, std::string>& kv) {
  const auto& known = known_model_config_keys();
  for (const auto& [key, value] : kv) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

// Loads key=value pairs from an optional file, applies key=value override
// strings on top, rejects unknown keys, and validates the resulting model.
// Callers that only feed the analytic cost model may skip validation, which
// the masking network needs but a pencil-and-paper estimate does not.
inline ModelConfig load_model_config(const std::string& path, const std::vector<std::string>& overrides = {},
                                     bool validate_model = true) {
  std::map<std::string, std::string> kv;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    kv = parse_kv_text(text.str());
  }
  for (const std::string& item : overrides) {
    auto one = parse_kv_text(item);
    if (one.size() != 1) throw std::invalid_argument("override '" + item + "' is not a single key=value pair");
    kv[one.begin()->first] = one.begin()->second;
  }
  validate_model_config_keys(kv);
  ModelConfig cfg = model_config_from_kv(kv);
  if (validate_model) cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, config text, then named little-endian blobs
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

inline constexpr char kCheckpointMagic[8] = {'D', 'P', 'E', 'N', 'H', '0', '0', '1'};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const EnhancementModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(detail::kCheckpointMagic, 8);
  std::string cfg = serialize_model_config(model.config);
  detail::write_u64(out, cfg.size());
  out.write(cfg.data(), std::streamsize(cfg.size()));

  std::vector<std::pair<std::string, const Tensor*>> blobs;
  visit_params(const_cast<EnhancementModel&>(model),
               [&blobs](const std::string& name, Tensor& t) { blobs.emplace_back(name, &t); });
  detail::write_u64(out, blobs.size());
  for (auto& [name, t] : blobs) {
    detail::write_u64(out, name.size());
    out.write(name.data(), std::streamsize(name.size()));
    detail::write_u64(out, t->ndim());
    for (size_t d : t->shape) detail::write_u64(out, d);
    // doubles are stored little-endian; on this target a plain copy is exact
    out.write(reinterpret_cast<const char*>(t->data()), std::streamsize(t->numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

inline EnhancementModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a model checkpoint (bad magic)");
  uint64_t cfg_len = detail::read_u64(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), std::streamsize(cfg_len));
  if (!in) throw std::runtime_error("checkpoint: truncated config block");
  ModelConfig cfg = model_config_from_kv(parse_kv_text(cfg_text));

  std::mt19937_64 rng(0);  // weights are overwritten below
  EnhancementModel model = make_model(rng, cfg);
  std::map<std::string, Tensor*> by_name;
  visit_params(model, [&by_name](const std::string& name, Tensor& t) { by_name[name] = &t; });

  uint64_t count = detail::read_u64(in);
  if (count != by_name.size())
    throw std::runtime_error("checkpoint: expected " + std::to_string(by_name.size()) + " tensors, found " +
                             std::to_string(count));
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t name_len = detail::read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), std::streamsize(name_len));
    uint64_t rank = detail::read_u64(in);
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = detail::read_u64(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
    if (it->second->shape != shape) throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    in.read(reinterpret_cast<char*>(it->second->data()), std::streamsize(it->second->numel() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
  }
  return model;
}

}  // namespace dualpath
