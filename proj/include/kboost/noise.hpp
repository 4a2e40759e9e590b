// include/kboost/noise.hpp

// Copyright 2026 The kboost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Acoustic degradation: DC removal and power normalization, additive white
// Gaussian noise at a requested SNR, and mono 16-bit PCM WAV input/output.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kboost/common.hpp"
#include "kboost/corpus.hpp"
#include "kboost/parallel.hpp"
#include "kboost/rng.hpp"

namespace kboost {

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;
};

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

/// Mean-square power.
inline double power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(power(signal) / power(noise));
}

/// Ordered list of SNRs in dB.
class SnrGrid {
 public:
  SnrGrid() : snrs_{-10, -5, 0, 5, 10, 15, 20, 25, 30} {}
  explicit SnrGrid(std::vector<int> snrs) : snrs_(std::move(snrs)) {
    if (snrs_.empty()) throw Error("SNR grid is empty");
    for (std::size_t i = 1; i < snrs_.size(); ++i)
      if (snrs_[i - 1] >= snrs_[i]) throw Error("SNR grid must be strictly increasing");
  }

  /// "a,b,c" or "lo:step:hi".
  static SnrGrid parse(std::string_view text) {
    std::vector<int> v;
    if (text.find(':') != std::string_view::npos) {
      const auto parts = split_char(text, ':');
      if (parts.size() != 3) throw Error("SNR range must be lo:step:hi");
      const int lo = Snr::parse(parts[0]).db(), step = Snr::parse(parts[1]).db(),
                hi = Snr::parse(parts[2]).db();
      if (step <= 0) throw Error("SNR step must be positive");
      for (int s = lo; s <= hi; s += step) v.push_back(s);
    } else {
      for (auto p : split_char(text, ',')) v.push_back(Snr::parse(p).db());
    }
    return SnrGrid(std::move(v));
  }

  const std::vector<int>& values() const { return snrs_; }
  std::size_t size() const { return snrs_.size(); }

 private:
  std::vector<int> snrs_;
};

/// Removes DC and scales to unit mean-square power.
inline AudioBuffer normalize(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) throw Error("sample rate must be positive");
  if (audio.samples.empty()) throw Error("cannot normalize empty audio");
  for (double v : audio.samples)
    if (!std::isfinite(v)) throw Error("audio contains non-finite samples");
  const double dc = mean(audio.samples);
  AudioBuffer out{audio.samples, audio.sample_rate};
  for (double& v : out.samples) v -= dc;
  const double p = power(out.samples);
  const double scale_ref = std::max(1.0, power(audio.samples));
  if (!(p > 1e-20 * scale_ref))
    throw Error("audio has no power after DC removal (silent or constant signal)");
  const double g = 1.0 / std::sqrt(p);
  for (double& v : out.samples) v *= g;
  return out;
}

struct NoiseOptions {
  /// Rescale each generated noise vector so its realized mean-square power is
  /// exactly the target; otherwise only the per-sample variance is set.
  bool exact_power = true;
};

/// Key for one (seed, utterance, SNR) noise stream.
inline std::uint64_t noise_key(std::uint64_t seed, std::string_view utterance_id, double snr) {
  return derive_key(seed, {fnv1a(utterance_id),
                           static_cast<std::uint64_t>(std::llround(snr * 1000.0))});
}

/// Zero-mean white Gaussian noise with variance 10^(-snr/10), i.e. the given
/// SNR against a unit-power signal.
inline std::vector<double> white_noise(std::size_t n, double snr, std::uint64_t key,
                                       const NoiseOptions& opts = {}) {
  if (!std::isfinite(snr)) throw Error("SNR must be finite");
  const double variance = std::pow(10.0, -snr / 10.0);
  CounterRng rng(key);
  std::vector<double> noise(n);
  for (double& v : noise) v = rng.normal();
  double g = std::sqrt(variance);
  if (opts.exact_power && n > 0) g /= std::sqrt(power(noise));
  for (double& v : noise) v *= g;
  return noise;
}

/// Adds white noise to a normalized buffer at the requested SNR.
inline AudioBuffer mix_white_noise(const AudioBuffer& normalized, double snr, std::uint64_t key,
                                   const NoiseOptions& opts = {}) {
  const double p = power(normalized.samples);
  if (normalized.samples.empty() || std::abs(p - 1.0) > 1e-6)
    throw Error("mix_white_noise expects normalized audio (unit power), got power " +
                format_exact(p));
  const auto noise = white_noise(normalized.samples.size(), snr, key, opts);
  AudioBuffer out = normalized;
  for (std::size_t i = 0; i < noise.size(); ++i) out.samples[i] += noise[i];
  return out;
}

// WAV -----------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Reads RIFF/WAVE, mono, 16-bit PCM. Samples are scaled to [-1, 1).
inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto bad = [&](const std::string& why) { return Error(path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw bad("not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  AudioBuffer out;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = detail::read_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw bad("truncated chunk");
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (size < 16) throw bad("short fmt chunk");
      const auto format = detail::read_u16(p + body);
      const auto channels = detail::read_u16(p + body + 2);
      const auto bits = detail::read_u16(p + body + 14);
      if (format != 1) throw bad("only PCM is supported");
      if (channels != 1) throw bad("only mono audio is supported");
      if (bits != 16) throw bad("only 16-bit samples are supported");
      out.sample_rate = static_cast<int>(detail::read_u32(p + body + 4));
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      const std::size_t n = size / 2;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(detail::read_u16(p + body + 2 * i));
        out.samples[i] = static_cast<double>(v) / 32768.0;
      }
      if (out.sample_rate <= 0) throw bad("invalid sample rate");
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw bad("no data chunk");
}

inline constexpr double kPeakTarget = 0.891;  // about -1 dBFS

/// Writes 16-bit PCM. The buffer is scaled so its peak sits at `peak_target`
/// of full scale; the applied scale factor is returned.
inline double write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
                        double peak_target = kPeakTarget) {
  double peak = 0.0;
  for (double v : audio.samples) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? peak_target / peak : 1.0;
  std::string s;
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  s += "RIFF";
  detail::put_u32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  detail::put_u32(s, 16);
  detail::put_u16(s, 1);
  detail::put_u16(s, 1);
  detail::put_u32(s, static_cast<std::uint32_t>(audio.sample_rate));
  detail::put_u32(s, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  detail::put_u16(s, 2);
  detail::put_u16(s, 16);
  s += "data";
  detail::put_u32(s, data_bytes);
  for (double v : audio.samples) {
    const double q = std::clamp(std::nearbyint(v * scale * 32768.0), -32768.0, 32767.0);
    detail::put_u16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  return scale;
}

struct CorruptedFile {
  std::string id;
  int snr = 0;
  std::filesystem::path path;
  double scale = 1.0;
};

/// File name of the corrupted copy of `id` at `snr`.
inline std::string corrupted_name(std::string_view id, int snr) {
  return std::string(id) + ".snr" + std::to_string(snr) + ".wav";
}

/// Writes one corrupted WAV per (utterance, SNR) into `out_dir`, plus the
/// sidecar `scales.tsv` (id, snr, scale). Relative audio paths resolve
/// against `audio_root`.
inline std::vector<CorruptedFile> corrupt_partition(const Partition& part, const SnrGrid& grid,
                                                    std::uint64_t seed,
                                                    const std::filesystem::path& out_dir,
                                                    const std::filesystem::path& audio_root = {},
                                                    unsigned threads = 0) {
  namespace fs = std::filesystem;
  const auto& utts = part.utterances();
  std::vector<std::string> no_audio;
  for (const auto& u : utts)
    if (!u.audio) no_audio.push_back(u.id);
  if (!no_audio.empty()) {
    std::string msg = "utterances without audio:";
    for (const auto& id : no_audio) msg += " " + id;
    throw Error(msg);
  }
  const auto resolve = [&](const std::string& a) {
    fs::path p(a);
    return p.is_relative() && !audio_root.empty() ? audio_root / p : p;
  };

  std::vector<AudioBuffer> inputs(utts.size());
  std::vector<std::string> errors(utts.size());
  parallel_for(utts.size(), threads, [&](std::size_t i) {
    try {
      inputs[i] = normalize(read_wav(resolve(*utts[i].audio)));
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::string failed;
  for (std::size_t i = 0; i < utts.size(); ++i)
    if (!errors[i].empty()) failed += " " + utts[i].id;
  if (!failed.empty()) throw Error("unreadable audio for utterances:" + failed);

  fs::create_directories(out_dir);
  const std::size_t n_snr = grid.size();
  std::vector<CorruptedFile> out(utts.size() * n_snr);
  parallel_for(out.size(), threads, [&](std::size_t job) {
    const std::size_t i = job / n_snr;
    const int snr = grid.values()[job % n_snr];
    const auto mixed =
        mix_white_noise(inputs[i], snr, noise_key(seed, utts[i].id, static_cast<double>(snr)));
    CorruptedFile rec{utts[i].id, snr, out_dir / corrupted_name(utts[i].id, snr), 1.0};
    rec.scale = write_wav(rec.path, mixed);
    out[job] = std::move(rec);
  });

  std::ofstream side(out_dir / "scales.tsv", std::ios::binary);
  if (!side) throw Error("cannot write " + (out_dir / "scales.tsv").string());
  side << "id\tsnr\tscale\n";
  for (const auto& r : out) side << r.id << '\t' << r.snr << '\t' << format_exact(r.scale) << '\n';
  return out;
}

}  // namespace kboost
