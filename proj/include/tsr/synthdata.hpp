#pragma once

// Synthetic continuous-gesture corpus. Each gloss owns a random unit
// prototype; a sentence holds each word's prototype for a random duration,
// joined by linear cross-fades, plus isotropic Gaussian noise.

#include "tsr/core.hpp"
#include "tsr/nn/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace tsr::synth {

struct SynthConfig {
  int vocab_size = 20;
  int min_len = 3;
  int max_len = 8;
  int min_dur = 8;
  int max_dur = 16;
  int obs_dim = 64;
  int ramp = 3;
  // Expected per-frame noise norm; per-element std is noise / sqrt(obs_dim).
  double noise = 0.1;
  int train_size = 400;
  int dev_size = 50;
  int test_size = 50;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocab_size < 1 || vocab_size > 65535) throw ArgumentError("synth: vocab_size must be in 1..65535");
    if (min_len < 1 || max_len < min_len) throw ArgumentError("synth: need 1 <= min_len <= max_len");
    if (min_dur < 2 || max_dur < min_dur) throw ArgumentError("synth: need 2 <= min_dur <= max_dur");
    if (ramp < 0 || ramp >= min_dur) throw ArgumentError("synth: need 0 <= ramp < min_dur");
    if (noise < 0) throw ArgumentError("synth: noise must be >= 0");
    if (obs_dim < 1) throw ArgumentError("synth: obs_dim must be >= 1");
    if (vocab_size < 2 && max_len > 1) throw ArgumentError("synth: multi-word sentences need vocab_size >= 2");
    if (train_size < 0 || dev_size < 0 || test_size < 0) throw ArgumentError("synth: split sizes must be >= 0");
  }
};

struct LabeledSequence {
  RawSequence<float> raw;
  GlossSequence label;
  // Frame -> word position in label, or -1 inside a transition ramp.
  std::vector<int> segment;

  bool operator==(const LabeledSequence& o) const { return label == o.label && raw == o.raw; }
};

struct Dataset {
  int vocab_size = 0;
  std::vector<LabeledSequence> train;
  std::vector<LabeledSequence> dev;
  std::vector<LabeledSequence> test;

  const std::vector<LabeledSequence>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "dev") return dev;
    if (name == "test") return test;
    throw ArgumentError("unknown split: " + name);
  }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Column w holds the unit prototype of gloss w (column 0 unused).
inline Eigen::MatrixXd make_prototypes(const SynthConfig& cfg) {
  std::mt19937_64 rng(mix_seed(cfg.seed, 0xC0FFEE));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd protos = Eigen::MatrixXd::Zero(cfg.obs_dim, cfg.vocab_size + 1);
  for (int w = 1; w <= cfg.vocab_size; ++w) {
    for (int i = 0; i < cfg.obs_dim; ++i) protos(i, w) = normal(rng);
    protos.col(w).normalize();
  }
  return protos;
}

inline LabeledSequence generate_sequence(const SynthConfig& cfg, const Eigen::MatrixXd& protos, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len_dist(cfg.min_len, cfg.max_len);
  std::uniform_int_distribution<int> dur_dist(cfg.min_dur, cfg.max_dur);
  const int len = len_dist(rng);
  LabeledSequence s;
  for (int i = 0; i < len; ++i) {
    if (i == 0) {
      s.label.push_back(std::uniform_int_distribution<int>(1, cfg.vocab_size)(rng));
    } else {
      // Uniform over glosses other than the previous one.
      int w = std::uniform_int_distribution<int>(1, cfg.vocab_size - 1)(rng);
      if (w >= s.label.back()) ++w;
      s.label.push_back(w);
    }
  }
  std::vector<Eigen::VectorXd> frames;
  for (int i = 0; i < len; ++i) {
    if (i > 0) {
      for (int k = 0; k < cfg.ramp; ++k) {
        const double a = static_cast<double>(k + 1) / (cfg.ramp + 1);
        frames.push_back((1.0 - a) * protos.col(s.label[i - 1]) + a * protos.col(s.label[i]));
        s.segment.push_back(-1);
      }
    }
    const int dur = dur_dist(rng);
    for (int d = 0; d < dur; ++d) {
      frames.push_back(protos.col(s.label[i]));
      s.segment.push_back(i);
    }
  }
  std::normal_distribution<double> noise(0.0, cfg.noise / std::sqrt(static_cast<double>(cfg.obs_dim)));
  s.raw.resize(cfg.obs_dim, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (int i = 0; i < cfg.obs_dim; ++i)
      s.raw(i, static_cast<Eigen::Index>(t)) =
          static_cast<float>(frames[t][i] + (cfg.noise > 0 ? noise(rng) : 0.0));
  return s;
}

// Deterministic in cfg. Dev/test label sequences never occur in train or in
// each other.
inline Dataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const auto protos = make_prototypes(cfg);
  Dataset ds;
  ds.vocab_size = cfg.vocab_size;
  std::set<GlossSequence> seen;
  std::uint64_t counter = 0;
  auto fill = [&](std::vector<LabeledSequence>& out, int count, bool distinct) {
    for (int i = 0; i < count; ++i) {
      for (int attempt = 0;; ++attempt) {
        auto s = generate_sequence(cfg, protos, mix_seed(cfg.seed, ++counter));
        if (distinct && seen.count(s.label)) {
          if (attempt > 1000) throw ArgumentError("synth: cannot draw enough distinct sentences");
          continue;
        }
        seen.insert(s.label);
        out.push_back(std::move(s));
        break;
      }
    }
  };
  fill(ds.train, cfg.train_size, false);
  fill(ds.dev, cfg.dev_size, true);
  fill(ds.test, cfg.test_size, true);
  return ds;
}

inline constexpr std::uint8_t kDatasetVersion = 1;

// "TSD1" | version u8 | |V| u32 | n_train n_dev n_test u32 | records
// record: T u32 | c0 u32 | L u32 | ids u16[L] | f32[c0*T] channel-major
inline void write_dataset(std::ostream& os, const Dataset& ds) {
  os.write("TSD1", 4);
  os.put(static_cast<char>(kDatasetVersion));
  nn::io::put_u32(os, static_cast<std::uint32_t>(ds.vocab_size));
  for (const auto* split : {&ds.train, &ds.dev, &ds.test}) nn::io::put_u32(os, static_cast<std::uint32_t>(split->size()));
  for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
    for (const auto& s : *split) {
      nn::io::put_u32(os, static_cast<std::uint32_t>(s.raw.cols()));
      nn::io::put_u32(os, static_cast<std::uint32_t>(s.raw.rows()));
      nn::io::put_u32(os, static_cast<std::uint32_t>(s.label.size()));
      for (int id : s.label) nn::io::put_u16(os, static_cast<std::uint16_t>(id));
      for (Eigen::Index c = 0; c < s.raw.rows(); ++c)
        for (Eigen::Index t = 0; t < s.raw.cols(); ++t) nn::io::put_f32(os, s.raw(c, t));
    }
  }
}

// Segment annotations are not persisted.
inline Dataset read_dataset(std::istream& is) {
  nn::io::expect_magic(is, "TSD1");
  const int version = is.get();
  if (version != kDatasetVersion) throw FormatError("dataset: unsupported version " + std::to_string(version));
  Dataset ds;
  ds.vocab_size = static_cast<int>(nn::io::get_u32(is));
  std::uint32_t counts[3];
  for (auto& c : counts) c = nn::io::get_u32(is);
  std::vector<LabeledSequence>* splits[3] = {&ds.train, &ds.dev, &ds.test};
  for (int k = 0; k < 3; ++k) {
    for (std::uint32_t i = 0; i < counts[k]; ++i) {
      LabeledSequence s;
      const std::uint32_t t = nn::io::get_u32(is);
      const std::uint32_t c0 = nn::io::get_u32(is);
      const std::uint32_t len = nn::io::get_u32(is);
      if (static_cast<std::uint64_t>(t) * c0 > (1ull << 30) || len > (1u << 20))
        throw FormatError("dataset: implausible record size");
      for (std::uint32_t j = 0; j < len; ++j) {
        const int id = nn::io::get_u16(is);
        if (id < 1 || id > ds.vocab_size) throw FormatError("dataset: label id out of range");
        s.label.push_back(id);
      }
      s.raw.resize(c0, t);
      for (Eigen::Index c = 0; c < s.raw.rows(); ++c)
        for (Eigen::Index tt = 0; tt < s.raw.cols(); ++tt) s.raw(c, tt) = nn::io::get_f32(is);
      splits[k]->push_back(std::move(s));
    }
  }
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_dataset(os, ds);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return read_dataset(is);
}

}  // namespace tsr::synth
