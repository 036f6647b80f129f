#pragma once

// Experiment configuration: a flat text file of `section.key = value` lines.
// Blank lines and `#` comments are ignored; unknown keys are rejected.

#include "tsr/recognizer.hpp"
#include "tsr/synthdata.hpp"
#include "tsr/tsrnet.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace tsr {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch = 2;
  int epochs = 20;
  std::vector<int> milestones{10, 15};
  int tsr_epochs = 20;
  std::vector<int> tsr_milestones{10, 15};
  double lr_decay = 0.2;
  bool augment = true;
  sampling::Method sampling = sampling::Method::kProportionalRandom;
  std::uint64_t seed = 1;
};

struct EvalConfig {
  std::size_t beam_width = 10;
  std::vector<int> factors{1, 2, 4, 8};
  std::vector<Reconstructor> reconstructors{Reconstructor::kTsrNet, Reconstructor::kNearest, Reconstructor::kLinear};
  std::string split = "dev";
};

struct ExperimentConfig {
  synth::SynthConfig synth;
  int encoder_hidden = 128;
  TsrConfig tsr;
  HeadConfig head;
  TrainConfig train;
  EvalConfig eval;
  std::string workdir = "run";

  EncoderConfig encoder() const { return {synth.obs_dim, encoder_hidden, tsr.c1}; }

  HeadConfig head_config() const {
    HeadConfig h = head;
    h.vocab_size = synth.vocab_size;
    return h;
  }

  TsrConfig tsr_config(int n) const {
    TsrConfig t = tsr;
    t.n = n;
    return t;
  }

  // Architecture of the frozen recognizer.
  std::string base_fingerprint_text() const {
    std::ostringstream os;
    os << "c0=" << synth.obs_dim << ";hidden=" << encoder_hidden << ";c1=" << tsr.c1 << ";vocab=" << synth.vocab_size
       << ";head=" << to_string(head.variant) << "/" << head.hidden << "/" << head.kernel;
    return os.str();
  }

  std::string tsr_fingerprint_text(int n) const {
    std::ostringstream os;
    os << base_fingerprint_text() << ";c2=" << tsr.c2 << ";c3=" << tsr.c3 << ";m=" << tsr.m << ";k=" << tsr.k
       << ";n=" << n << ";variant=" << to_string(tsr.variant) << ";dw=" << tsr.dw_kernel << ";in=" << tsr.in_kernel
       << ";out=" << tsr.out_kernel << ";up=" << tsr.up_kernel;
    return os.str();
  }

  void set(const std::string& key, const std::string& value);

  static ExperimentConfig from_string(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(static_cast<int>(to_int(key, s)));
  return out;
}

}  // namespace config_detail

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  using namespace config_detail;
  const std::string& v = value;
  auto i = [&] { return static_cast<int>(to_int(key, v)); };
  auto d = [&] { return to_double(key, v); };
  try {
    if (key == "synth.vocab_size") synth.vocab_size = i();
    else if (key == "synth.min_len") synth.min_len = i();
    else if (key == "synth.max_len") synth.max_len = i();
    else if (key == "synth.min_dur") synth.min_dur = i();
    else if (key == "synth.max_dur") synth.max_dur = i();
    else if (key == "synth.obs_dim") synth.obs_dim = i();
    else if (key == "synth.ramp") synth.ramp = i();
    else if (key == "synth.noise") synth.noise = d();
    else if (key == "synth.train_size") synth.train_size = i();
    else if (key == "synth.dev_size") synth.dev_size = i();
    else if (key == "synth.test_size") synth.test_size = i();
    else if (key == "synth.seed") synth.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "encoder.hidden") encoder_hidden = i();
    else if (key == "tsr.c1") tsr.c1 = i();
    else if (key == "tsr.c2") tsr.c2 = i();
    else if (key == "tsr.c3") tsr.c3 = i();
    else if (key == "tsr.m") tsr.m = i();
    else if (key == "tsr.k") tsr.k = i();
    else if (key == "tsr.variant") tsr.variant = parse_resblock_variant(v);
    else if (key == "tsr.dw_kernel") tsr.dw_kernel = i();
    else if (key == "tsr.in_kernel") tsr.in_kernel = i();
    else if (key == "tsr.out_kernel") tsr.out_kernel = i();
    else if (key == "tsr.up_kernel") tsr.up_kernel = i();
    else if (key == "tsr.zero_init_detail") tsr.zero_init_detail = to_bool(key, v);
    else if (key == "head.variant") head.variant = parse_head_variant(v);
    else if (key == "head.hidden") head.hidden = i();
    else if (key == "head.kernel") head.kernel = i();
    else if (key == "train.lr") train.lr = d();
    else if (key == "train.weight_decay") train.weight_decay = d();
    else if (key == "train.batch") train.batch = i();
    else if (key == "train.epochs") train.epochs = i();
    else if (key == "train.milestones") train.milestones = to_int_list(key, v);
    else if (key == "train.tsr_epochs") train.tsr_epochs = i();
    else if (key == "train.tsr_milestones") train.tsr_milestones = to_int_list(key, v);
    else if (key == "train.lr_decay") train.lr_decay = d();
    else if (key == "train.augment") train.augment = to_bool(key, v);
    else if (key == "train.sampling") train.sampling = sampling::parse_method(v);
    else if (key == "train.seed") train.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "eval.beam_width") eval.beam_width = static_cast<std::size_t>(to_int(key, v));
    else if (key == "eval.factors") eval.factors = to_int_list(key, v);
    else if (key == "eval.reconstructors") {
      eval.reconstructors.clear();
      for (const auto& s : split_list(v)) eval.reconstructors.push_back(parse_reconstructor(s));
    } else if (key == "eval.split") eval.split = v;
    else if (key == "run.workdir") workdir = v;
    else throw ConfigError("unknown config key: " + key);
  } catch (const ArgumentError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

inline ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str());
}

}  // namespace tsr
