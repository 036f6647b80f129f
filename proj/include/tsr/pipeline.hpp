#pragma once

// Two-step training: (1) train encoder + head with CTC at full frame rate;
// (2) freeze them and train a TSRNet per factor n through the frozen head,
// again with CTC. The conventional alternative trains TSRNet with an L2 loss
// against the dense encoder features.

#include "tsr/config.hpp"
#include "tsr/ctc.hpp"
#include "tsr/metrics.hpp"
#include "tsr/nn/adam.hpp"
#include "tsr/nn/checkpoint.hpp"
#include "tsr/recognizer.hpp"
#include "tsr/sampling.hpp"
#include "tsr/synthdata.hpp"
#include "tsr/tsrnet.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace tsr::pipeline {

class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename S>
struct BaseModel {
  FrameEncoder<S> encoder;
  TemporalHead<S> head;

  BaseModel(const ExperimentConfig& cfg, std::uint64_t seed)
      : encoder(cfg.encoder(), synth::mix_seed(seed, 1)),
        head(cfg.head_config(), cfg.tsr.c1, synth::mix_seed(seed, 2)) {}

  std::size_t num_params() const { return encoder.params().count_learnable() + head.params().count_learnable(); }

  void set_trainable(bool on) {
    encoder.params().set_trainable(on);
    head.params().set_trainable(on);
  }
};

// ---------------------------------------------------------------- checkpoints

inline std::uint64_t fingerprint(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline const char* kFingerprintTensor = "meta.fingerprint";

// 64-bit value split into four 16-bit chunks, each exact in f32.
inline nn::NamedTensor fingerprint_tensor(std::uint64_t fp) {
  nn::NamedTensor t{kFingerprintTensor, {4}, {}};
  for (int i = 0; i < 4; ++i) t.data.push_back(static_cast<float>((fp >> (16 * i)) & 0xffff));
  return t;
}

inline std::uint64_t read_fingerprint(const std::vector<nn::NamedTensor>& tensors) {
  for (const auto& t : tensors) {
    if (t.name != kFingerprintTensor) continue;
    if (t.data.size() != 4) throw FormatError("malformed fingerprint tensor");
    std::uint64_t fp = 0;
    for (int i = 0; i < 4; ++i) fp |= static_cast<std::uint64_t>(t.data[static_cast<std::size_t>(i)]) << (16 * i);
    return fp;
  }
  throw FormatError("checkpoint has no fingerprint");
}

template <typename S>
void save_base(const std::string& path, const BaseModel<S>& model, const ExperimentConfig& cfg) {
  auto tensors = nn::to_tensors(model.encoder.params());
  for (auto& t : nn::to_tensors(model.head.params())) tensors.push_back(std::move(t));
  tensors.push_back(fingerprint_tensor(fingerprint(cfg.base_fingerprint_text())));
  nn::save_tensors(path, tensors);
}

inline void check_fingerprint(const std::vector<nn::NamedTensor>& tensors, const std::string& expect_text,
                              const std::string& path) {
  if (read_fingerprint(tensors) != fingerprint(expect_text))
    throw CompatibilityError("checkpoint " + path + " was written for a different architecture (expected " +
                             expect_text + ")");
}

template <typename S>
BaseModel<S> load_base(const std::string& path, const ExperimentConfig& cfg) {
  const auto tensors = nn::load_tensors(path);
  check_fingerprint(tensors, cfg.base_fingerprint_text(), path);
  BaseModel<S> model(cfg, 0);
  nn::load_into(model.encoder.params(), tensors);
  nn::load_into(model.head.params(), tensors);
  return model;
}

template <typename S>
void save_tsr(const std::string& path, const TsrNet<S>& net, const ExperimentConfig& cfg) {
  auto tensors = nn::to_tensors(net.params());
  tensors.push_back(fingerprint_tensor(fingerprint(cfg.tsr_fingerprint_text(net.config().n))));
  nn::save_tensors(path, tensors);
}

template <typename S>
TsrNet<S> load_tsr(const std::string& path, const ExperimentConfig& cfg, int n) {
  const auto tensors = nn::load_tensors(path);
  check_fingerprint(tensors, cfg.tsr_fingerprint_text(n), path);
  TsrNet<S> net(cfg.tsr_config(n), 0);
  nn::load_into(net.params(), tensors);
  return net;
}

// ----------------------------------------------------------------- evaluation

struct EvalResult {
  double wer = 0.0;
  int ins = 0;
  int del = 0;
  int sub = 0;
  int ref_words = 0;
  std::size_t sequences = 0;
};

struct EvalOptions {
  int factor = 1;
  Reconstructor reconstructor = Reconstructor::kNearest;
  std::size_t beam_width = 10;
  // Run the reconstructor even at factor 1 (used when selecting a TSRNet
  // trained for n = 1).
  bool force_reconstructor = false;
};

template <typename S>
LogProbLattice<S> eval_lattice(const RawSequence<S>& raw, const BaseModel<S>& base, const nn::NoDeduce<TsrNet<S>>* tsr,
                               const EvalOptions& opt) {
  if (opt.factor == 1 && opt.force_reconstructor && opt.reconstructor == Reconstructor::kTsrNet) {
    if (!tsr) throw ConfigError("evaluate: tsrnet reconstructor requested without a trained TSRNet");
    const FeatureSequence<S> dense = tsr->apply(base.encoder.apply(raw), nn::Mode::kEval);
    return base.head.apply(dense);
  }
  return recognize_lattice(raw, base.encoder, base.head, opt.factor, opt.reconstructor, tsr);
}

// Corpus-level WER: total edits over total reference words.
template <typename S>
EvalResult evaluate(const std::vector<synth::LabeledSequence>& data, const BaseModel<S>& base,
                    const nn::NoDeduce<TsrNet<S>>* tsr, const EvalOptions& opt) {
  EvalResult r;
  for (const auto& seq : data) {
    const RawSequence<S> raw = seq.raw.template cast<S>();
    const auto hyp = ctc::beam_decode(eval_lattice(raw, base, tsr, opt), opt.beam_width);
    const auto w = metrics::wer(hyp, seq.label);
    r.ins += w.ins;
    r.del += w.del;
    r.sub += w.sub;
    r.ref_words += static_cast<int>(seq.label.size());
    ++r.sequences;
  }
  r.wer = r.ref_words ? 100.0 * (r.ins + r.del + r.sub) / r.ref_words : 0.0;
  return r;
}

// ------------------------------------------------------------------- training

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double dev_wer = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  double best_dev_wer = 0.0;
  int best_epoch = 0;
  std::size_t skipped = 0;
};

enum class TsrObjective { kCtc, kL2 };

inline TsrObjective parse_objective(const std::string& s) {
  if (s == "ctc") return TsrObjective::kCtc;
  if (s == "l2") return TsrObjective::kL2;
  throw ArgumentError("unknown training objective: " + s);
}

namespace detail {

inline double lr_for_epoch(const TrainConfig& tc, double base_lr, const std::vector<int>& milestones, int epoch) {
  double lr = base_lr;
  for (int m : milestones)
    if (epoch > m) lr *= tc.lr_decay;
  return lr;
}

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(synth::mix_seed(seed, 0x5eed0000ull + static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline std::uint64_t sample_seed(std::uint64_t seed, int epoch, std::size_t index) {
  return synth::mix_seed(seed, (static_cast<std::uint64_t>(epoch) << 32) ^ index);
}

template <typename S>
RawSequence<S> training_view(const synth::LabeledSequence& seq, const TrainConfig& tc, int epoch, std::size_t index) {
  RawSequence<S> raw = seq.raw.template cast<S>();
  if (tc.augment && raw.cols() >= 2)
    raw = sampling::temporal_augment(raw, sample_seed(tc.seed ^ 0xa5a5ull, epoch, index));
  return raw;
}

inline void log_epoch(std::ostream* log, const std::string& what, const EpochLog& e) {
  if (!log) return;
  *log << what << " epoch " << std::setw(3) << e.epoch << "  lr " << std::scientific << std::setprecision(2) << e.lr
       << std::defaultfloat << "  loss " << std::fixed << std::setprecision(4) << e.train_loss << "  dev WER "
       << std::setprecision(2) << e.dev_wer << "%" << std::defaultfloat << std::endl;
}

}  // namespace detail

// Mean per-sequence CTC loss of the full-rate recognizer.
template <typename S>
double mean_ctc_loss(const std::vector<synth::LabeledSequence>& data, const BaseModel<S>& base, nn::Mode mode) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& seq : data) {
    nn::Tape<S> tape(false);
    const RawSequence<S> raw = seq.raw.template cast<S>();
    auto out = base.head.forward(tape, base.encoder.forward(tape, tape.leaf(raw)), mode);
    total += ctc::loss<S>(tape.value(out).transpose(), seq.label).loss;
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

// One CTC forward/backward through encoder + head; returns the loss.
template <typename S>
double base_step(BaseModel<S>& model, const RawSequence<S>& raw, const GlossSequence& label, S grad_scale) {
  nn::Tape<S> tape;
  auto out = model.head.forward(tape, model.encoder.forward(tape, tape.leaf(raw)), nn::Mode::kTrain);
  const auto res = ctc::loss<S>(tape.value(out).transpose(), label);
  if (!std::isfinite(res.loss)) return res.loss;
  tape.backward(out, (res.grad.transpose() * grad_scale).eval());
  return res.loss;
}

template <typename S>
TrainReport train_base(const synth::Dataset& data, const ExperimentConfig& cfg, BaseModel<S>& model,
                       std::ostream* log = nullptr) {
  const auto& tc = cfg.train;
  if (tc.batch < 1) throw ArgumentError("train: batch must be >= 1");
  model.set_trainable(true);
  nn::Adam<S> opt_enc({tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  nn::Adam<S> opt_head({tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  EvalOptions eval_opt{1, Reconstructor::kNearest, cfg.eval.beam_width, false};

  TrainReport report;
  report.best_dev_wer = std::numeric_limits<double>::infinity();
  auto best_enc = model.encoder.params().snapshot();
  auto best_head = model.head.params().snapshot();

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr = detail::lr_for_epoch(tc, tc.lr, tc.milestones, epoch);
    opt_enc.options().lr = lr;
    opt_head.options().lr = lr;
    const auto order = detail::epoch_order(data.train.size(), tc.seed, epoch);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    int pending = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& seq = data.train[order[k]];
      const auto raw = detail::training_view<S>(seq, tc, epoch, order[k]);
      if (static_cast<std::size_t>(raw.cols()) < ctc::min_frames(seq.label)) {
        ++report.skipped;
        continue;
      }
      const double l = base_step(model, raw, seq.label, S(1) / static_cast<S>(tc.batch));
      if (!std::isfinite(l))
        throw TrainingError("train_base: non-finite loss at epoch " + std::to_string(epoch) + ", sequence " +
                            std::to_string(order[k]) + " (lr " + std::to_string(lr) + ")");
      loss_sum += l;
      ++counted;
      if (++pending == tc.batch || k + 1 == order.size()) {
        opt_enc.step(model.encoder.params());
        opt_head.step(model.head.params());
        pending = 0;
      }
    }
    EpochLog e{epoch, lr, counted ? loss_sum / static_cast<double>(counted) : 0.0, 0.0};
    e.dev_wer = evaluate(data.dev, model, nullptr, eval_opt).wer;
    report.epochs.push_back(e);
    detail::log_epoch(log, "base", e);
    if (e.dev_wer < report.best_dev_wer) {
      report.best_dev_wer = e.dev_wer;
      report.best_epoch = epoch;
      best_enc = model.encoder.params().snapshot();
      best_head = model.head.params().snapshot();
    }
  }
  if (tc.epochs > 0) {
    model.encoder.params().restore(best_enc);
    model.head.params().restore(best_head);
  }
  return report;
}

// Step-2 forward for one sequence: encode all frames with the frozen encoder,
// sparsify by `indices`, reconstruct, trim to the original length.
template <typename S>
struct TsrPass {
  nn::Tape<S> tape;
  nn::Var<S> dense;
  FeatureSequence<S> reference;
};

template <typename S>
double tsr_step(const BaseModel<S>& base, TsrNet<S>& net, const RawSequence<S>& raw, const GlossSequence& label,
                const std::vector<Eigen::Index>& indices, TsrObjective objective, S grad_scale) {
  const FeatureSequence<S> features = base.encoder.apply(raw);
  nn::Tape<S> tape;
  auto sparse = tape.leaf(sampling::gather(features, indices));
  auto dense = nn::trim(tape, net.forward(tape, sparse, nn::Mode::kTrain), features.cols());
  if (objective == TsrObjective::kL2) {
    const FeatureSequence<S> diff = tape.value(dense) - features;
    const double n = static_cast<double>(diff.size());
    const double l = diff.template cast<double>().squaredNorm() / n;
    tape.backward(dense, (diff * static_cast<S>(2.0 / n) * grad_scale).eval());
    return l;
  }
  auto out = base.head.forward(tape, dense, nn::Mode::kEval);
  const auto res = ctc::loss<S>(tape.value(out).transpose(), label);
  if (!std::isfinite(res.loss)) return res.loss;
  tape.backward(out, (res.grad.transpose() * grad_scale).eval());
  return res.loss;
}

// Initialisation seed of the TSRNet trained for factor n.
inline std::uint64_t tsr_init_seed(std::uint64_t train_seed, int n) {
  return synth::mix_seed(train_seed, 100 + static_cast<std::uint64_t>(n));
}

template <typename S>
TrainReport train_tsrnet(const synth::Dataset& data, const ExperimentConfig& cfg, BaseModel<S>& base,
                         TsrNet<S>& net, TsrObjective objective = TsrObjective::kCtc, std::ostream* log = nullptr) {
  const auto& tc = cfg.train;
  const int n = net.config().n;
  base.set_trainable(false);
  net.params().set_trainable(true);
  nn::Adam<S> opt({tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  EvalOptions eval_opt{n, Reconstructor::kTsrNet, cfg.eval.beam_width, true};
  const std::string tag = std::string(objective == TsrObjective::kCtc ? "tsr-ctc" : "tsr-l2") + " n=" + std::to_string(n);

  TrainReport report;
  report.best_dev_wer = std::numeric_limits<double>::infinity();
  auto best = net.params().snapshot();
  for (int epoch = 1; epoch <= tc.tsr_epochs; ++epoch) {
    const double lr = detail::lr_for_epoch(tc, tc.lr, tc.tsr_milestones, epoch);
    opt.options().lr = lr;
    const auto order = detail::epoch_order(data.train.size(), tc.seed ^ 0x75a7ull, epoch);
    double loss_sum = 0.0;
    std::size_t counted = 0;
    int pending = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& seq = data.train[order[k]];
      const auto raw = detail::training_view<S>(seq, tc, epoch, order[k]);
      if (static_cast<std::size_t>(raw.cols()) < ctc::min_frames(seq.label)) {
        ++report.skipped;
        continue;
      }
      const auto idx = sampling::clamp_indices(
          sampling::sample_indices(raw.cols(), n, tc.sampling, detail::sample_seed(tc.seed ^ 0x5a3ull, epoch, order[k])),
          raw.cols());
      const double l = tsr_step(base, net, raw, seq.label, idx, objective, S(1) / static_cast<S>(tc.batch));
      if (!std::isfinite(l))
        throw TrainingError("train_tsrnet: non-finite loss at epoch " + std::to_string(epoch) + ", sequence " +
                            std::to_string(order[k]));
      loss_sum += l;
      ++counted;
      if (++pending == tc.batch || k + 1 == order.size()) {
        opt.step(net.params());
        pending = 0;
      }
    }
    EpochLog e{epoch, lr, counted ? loss_sum / static_cast<double>(counted) : 0.0, 0.0};
    e.dev_wer = evaluate(data.dev, base, &net, eval_opt).wer;
    report.epochs.push_back(e);
    detail::log_epoch(log, tag, e);
    if (e.dev_wer < report.best_dev_wer) {
      report.best_dev_wer = e.dev_wer;
      report.best_epoch = epoch;
      best = net.params().snapshot();
    }
  }
  if (tc.tsr_epochs > 0) net.params().restore(best);
  return report;
}

// ---------------------------------------------------------------------- sweep

struct SweepRow {
  int factor = 1;
  Reconstructor reconstructor = Reconstructor::kNearest;
  double wer = 0.0;
  double reference_wer = 0.0;
  double werd = 0.0;
};

// One TSRNet per factor > 1 is needed for tsrnet rows. Factor 1 rows bypass
// reconstruction and equal the reference.
template <typename S>
std::vector<SweepRow> sweep(const std::vector<synth::LabeledSequence>& data, const BaseModel<S>& base,
                            const std::map<int, const TsrNet<S>*>& nets, const std::vector<int>& factors,
                            const std::vector<Reconstructor>& recs, std::size_t beam_width) {
  const double ref = evaluate(data, base, nullptr,
                              EvalOptions{1, Reconstructor::kNearest, beam_width, false})
                         .wer;
  std::vector<SweepRow> rows;
  for (int n : factors) {
    for (auto rec : recs) {
      const TsrNet<S>* net = nullptr;
      if (rec == Reconstructor::kTsrNet && n != 1) {
        auto it = nets.find(n);
        if (it == nets.end() || !it->second)
          throw ConfigError("sweep: no TSRNet checkpoint for factor " + std::to_string(n));
        net = it->second;
      }
      SweepRow row;
      row.factor = n;
      row.reconstructor = rec;
      row.reference_wer = ref;
      row.wer = n == 1 ? ref : evaluate(data, base, net, EvalOptions{n, rec, beam_width, false}).wer;
      row.werd = metrics::werd(row.wer, row.reference_wer);
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "factor,reconstructor,wer,reference_wer,werd\n";
  os << std::setprecision(10);
  for (const auto& r : rows)
    os << r.factor << ',' << to_string(r.reconstructor) << ',' << r.wer << ',' << r.reference_wer << ',' << r.werd
       << '\n';
}

inline void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << std::left << std::setw(8) << "factor" << std::setw(14) << "reconstructor" << std::right << std::setw(10)
     << "WER(%)" << std::setw(10) << "WERD(%)" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(8) << r.factor << std::setw(14) << to_string(r.reconstructor) << std::right
       << std::fixed << std::setprecision(2) << std::setw(10) << r.wer << std::setw(10) << r.werd << '\n'
       << std::defaultfloat;
}

}  // namespace tsr::pipeline
