#pragma once

// Parameter, FLOP and memory-traffic accounting for the test-time pipeline
//   raw (T frames) -> equal downsampling (T1 = ceil(T/n) frames) -> encoder
//   -> TSRNet (T1 -> n*T1, trimmed to T) -> head.
// At n = 1 the TSRNet part is skipped. The formulas mirror the instrumented
// counter in nn/counter.hpp term by term.

#include "tsr/nn/counter.hpp"
#include "tsr/recognizer.hpp"
#include "tsr/tsrnet.hpp"

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace tsr::accounting {

using Count = std::uint64_t;

struct Cost {
  Count flops = 0;
  Count mem_bytes = 0;

  Cost& operator+=(const Cost& o) {
    flops += o.flops;
    mem_bytes += o.mem_bytes;
    return *this;
  }
};

namespace cost {

inline Cost op(Count flops, Count in, Count out, Count params) { return {flops, 4 * (in + out + params)}; }

// Same-padded stride-1 conv with bias.
inline Cost conv(Count cin, Count cout, Count kernel, Count groups, Count t) {
  return op(2 * kernel * (cin / groups) * cout * t + cout * t, cin * t, cout * t, cout * (cin / groups) * kernel + cout);
}

inline Cost transposed_conv(Count cin, Count cout, Count kernel, Count stride, Count tin) {
  const Count tout = (tin - 1) * stride + kernel;
  return op(2 * kernel * cin * cout * tin + cout * tout, cin * tin, cout * tout, cin * cout * kernel + cout);
}

inline Cost pointwise(Count cin, Count cout, Count t) {
  return op(2 * cin * cout * t + cout * t, cin * t, cout * t, cin * cout + cout);
}

inline Cost batchnorm(Count c, Count t) { return op(2 * c * t, c * t, c * t, 2 * c); }
inline Cost relu(Count c, Count t) { return op(c * t, c * t, c * t, 0); }
inline Cost add(Count c, Count t) { return op(c * t, 2 * c * t, c * t, 0); }
inline Cost log_softmax(Count c, Count t) { return op(4 * c * t, c * t, c * t, 0); }

inline Cost resblock(Count c, ResBlockVariant v, Count dw_kernel, Count t) {
  Cost r = resblock_is_depthwise(v) ? conv(c, c, dw_kernel, c, t)
                                    : conv(c, c, static_cast<Count>(resblock_full_kernel(v)), 1, t);
  r += add(c, t);
  r += batchnorm(c, t);
  r += relu(c, t);
  return r;
}

}  // namespace cost

inline Cost encoder_cost(const EncoderConfig& e, Count frames) {
  Cost c = cost::pointwise(e.c0, e.hidden, frames);
  c += cost::relu(e.hidden, frames);
  c += cost::pointwise(e.hidden, e.c1, frames);
  c += cost::relu(e.c1, frames);
  return c;
}

// TSRNet applied to t1 sparse frames.
inline Cost tsrnet_cost(const TsrConfig& cfg, Count t1) {
  const Count n = static_cast<Count>(cfg.n);
  const Count t = n * t1;
  Cost c = cost::conv(cfg.c1, cfg.c2, cfg.in_kernel, 1, t1);
  c += cost::batchnorm(cfg.c2, t1);
  c += cost::relu(cfg.c2, t1);
  for (int i = 0; i < cfg.m; ++i) c += cost::resblock(cfg.c2, cfg.variant, cfg.dw_kernel, t1);
  c += cost::transposed_conv(cfg.c2, cfg.c3, cfg.upsample_kernel(), n, t1);
  for (int i = 0; i < cfg.k; ++i) c += cost::resblock(cfg.c3, cfg.variant, cfg.dw_kernel, t);
  c += cost::conv(cfg.c3, cfg.c1, cfg.out_kernel, 1, t);
  c += cost::batchnorm(cfg.c1, t);
  c += cost::add(cfg.c1, t);
  c += cost::relu(cfg.c1, t);
  return c;
}

inline Cost head_cost(const HeadConfig& h, Count in_channels, Count t) {
  Cost c;
  Count cin = in_channels;
  for (int i = 0; i < h.layers(); ++i) {
    c += cost::conv(cin, h.hidden, h.kernel, 1, t);
    c += cost::batchnorm(h.hidden, t);
    c += cost::relu(h.hidden, t);
    cin = h.hidden;
  }
  const Count v = static_cast<Count>(h.vocab_size) + 1;
  c += cost::pointwise(cin, v, t);
  c += cost::log_softmax(v, t);
  return c;
}

// Learnable element counts from configs alone (no model needed).
inline Count encoder_params(const EncoderConfig& e) {
  return static_cast<Count>(e.c0) * e.hidden + e.hidden + static_cast<Count>(e.hidden) * e.c1 + e.c1;
}

inline Count resblock_params(Count c, ResBlockVariant v, Count dw_kernel) {
  const Count conv = resblock_is_depthwise(v) ? c * dw_kernel + c
                                              : c * c * static_cast<Count>(resblock_full_kernel(v)) + c;
  return conv + 2 * c;
}

inline Count tsrnet_params(const TsrConfig& cfg) {
  Count p = static_cast<Count>(cfg.c1) * cfg.c2 * cfg.in_kernel + cfg.c2 + 2ull * cfg.c2;
  p += static_cast<Count>(cfg.m) * resblock_params(cfg.c2, cfg.variant, cfg.dw_kernel);
  p += static_cast<Count>(cfg.c2) * cfg.c3 * cfg.upsample_kernel() + cfg.c3;
  p += static_cast<Count>(cfg.k) * resblock_params(cfg.c3, cfg.variant, cfg.dw_kernel);
  p += static_cast<Count>(cfg.c3) * cfg.c1 * cfg.out_kernel + cfg.c1 + 2ull * cfg.c1;
  return p;
}

inline Count head_params(const HeadConfig& h, Count in_channels) {
  Count p = 0;
  Count cin = in_channels;
  for (int i = 0; i < h.layers(); ++i) {
    p += cin * h.hidden * h.kernel + h.hidden + 2ull * h.hidden;
    cin = h.hidden;
  }
  const Count v = static_cast<Count>(h.vocab_size) + 1;
  return p + cin * v + v;
}

template <typename S>
Count count_params(const nn::ParamSet<S>& ps) {
  return static_cast<Count>(ps.count_learnable());
}

struct PartReport {
  std::string part;
  Count params = 0;
  Count flops = 0;
  Count mem_rw = 0;
  double runtime_ms = 0.0;
  double runtime_var = 0.0;
};

struct AccountingReport {
  Eigen::Index frames = 0;
  int factor = 1;
  std::vector<PartReport> parts;  // encoder, tsrnet, head
  PartReport total;

  const PartReport& part(const std::string& name) const {
    for (const auto& p : parts)
      if (p.part == name) return p;
    throw ArgumentError("accounting: no part named " + name);
  }

  void sum_parts() {
    total = PartReport{"total"};
    for (const auto& p : parts) {
      total.params += p.params;
      total.flops += p.flops;
      total.mem_rw += p.mem_rw;
      total.runtime_ms += p.runtime_ms;
      total.runtime_var += p.runtime_var;
    }
  }
};

struct PipelineShape {
  EncoderConfig encoder;
  HeadConfig head;
  std::optional<TsrConfig> tsr;  // absent: TSRNet not part of the pipeline
};

inline Count sparse_frames(Eigen::Index t, int n) {
  if (t < 1 || n < 1) throw ArgumentError("accounting: need T >= 1 and n >= 1");
  return static_cast<Count>((t + n - 1) / n);
}

// Analytic report (runtime fields left at zero). The TSRNet part is counted
// only when n > 1 and a TSRNet config is present; its factor must match n.
inline AccountingReport analyze(const PipelineShape& shape, Eigen::Index t, int n) {
  const Count t1 = sparse_frames(t, n);
  AccountingReport r;
  r.frames = t;
  r.factor = n;
  const Cost enc = encoder_cost(shape.encoder, t1);
  r.parts.push_back({"encoder", encoder_params(shape.encoder), enc.flops, enc.mem_bytes});
  PartReport tsr_part{"tsrnet"};
  if (n > 1 && shape.tsr) {
    if (shape.tsr->n != n)
      throw ConfigError("accounting: TSRNet factor " + std::to_string(shape.tsr->n) + " != " + std::to_string(n));
    const Cost c = tsrnet_cost(*shape.tsr, t1);
    tsr_part.params = tsrnet_params(*shape.tsr);
    tsr_part.flops = c.flops;
    tsr_part.mem_rw = c.mem_bytes;
  }
  r.parts.push_back(tsr_part);
  const Cost head = head_cost(shape.head, shape.encoder.c1, static_cast<Count>(t));
  r.parts.push_back({"head", head_params(shape.head, shape.encoder.c1), head.flops, head.mem_bytes});
  r.sum_parts();
  return r;
}

inline Count count_flops(const PipelineShape& shape, Eigen::Index t, int n) { return analyze(shape, t, n).total.flops; }
inline Count mem_rw(const PipelineShape& shape, Eigen::Index t, int n) { return analyze(shape, t, n).total.mem_rw; }

struct Timing {
  double mean_ms = 0.0;
  double var_ms2 = 0.0;
  std::vector<double> samples_ms;
};

// One untimed warm-up call, then `repeats` timed calls.
template <typename F>
Timing measure_runtime(F&& fn, int repeats = 5) {
  if (repeats < 1) throw ArgumentError("measure_runtime: repeats must be >= 1");
  fn();
  Timing t;
  for (int i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    t.samples_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  for (double s : t.samples_ms) t.mean_ms += s;
  t.mean_ms /= repeats;
  for (double s : t.samples_ms) t.var_ms2 += (s - t.mean_ms) * (s - t.mean_ms);
  t.var_ms2 /= repeats;
  return t;
}

// Full report with per-part wall time of the test-time pipeline on `raw`.
template <typename S>
AccountingReport account(const RawSequence<S>& raw, const FrameEncoder<S>& encoder, const TemporalHead<S>& head,
                         const nn::NoDeduce<TsrNet<S>>* tsr, int n, int repeats = 5) {
  PipelineShape shape{encoder.config(), head.config(), std::nullopt};
  if (tsr && n > 1) shape.tsr = tsr->config();
  AccountingReport r = analyze(shape, raw.cols(), n);
  if (n > 1 && !tsr) throw ConfigError("accounting: factor " + std::to_string(n) + " needs a TSRNet");

  const auto idx = sampling::sample_indices(raw.cols(), n, sampling::Method::kEqual, 0);
  const RawSequence<S> sparse_raw = n > 1 ? sampling::gather(raw, idx) : raw;
  const FeatureSequence<S> sparse = encoder.apply(sparse_raw);
  const FeatureSequence<S> dense = n > 1 ? FeatureSequence<S>(tsr->apply(sparse, nn::Mode::kEval).leftCols(raw.cols()))
                                         : sparse;
  auto fill = [&](const std::string& part, const Timing& t) {
    for (auto& p : r.parts)
      if (p.part == part) {
        p.runtime_ms = t.mean_ms;
        p.runtime_var = t.var_ms2;
      }
  };
  fill("encoder", measure_runtime([&] { (void)encoder.apply(sparse_raw); }, repeats));
  if (n > 1) fill("tsrnet", measure_runtime([&] { (void)tsr->apply(sparse, nn::Mode::kEval); }, repeats));
  fill("head", measure_runtime([&] { (void)head.apply(dense); }, repeats));
  r.sum_parts();
  return r;
}

inline void write_csv(std::ostream& os, const AccountingReport& r, bool header = true) {
  if (header) os << "part,params,flops,mem_rw_bytes,runtime_ms\n";
  for (const auto* p : {&r.parts[0], &r.parts[1], &r.parts[2], &r.total})
    os << p->part << ',' << p->params << ',' << p->flops << ',' << p->mem_rw << ',' << std::setprecision(6)
       << p->runtime_ms << '\n';
}

inline void write_table(std::ostream& os, const AccountingReport& r) {
  os << "T=" << r.frames << " n=" << r.factor << '\n';
  os << std::left << std::setw(10) << "part" << std::right << std::setw(12) << "params" << std::setw(16) << "flops"
     << std::setw(16) << "mem_rw_bytes" << std::setw(14) << "runtime_ms" << std::setw(12) << "var" << '\n';
  for (const auto* p : {&r.parts[0], &r.parts[1], &r.parts[2], &r.total})
    os << std::left << std::setw(10) << p->part << std::right << std::setw(12) << p->params << std::setw(16)
       << p->flops << std::setw(16) << p->mem_rw << std::setw(14) << std::fixed << std::setprecision(3)
       << p->runtime_ms << std::setw(12) << std::setprecision(4) << p->runtime_var << std::defaultfloat << '\n';
}

}  // namespace tsr::accounting
