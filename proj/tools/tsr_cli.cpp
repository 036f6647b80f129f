// tsr: command-line driver for data generation, two-step training,
// evaluation, factor sweeps, compute accounting and diagnostics.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include "CLI11.hpp"

#include "tsr/accounting.hpp"
#include "tsr/nn/gradcheck.hpp"
#include "tsr/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace tsr;

namespace {

struct Common {
  std::string config;
  std::string workdir;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config file");
  app->add_option("--workdir", c.workdir, "run directory (default: run.workdir from the config)");
  app->add_option("--data", c.data, "dataset file or directory (default: <workdir>/data.tsd)");
  app->add_option("--out", c.out, "write CSV output here");
  app->add_option("--seed", c.seed, "override synth.seed and train.seed");
  app->add_option("--set", c.set, "override a config key, e.g. --set train.epochs=5");
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(c.config);
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
  }
  if (c.seed) {
    cfg.synth.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  if (!c.workdir.empty()) cfg.workdir = c.workdir;
  return cfg;
}

std::string data_path(const Common& c, const ExperimentConfig& cfg) {
  std::string p = c.data.empty() ? (fs::path(cfg.workdir) / "data.tsd").string() : c.data;
  if (fs::is_directory(p)) p = (fs::path(p) / "data.tsd").string();
  return p;
}

synth::Dataset load_data(const Common& c, const ExperimentConfig& cfg) {
  const std::string p = data_path(c, cfg);
  if (!fs::exists(p)) throw ConfigError("dataset not found: " + p + " (run gen-data first)");
  auto ds = synth::load_dataset(p);
  if (ds.vocab_size != cfg.synth.vocab_size)
    throw pipeline::CompatibilityError("dataset vocab_size " + std::to_string(ds.vocab_size) +
                                       " does not match config " + std::to_string(cfg.synth.vocab_size));
  return ds;
}

std::string base_path(const ExperimentConfig& cfg) { return (fs::path(cfg.workdir) / "base.ckpt").string(); }

std::string tsr_path(const ExperimentConfig& cfg, int n, pipeline::TsrObjective obj) {
  const std::string stem = obj == pipeline::TsrObjective::kL2 ? "tsrnet_l2_n" : "tsrnet_n";
  return (fs::path(cfg.workdir) / (stem + std::to_string(n) + ".ckpt")).string();
}

pipeline::BaseModel<float> load_base(const ExperimentConfig& cfg) {
  const auto p = base_path(cfg);
  if (!fs::exists(p)) throw ConfigError("base checkpoint not found: " + p + " (run train-base first)");
  return pipeline::load_base<float>(p, cfg);
}

std::unique_ptr<TsrNet<float>> load_tsr(const ExperimentConfig& cfg, int n, pipeline::TsrObjective obj) {
  const auto p = tsr_path(cfg, n, obj);
  if (!fs::exists(p)) throw ConfigError("TSRNet checkpoint not found: " + p + " (run train-tsrnet --factor " +
                                        std::to_string(n) + " first)");
  return std::make_unique<TsrNet<float>>(pipeline::load_tsr<float>(p, cfg, n));
}

std::ofstream open_out(const std::string& path) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

void write_epochs_csv(const std::string& path, const pipeline::TrainReport& r) {
  auto os = open_out(path);
  os << "epoch,lr,train_loss,dev_wer\n" << std::setprecision(10);
  for (const auto& e : r.epochs) os << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.dev_wer << '\n';
}

int cmd_gen_data(const Common& c) {
  const auto cfg = load_config(c);
  std::string path = c.out.empty() ? (fs::path(cfg.workdir) / "data.tsd").string() : c.out;
  if (fs::is_directory(path) || path.back() == '/') path = (fs::path(path) / "data.tsd").string();
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  const auto ds = synth::generate_dataset(cfg.synth);
  synth::save_dataset(path, ds);
  std::cout << "wrote " << path << ": " << ds.train.size() << " train, " << ds.dev.size() << " dev, "
            << ds.test.size() << " test sequences, vocabulary " << ds.vocab_size << '\n';
  return 0;
}

int cmd_train_base(const Common& c) {
  const auto cfg = load_config(c);
  const auto ds = load_data(c, cfg);
  fs::create_directories(cfg.workdir);
  pipeline::BaseModel<float> model(cfg, cfg.train.seed);
  std::cout << "base model: " << model.num_params() << " parameters\n";
  const auto rep = pipeline::train_base(ds, cfg, model, &std::cout);
  pipeline::save_base(base_path(cfg), model, cfg);
  std::cout << "best dev WER " << std::fixed << std::setprecision(2) << rep.best_dev_wer << "% at epoch "
            << rep.best_epoch << "; saved " << base_path(cfg) << '\n';
  if (!c.out.empty()) write_epochs_csv(c.out, rep);
  return 0;
}

int cmd_train_tsrnet(const Common& c, int n, const std::string& method) {
  const auto cfg = load_config(c);
  const auto obj = pipeline::parse_objective(method);
  const auto ds = load_data(c, cfg);
  auto base = load_base(cfg);
  TsrNet<float> net(cfg.tsr_config(n), pipeline::tsr_init_seed(cfg.train.seed, n));
  std::cout << "TSRNet n=" << n << ": " << net.num_params() << " parameters, objective " << method << '\n';
  const auto rep = pipeline::train_tsrnet(ds, cfg, base, net, obj, &std::cout);
  const auto p = tsr_path(cfg, n, obj);
  pipeline::save_tsr(p, net, cfg);
  std::cout << "best dev WER " << std::fixed << std::setprecision(2) << rep.best_dev_wer << "% at epoch "
            << rep.best_epoch << "; saved " << p << '\n';
  if (!c.out.empty()) write_epochs_csv(c.out, rep);
  return 0;
}

int cmd_eval(const Common& c, int n, const std::string& rec_name, const std::string& method,
             const std::string& split) {
  const auto cfg = load_config(c);
  const auto rec = parse_reconstructor(rec_name);
  const auto ds = load_data(c, cfg);
  const auto base = load_base(cfg);
  std::unique_ptr<TsrNet<float>> net;
  if (rec == Reconstructor::kTsrNet && n > 1) net = load_tsr(cfg, n, pipeline::parse_objective(method));
  const auto& data = ds.split(split.empty() ? cfg.eval.split : split);
  const auto ref = pipeline::evaluate(data, base, net.get(), {1, rec, cfg.eval.beam_width, false});
  const auto res = n == 1 ? ref : pipeline::evaluate(data, base, net.get(), {n, rec, cfg.eval.beam_width, false});
  const double werd = metrics::werd(res.wer, ref.wer);
  std::cout << std::fixed << std::setprecision(2) << "factor " << n << "  reconstructor " << rec_name << "  WER "
            << res.wer << "%  (sub " << res.sub << ", del " << res.del << ", ins " << res.ins << " / "
            << res.ref_words << " words)  reference WER " << ref.wer << "%  WERD " << std::setprecision(1) << werd
            << '\n';
  if (!c.out.empty()) {
    auto os = open_out(c.out);
    os << "factor,reconstructor,wer,reference_wer,werd,sub,del,ins,ref_words\n" << std::setprecision(10);
    os << n << ',' << rec_name << ',' << res.wer << ',' << ref.wer << ',' << werd << ',' << res.sub << ','
       << res.del << ',' << res.ins << ',' << res.ref_words << '\n';
  }
  return 0;
}

// Untrained TSRNet for cost measurement; one train-mode pass populates its
// normalization statistics so that eval mode is usable.
std::unique_ptr<TsrNet<float>> untrained_tsr(const ExperimentConfig& cfg, int n, const FrameEncoder<float>& encoder,
                                             const RawSequence<float>& probe) {
  auto net = std::make_unique<TsrNet<float>>(cfg.tsr_config(n), pipeline::tsr_init_seed(cfg.train.seed, n));
  const auto idx = sampling::sample_indices(probe.cols(), n, sampling::Method::kEqual, 0);
  net->apply(encoder.apply(sampling::gather(probe, idx)), nn::Mode::kTrain);
  return net;
}

std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

int cmd_sweep(const Common& c, const std::string& method, const std::string& split, Eigen::Index frames) {
  const auto cfg = load_config(c);
  const auto obj = pipeline::parse_objective(method);
  const auto ds = load_data(c, cfg);
  const auto base = load_base(cfg);
  const bool want_tsr =
      std::find(cfg.eval.reconstructors.begin(), cfg.eval.reconstructors.end(), Reconstructor::kTsrNet) !=
      cfg.eval.reconstructors.end();
  std::map<int, std::unique_ptr<TsrNet<float>>> owned;
  std::map<int, const TsrNet<float>*> nets;
  for (int n : cfg.eval.factors)
    if (n > 1 && want_tsr) {
      owned[n] = load_tsr(cfg, n, obj);
      nets[n] = owned[n].get();
    }
  const auto rows = pipeline::sweep(ds.split(split.empty() ? cfg.eval.split : split), base, nets, cfg.eval.factors,
                                    cfg.eval.reconstructors, cfg.eval.beam_width);
  pipeline::write_sweep_table(std::cout, rows);

  // Accounting on a representative input of `frames` frames.
  std::vector<accounting::AccountingReport> reports;
  const RawSequence<float> probe = RawSequence<float>::Random(cfg.synth.obs_dim, frames);
  for (int n : cfg.eval.factors) {
    std::unique_ptr<TsrNet<float>> fresh;
    const TsrNet<float>* net = nullptr;
    if (n > 1) {
      if (nets.count(n)) {
        net = nets[n];
      } else {
        fresh = untrained_tsr(cfg, n, base.encoder, probe);
        net = fresh.get();
      }
    }
    reports.push_back(accounting::account(probe, base.encoder, base.head, net, n));
    std::cout << '\n';
    accounting::write_table(std::cout, reports.back());
  }
  if (!c.out.empty()) {
    auto os = open_out(c.out);
    pipeline::write_sweep_csv(os, rows);
    auto acc = open_out(sibling(c.out, "_accounting"));
    acc << "factor,frames,part,params,flops,mem_rw_bytes,runtime_ms\n";
    for (const auto& r : reports) {
      std::ostringstream body;
      accounting::write_csv(body, r, false);
      std::istringstream lines(body.str());
      for (std::string line; std::getline(lines, line);) acc << r.factor << ',' << r.frames << ',' << line << '\n';
    }
  }
  return 0;
}

int cmd_account(const Common& c, int n, Eigen::Index frames, int repeats) {
  const auto cfg = load_config(c);
  // Counts depend only on the architecture; trained weights are used when
  // available so that runtimes reflect the real checkpoint.
  std::optional<pipeline::BaseModel<float>> base;
  std::mt19937_64 rng(cfg.train.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  RawSequence<float> probe(cfg.synth.obs_dim, frames);
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = normal(rng);
  if (fs::exists(base_path(cfg))) {
    base.emplace(pipeline::load_base<float>(base_path(cfg), cfg));
  } else {
    base.emplace(cfg, cfg.train.seed);
    base->head.apply(base->encoder.apply(probe), nn::Mode::kTrain);
  }
  std::unique_ptr<TsrNet<float>> net;
  if (n > 1) {
    const auto p = tsr_path(cfg, n, pipeline::TsrObjective::kCtc);
    net = fs::exists(p) ? std::make_unique<TsrNet<float>>(pipeline::load_tsr<float>(p, cfg, n))
                        : untrained_tsr(cfg, n, base->encoder, probe);
  }
  const auto report = accounting::account(probe, base->encoder, base->head, net.get(), n, repeats);
  accounting::write_table(std::cout, report);
  if (!c.out.empty()) {
    auto os = open_out(c.out);
    accounting::write_csv(os, report);
  }
  return 0;
}

// Finite-difference check of TSRNet + head + CTC at small width, in double.
int cmd_gradcheck(const Common& c, double tol) {
  auto cfg = load_config(c);
  TsrConfig tc = cfg.tsr_config(2);
  tc.c1 = 4;
  tc.c2 = 6;
  tc.c3 = 6;
  tc.m = 1;
  tc.k = 1;
  tc.zero_init_detail = false;
  HeadConfig hc = cfg.head_config();
  hc.vocab_size = 3;
  hc.hidden = 5;
  hc.kernel = 3;
  const std::uint64_t seed = cfg.train.seed;
  TsrNet<double> net(tc, seed);
  TemporalHead<double> head(hc, tc.c1, seed + 1);
  std::mt19937_64 rng(seed + 2);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  FeatureSequence<double> f2(tc.c1, 4);
  for (Eigen::Index i = 0; i < f2.size(); ++i) f2.data()[i] = u(rng);
  const GlossSequence label{1, 2, 3};

  nn::ParamSet<double>& ps = net.params();
  // Head parameters are checked through a second pass below.
  auto run = [&](bool with_grad) {
    nn::Tape<double> tape(with_grad);
    auto out = head.forward(tape, net.forward(tape, tape.leaf(f2), nn::Mode::kTrain), nn::Mode::kTrain);
    const auto res = ctc::loss<double>(tape.value(out).transpose(), label);
    if (with_grad) tape.backward(out, res.grad.transpose().eval());
    return res.loss;
  };
  nn::GradCheckOptions opt;
  opt.max_per_tensor = 40;
  const auto r1 = nn::grad_check(ps, run, opt);
  const auto r2 = nn::grad_check(head.params(), run, opt);
  const double worst = std::max(r1.max_rel_error, r2.max_rel_error);
  std::cout << "checked " << r1.checked + r2.checked << " coordinates; max relative error " << std::scientific
            << worst << " (tolerance " << tol << ")\n";
  if (!c.out.empty()) {
    auto os = open_out(c.out);
    os << "coordinates,max_rel_error,tolerance,pass\n"
       << r1.checked + r2.checked << ',' << worst << ',' << tol << ',' << (worst < tol) << '\n';
  }
  return worst < tol ? 0 : 2;
}

int cmd_autocorr(const Common& c, const std::string& split, std::size_t index, const std::string& space) {
  const auto cfg = load_config(c);
  const auto ds = load_data(c, cfg);
  const auto& data = ds.split(split.empty() ? cfg.eval.split : split);
  if (index >= data.size()) throw ArgumentError("--index out of range for split");
  Eigen::MatrixXd m;
  if (space == "raw") {
    m = metrics::autocorrelation_matrix<float>(data[index].raw);
  } else if (space == "encoded") {
    m = metrics::autocorrelation_matrix<float>(load_base(cfg).encoder.apply(data[index].raw));
  } else {
    throw ArgumentError("--space must be raw or encoded");
  }
  std::cout << "sequence " << index << " (" << m.rows() << " frames, " << space << ")\n";
  std::cout << std::fixed << std::setprecision(4);
  for (Eigen::Index lag : {1, 2, 4, 8, 16, 32})
    if (lag < m.rows()) std::cout << "  mean similarity at lag " << std::setw(2) << lag << ": "
                                  << metrics::mean_at_lag(m, lag, lag) << '\n';
  if (!c.out.empty()) {
    auto os = open_out(c.out);
    metrics::write_matrix_csv(os, m);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal super-resolution for continuous gesture recognition"};
  app.require_subcommand(1);

  Common common;
  int factor = 4;
  std::string reconstructor = "tsrnet";
  std::string method = "ctc";
  std::string split;
  Eigen::Index frames = 200;
  int repeats = 5;
  double tol = 1e-4;
  std::size_t index = 0;
  std::string space = "raw";

  auto* gen = app.add_subcommand("gen-data", "generate and save the synthetic dataset");
  auto* tb = app.add_subcommand("train-base", "step 1: train encoder + head with CTC at full frame rate");
  auto* tt = app.add_subcommand("train-tsrnet", "step 2: train a TSRNet for one factor through the frozen head");
  auto* ev = app.add_subcommand("eval", "evaluate one factor / reconstructor pair");
  auto* sw = app.add_subcommand("sweep", "WER/WERD grid over eval.factors x eval.reconstructors, plus accounting");
  auto* ac = app.add_subcommand("account", "parameter / FLOP / memory / runtime report for one factor");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of TSRNet + head + CTC gradients");
  auto* au = app.add_subcommand("autocorr", "frame-to-frame cosine similarity matrix of one sequence");
  for (auto* sub : {gen, tb, tt, ev, sw, ac, gc, au}) add_common(sub, common);

  tt->add_option("--factor", factor, "downsampling factor n")->check(CLI::PositiveNumber);
  tt->add_option("--method", method, "training objective")->check(CLI::IsMember({"ctc", "l2"}));
  ev->add_option("--factor", factor, "downsampling factor n")->check(CLI::PositiveNumber);
  ev->add_option("--reconstructor", reconstructor)->check(CLI::IsMember({"tsrnet", "nearest", "linear"}));
  ev->add_option("--method", method, "which TSRNet checkpoint to use")->check(CLI::IsMember({"ctc", "l2"}));
  ev->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  sw->add_option("--method", method, "which TSRNet checkpoints to use")->check(CLI::IsMember({"ctc", "l2"}));
  sw->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  sw->add_option("--frames", frames, "input length for the accounting report")->check(CLI::PositiveNumber);
  ac->add_option("--factor", factor, "downsampling factor n")->check(CLI::PositiveNumber);
  ac->add_option("--frames", frames, "input length T")->check(CLI::PositiveNumber);
  ac->add_option("--repeats", repeats, "timed runs after one warm-up")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", tol);
  au->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  au->add_option("--index", index, "sequence index within the split");
  au->add_option("--space", space, "raw observations or encoded features")->check(CLI::IsMember({"raw", "encoded"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(common);
    if (*tb) return cmd_train_base(common);
    if (*tt) return cmd_train_tsrnet(common, factor, method);
    if (*ev) return cmd_eval(common, factor, reconstructor, method, split);
    if (*sw) return cmd_sweep(common, method, split, frames);
    if (*ac) return cmd_account(common, factor, frames, repeats);
    if (*gc) return cmd_gradcheck(common, tol);
    if (*au) return cmd_autocorr(common, split, index, space);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
