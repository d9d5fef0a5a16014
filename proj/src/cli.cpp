#include "dms/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "dms/config.hpp"
#include "dms/errors.hpp"
#include "dms/report.hpp"
#include "dms/theory_checks.hpp"

namespace fs = std::filesystem;

namespace dms {
namespace {

/// Raw flag values. Presence is checked through the owning CLI11 subcommand,
/// so only flags the user actually passed override the config.
struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double learning_rate = 0.0;
  std::size_t epochs = 0;
  std::string mode;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  std::size_t t_passes = 0;
  std::size_t trials = 0;
  std::string out;
  std::string checkpoint;
  std::string corrupt;
  std::size_t corrupt_modality = 0;
  double severity = 0.0;
  bool dump_weights = false;
};

void add_common_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  sub.add_option("--seed", f.seed, "master seed (overrides DMS_SEED and the config file)");
  sub.add_option("--out", f.out, "output root directory");
  sub.add_option("--epochs", f.epochs, "training epochs");
  sub.add_option("--lambda", f.lambda, "MWCL weight");
  sub.add_option("--lr", f.learning_rate, "SGD learning rate");
  sub.add_option("--mode", f.mode, "fusion mode: dms | static");
  sub.add_option("--alpha", f.alpha, "confidence coefficient");
  sub.add_option("--beta", f.beta, "uncertainty coefficient");
  sub.add_option("--gamma", f.gamma, "alignment coefficient");
  sub.add_option("--mc-passes", f.t_passes, "MC-dropout passes for the uncertainty score");
}

std::uint64_t parse_seed_env(const char* text) {
  std::uint64_t v = 0;
  const std::string_view s(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("DMS_SEED must be a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

/// True if the user passed `name`; flags a subcommand does not define count as absent.
bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

RunConfig resolve_config(const CLI::App& sub, const Flags& f) {
  RunConfig cfg;
  if (const char* env = std::getenv("DMS_SEED"); env != nullptr && *env != '\0') {
    cfg.set_seed(parse_seed_env(env));
  }
  if (given(sub, "--config")) cfg = load_config(f.config, cfg);
  if (given(sub, "--seed")) cfg.set_seed(f.seed);
  if (given(sub, "--out")) cfg.output_dir = f.out;
  if (given(sub, "--epochs")) cfg.train.epochs = f.epochs;
  if (given(sub, "--lambda")) cfg.train.lambda = f.lambda;
  if (given(sub, "--lr")) cfg.train.learning_rate = f.learning_rate;
  if (given(sub, "--mode")) cfg.train.mode = parse_fusion_mode(f.mode);
  if (given(sub, "--alpha")) cfg.train.scheduler.alpha = f.alpha;
  if (given(sub, "--beta")) cfg.train.scheduler.beta = f.beta;
  if (given(sub, "--gamma")) cfg.train.scheduler.gamma = f.gamma;
  if (given(sub, "--mc-passes")) cfg.train.scheduler.t_passes = f.t_passes;
  if (given(sub, "--trials")) cfg.check.trials = f.trials;
  if (given(sub, "--dump-weights")) cfg.dump_weights = f.dump_weights;
  if (given(sub, "--corrupt")) {
    if (f.corrupt == "none") {
      cfg.eval_corruption.reset();
    } else {
      cfg.eval_corruption = CorruptionSpec{f.corrupt_modality, parse_corruption_kind(f.corrupt), f.severity};
    }
  } else if (given(sub, "--modality") || given(sub, "--severity")) {
    if (!cfg.eval_corruption) throw ConfigError("--modality/--severity need --corrupt or eval.corruption in the config");
    if (given(sub, "--modality")) cfg.eval_corruption->modality = f.corrupt_modality;
    if (given(sub, "--severity")) cfg.eval_corruption->severity = f.severity;
  }
  cfg.validate();
  return cfg;
}

/// `<root>/<command>-<run id>`, with -2, -3, ... appended if that already exists.
fs::path fresh_run_dir(const RunConfig& cfg, const std::string& command) {
  const fs::path base = fs::path(cfg.output_dir) / (command + "-" + run_id(command, cfg));
  fs::path dir = base;
  for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

/// Shared state for one invocation; sections are added by the pipeline steps.
class Run {
 public:
  Run(std::string command, RunConfig cfg, std::ostream& out)
      : command_(std::move(command)),
        cfg_(std::move(cfg)),
        out_(out),
        report_(report_skeleton(command_, cfg_)),
        dir_(fresh_run_dir(cfg_, command_)),
        start_(std::chrono::steady_clock::now()) {}

  const RunConfig& cfg() const { return cfg_; }
  const fs::path& dir() const { return dir_; }
  std::ostream& out() { return out_; }
  Json& results() { return report_["results"]; }

  const Dataset& data() {
    if (!data_) data_ = generate_dataset(cfg_.data);
    return *data_;
  }

  /// Trains (or reuses) a model in the given mode. With `log_files` the
  /// checkpoint and per-step log are written next to the report.
  const TrainState& model(FusionMode mode, bool log_files) {
    auto& slot = mode == FusionMode::DMS ? dms_ : static_;
    if (slot) return *slot;
    TrainConfig tc = cfg_.train;
    tc.mode = mode;
    if (log_files) {
      std::ofstream log = open_csv(dir_ / "train_log.csv");
      write_train_log_header(log);
      slot = train(data().train, cfg_.data.n_classes, tc,
                   [&log](std::size_t step, const LossBreakdown& l) { write_train_log_row(log, step, l); });
      write_text(dir_ / "checkpoint.json", checkpoint_json(*slot).dump(2) + "\n");
    } else {
      slot = train(data().train, cfg_.data.n_classes, tc);
    }
    return *slot;
  }

  void adopt(TrainState state) {
    auto& slot = state.mode == FusionMode::DMS ? dms_ : static_;
    slot = std::move(state);
  }

  /// Writes the report and the timing sidecar. Wall-clock time lives outside
  /// the report so that reruns produce byte-identical reports.
  void finish() {
    write_text(dir_ / "report.json", report_.dump(2) + "\n");
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(dir_ / "timing.json", Json{{"wall_clock_seconds", seconds}}.dump(2) + "\n");
    out_ << "run " << report_["run_id"].get<std::string>() << " written to " << dir_.string() << "\n";
  }

 private:
  std::string command_;
  RunConfig cfg_;
  std::ostream& out_;
  Json report_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  std::optional<Dataset> data_;
  std::optional<TrainState> dms_, static_;
};

void step_gen_data(Run& run) {
  const Dataset& d = run.data();
  std::ofstream train_csv = open_csv(run.dir() / "train.csv");
  write_csv(train_csv, d.train);
  std::ofstream test_csv = open_csv(run.dir() / "test.csv");
  write_csv(test_csv, d.test);
  const double oracle = nearest_centroid_accuracy(d.train, d.test, run.cfg().data.n_classes);
  run.results()["data"] = {{"train_samples", d.train.size()},
                           {"test_samples", d.test.size()},
                           {"train_file", "train.csv"},
                           {"test_file", "test.csv"},
                           {"nearest_centroid_accuracy", oracle}};
  run.out() << "data: " << d.train.size() << " train / " << d.test.size()
            << " test samples, nearest-centroid accuracy " << oracle << "\n";
}

void step_train(Run& run) {
  const TrainState& s = run.model(run.cfg().train.mode, true);
  Json history = Json::array();
  for (const LossBreakdown& l : s.history) history.push_back(to_json(l));
  run.results()["train"] = {{"mode", to_string(s.mode)},
                            {"epochs", s.epoch},
                            {"checkpoint", "checkpoint.json"},
                            {"train_log", "train_log.csv"},
                            {"history", history}};
  run.out() << "train: " << to_string(s.mode) << ", " << s.epoch << " epochs, final task loss "
            << s.history.back().task << "\n";
}

void step_eval(Run& run, const std::string& checkpoint) {
  if (!checkpoint.empty()) {
    std::ifstream in(checkpoint);
    if (!in) throw ConfigError("cannot open checkpoint '" + checkpoint + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    run.adopt(state_from_checkpoint(parse_json(ss.str(), checkpoint)));
  }
  const TrainState& s = run.model(run.cfg().train.mode, false);
  const Batch& test = run.data().test;
  TrainConfig tc = run.cfg().train;
  tc.mode = s.mode;
  const EvalReport r = evaluate(s, test, run.cfg().eval_corruption, tc, RngStream(run.cfg().seed, "eval"));
  Json section = to_json(r);
  section["mode"] = to_string(s.mode);
  if (run.cfg().dump_weights) {
    std::ofstream w = open_csv(run.dir() / "weights.csv");
    write_weights_csv(w, r, test);
    section["weights_file"] = "weights.csv";
  }
  run.results()["eval"] = section;
  run.out() << "eval: accuracy " << r.accuracy << " (clean " << r.clean_accuracy << ", degradation "
            << r.degradation << "%)\n";
}

void step_sweep(Run& run) {
  const TrainState& dms = run.model(FusionMode::DMS, false);
  const TrainState& stat = run.model(FusionMode::StaticUniform, false);
  const auto grid = run.cfg().sweep.specs();
  const SweepTable t =
      robustness_sweep(dms, stat, run.data().test, grid, run.cfg().train, RngStream(run.cfg().seed, "sweep"));
  std::ofstream csv = open_csv(run.dir() / "sweep.csv");
  write_sweep_csv(csv, t);
  Json section = to_json(t);
  section["table_file"] = "sweep.csv";
  run.results()["sweep"] = section;
  for (CorruptionKind kind : {CorruptionKind::Gaussian, CorruptionKind::Mask}) {
    run.out() << "sweep " << to_string(kind) << ": mean degradation dms "
              << t.mean_degradation("dms", kind) << "% vs static " << t.mean_degradation("static", kind)
              << "%\n";
  }
}

void step_ablate(Run& run) {
  const AblationTable t = ablation_run(run.cfg().train, run.data(), run.cfg().data.n_classes,
                                       run.cfg().ablation, RngStream(run.cfg().seed, "ablation"));
  std::ofstream csv = open_csv(run.dir() / "ablation.csv");
  write_ablation_csv(csv, t);
  Json section = to_json(t);
  section["table_file"] = "ablation.csv";
  run.results()["ablation"] = section;
  for (const AblationRow& r : t.rows) {
    run.out() << "ablation " << r.variant << ": accuracy " << r.report.accuracy << "\n";
  }
}

bool step_check(Run& run, bool print_json) {
  const CheckConfig& c = run.cfg().check;
  const RngStream rng(run.cfg().seed, "check");
  const ModalityRange range{c.min_modalities, c.max_modalities};
  const BoundCheckResult bound = check_fusion_approximation_bound(c.trials, range, c.dim, rng.derive(0));
  const DecompositionCheckResult decomp = check_mwcl_decomposition(c.trials, range, c.dim, rng.derive(1));
  const Json section = check_json(bound, decomp);
  run.results()["check"] = section;
  if (print_json) run.out() << section.dump(2) << "\n";
  return check_passed(bound, decomp);
}

const std::vector<std::pair<std::string, std::string>>& subcommands() {
  static const std::vector<std::pair<std::string, std::string>> list{
      {"gen-data", "generate the synthetic dataset and write train/test CSVs"},
      {"train", "train one model and write a checkpoint and per-step loss log"},
      {"eval", "evaluate a model (trained here or loaded with --checkpoint)"},
      {"sweep", "robustness sweep of DMS vs static uniform fusion"},
      {"ablate", "train and evaluate the scheduler ablation variants"},
      {"check", "randomized checks of the fusion bound and the MWCL decomposition"},
      {"all", "every step above in one run"}};
  return list;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic modality scheduling experiments", "dms"};
  app.require_subcommand(1, 1);
  Flags flags;
  for (const auto& [name, help] : subcommands()) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common_flags(*sub, flags);
    if (name == "eval" || name == "all") {
      sub->add_flag("--dump-weights", flags.dump_weights, "write per-sample weights and scores");
      sub->add_option("--corrupt", flags.corrupt, "evaluation corruption: gaussian | mask | drop | none");
      sub->add_option("--modality", flags.corrupt_modality, "modality index to corrupt");
      sub->add_option("--severity", flags.severity, "sigma or masked fraction");
    }
    if (name == "eval") sub->add_option("--checkpoint", flags.checkpoint, "checkpoint JSON to evaluate");
    if (name == "check" || name == "all") sub->add_option("--trials", flags.trials, "randomized trials");
  }

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  const std::string& first = args.front();
  const bool known = std::any_of(subcommands().begin(), subcommands().end(),
                                 [&](const auto& c) { return c.first == first; });
  if (!known && !first.starts_with("-")) {
    err << "error: unknown subcommand '" << first << "'\n\n" << app.help();
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  RunConfig cfg;
  try {
    cfg = resolve_config(*sub, flags);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    Run run(command, cfg, out);
    bool ok = true;
    if (command == "gen-data") step_gen_data(run);
    if (command == "train") step_train(run);
    if (command == "eval") step_eval(run, flags.checkpoint);
    if (command == "sweep") step_sweep(run);
    if (command == "ablate") step_ablate(run);
    if (command == "check") ok = step_check(run, true);
    if (command == "all") {
      step_gen_data(run);
      step_train(run);
      step_eval(run, "");
      step_sweep(run);
      step_ablate(run);
      ok = step_check(run, false);
    }
    run.finish();
    if (!ok) {
      err << "theory check reported violations\n";
      return kExitFailure;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dms
