#include "dms/report.hpp"

#include <charconv>
#include <cstdio>
#include <ostream>

#include "dms/errors.hpp"
#include "dms/rng.hpp"

namespace dms {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json to_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const Json& j, const std::string& where) {
  try {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw ConfigError(where + ": data length does not match shape");
    return Matrix(rows, cols, std::move(data));
  } catch (const Json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json scores_json(const ModalityScore& s) {
  return Json{{"confidence", s.confidence}, {"uncertainty", s.uncertainty}, {"alignment", s.alignment}};
}

}  // namespace

Json checkpoint_json(const TrainState& state) {
  Json encoders = Json::array();
  for (const EncoderParams& p : state.encoders) {
    encoders.push_back({{"modality", p.modality},
                        {"dropout", p.dropout},
                        {"w1", to_json(p.w1)},
                        {"b1", to_json(p.b1)},
                        {"w2", to_json(p.w2)},
                        {"b2", to_json(p.b2)},
                        {"head_w", to_json(p.head_w)},
                        {"head_b", to_json(p.head_b)}});
  }
  Json history = Json::array();
  for (const LossBreakdown& l : state.history) history.push_back(to_json(l));
  return Json{{"schema", kReportSchema},
              {"mode", to_string(state.mode)},
              {"epoch", state.epoch},
              {"data_hash", hex64(state.data_hash)},
              {"encoders", encoders},
              {"head", {{"w", to_json(state.head.w)}, {"b", to_json(state.head.b)}}},
              {"history", history}};
}

TrainState state_from_checkpoint(const Json& j) {
  TrainState s;
  try {
    if (j.at("schema").get<int>() != kReportSchema) throw ConfigError("checkpoint: unsupported schema");
    s.mode = parse_fusion_mode(j.at("mode").get<std::string>());
    s.epoch = j.at("epoch").get<std::size_t>();
    s.data_hash = std::stoull(j.at("data_hash").get<std::string>(), nullptr, 16);
    for (const Json& e : j.at("encoders")) {
      EncoderParams p;
      p.modality = e.at("modality").get<std::size_t>();
      p.dropout = e.at("dropout").get<double>();
      p.w1 = matrix_from_json(e.at("w1"), "checkpoint.w1");
      p.b1 = matrix_from_json(e.at("b1"), "checkpoint.b1");
      p.w2 = matrix_from_json(e.at("w2"), "checkpoint.w2");
      p.b2 = matrix_from_json(e.at("b2"), "checkpoint.b2");
      p.head_w = matrix_from_json(e.at("head_w"), "checkpoint.head_w");
      p.head_b = matrix_from_json(e.at("head_b"), "checkpoint.head_b");
      s.encoders.push_back(std::move(p));
    }
    s.head.w = matrix_from_json(j.at("head").at("w"), "checkpoint.head.w");
    s.head.b = matrix_from_json(j.at("head").at("b"), "checkpoint.head.b");
    for (const Json& h : j.at("history")) {
      s.history.push_back({h.at("task").get<double>(), h.at("mwcl").get<double>(),
                           h.at("total").get<double>(), h.at("lambda").get<double>()});
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  return s;
}

Json to_json(const LossBreakdown& loss) {
  return Json{{"task", loss.task}, {"mwcl", loss.mwcl}, {"total", loss.total}, {"lambda", loss.lambda}};
}

Json to_json(const EvalReport& r) {
  Json scores = Json::array();
  for (const ModalityScore& s : r.mean_scores) scores.push_back(scores_json(s));
  return Json{{"samples", r.samples},
              {"accuracy", r.accuracy},
              {"clean_accuracy", r.clean_accuracy},
              {"degradation_pct", r.degradation},
              {"mean_weights", r.mean_weights},
              {"mean_scores", scores},
              {"loss", to_json(r.loss)},
              {"corruption", r.corruption ? to_json(*r.corruption) : Json()}};
}

Json to_json(const SweepTable& t) {
  Json rows = Json::array();
  for (const SweepRow& r : t.rows) rows.push_back({{"model", r.model}, {"report", to_json(r.report)}});
  Json deltas = Json::array();
  for (const PairedDelta& d : t.deltas) {
    deltas.push_back({{"corruption", to_json(d.spec)},
                      {"dms_degradation_pct", d.dms_degradation},
                      {"static_degradation_pct", d.static_degradation},
                      {"delta_pct", d.delta}});
  }
  Json means = Json::object();
  for (CorruptionKind kind : {CorruptionKind::Gaussian, CorruptionKind::Mask}) {
    means[to_string(kind)] = {{"dms_pct", t.mean_degradation("dms", kind)},
                              {"static_pct", t.mean_degradation("static", kind)}};
  }
  return Json{{"rows", rows}, {"deltas", deltas}, {"mean_degradation", means}};
}

Json to_json(const AblationTable& t) {
  Json rows = Json::array();
  for (const AblationRow& r : t.rows) {
    rows.push_back({{"variant", r.variant},
                    {"alpha", r.scheduler.alpha},
                    {"beta", r.scheduler.beta},
                    {"gamma", r.scheduler.gamma},
                    {"report", to_json(r.report)}});
  }
  return Json{{"corruption", to_json(t.corruption)}, {"rows", rows}};
}

Json to_json(const BoundCheckResult& r) {
  return Json{{"trials", r.trials},
              {"violations", r.violations},
              {"max_slack", r.max_slack},
              {"tolerance", r.tolerance}};
}

Json check_json(const BoundCheckResult& bound, const DecompositionCheckResult& d) {
  return Json{
      {"fusion_approximation_bound", to_json(bound)},
      {"mwcl_decomposition",
       {{"at_weighted_mean", to_json(d.at_mean)},
        {"off_weighted_mean", to_json(d.off_mean)},
        {"minus_sign_discrepancy",
         {{"max_residual", d.minus_form_max_residual},
          {"note",
           "the decomposition with -||h - mean||^2 does not hold; the correct sign is +, and the "
           "residual equals 2||h - mean||^2"}}}}},
      {"violations", bound.violations + d.at_mean.violations + d.off_mean.violations},
      {"passed", check_passed(bound, d)}};
}

bool check_passed(const BoundCheckResult& bound, const DecompositionCheckResult& d) {
  return bound.violations == 0 && d.at_mean.violations == 0 && d.off_mean.violations == 0;
}

std::string run_id(const std::string& command, const RunConfig& cfg) {
  return hex64(fnv1a64(command + "\n" + to_json(cfg).dump()));
}

Json report_skeleton(const std::string& command, const RunConfig& cfg) {
  return Json{{"schema", kReportSchema},
              {"command", command},
              {"run_id", run_id(command, cfg)},
              {"config", to_json(cfg)},
              {"units", {{"accuracy", "fraction"}, {"degradation_pct", "percent"}}},
              {"results", Json::object()}};
}

RunConfig config_from_report(const Json& report) {
  if (!report.contains("schema") || report["schema"] != kReportSchema) {
    throw ConfigError("report: missing or unsupported schema");
  }
  return config_from_json(report.at("config"));
}

void write_train_log_header(std::ostream& out) { out << "step,task,mwcl,total\n"; }

void write_train_log_row(std::ostream& out, std::size_t step, const LossBreakdown& loss) {
  out << step << ',' << format_double(loss.task) << ',' << format_double(loss.mwcl) << ','
      << format_double(loss.total) << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  const std::size_t modalities = table.rows.empty() ? 0 : table.rows.front().report.mean_weights.size();
  out << "model,kind,modality,severity,accuracy,clean_accuracy,degradation_pct";
  for (std::size_t m = 0; m < modalities; ++m) out << ",mean_w" << m;
  out << '\n';
  for (const SweepRow& r : table.rows) {
    const auto& c = r.report.corruption;
    out << r.model << ',' << (c ? to_string(c->kind) : "none") << ','
        << (c ? std::to_string(c->modality) : "") << ',' << (c ? format_double(c->severity) : "")
        << ',' << format_double(r.report.accuracy) << ',' << format_double(r.report.clean_accuracy)
        << ',' << format_double(r.report.degradation);
    for (double w : r.report.mean_weights) out << ',' << format_double(w);
    out << '\n';
  }
}

void write_ablation_csv(std::ostream& out, const AblationTable& table) {
  out << "variant,alpha,beta,gamma,accuracy,clean_accuracy,degradation_pct\n";
  for (const AblationRow& r : table.rows) {
    out << r.variant << ',' << format_double(r.scheduler.alpha) << ','
        << format_double(r.scheduler.beta) << ',' << format_double(r.scheduler.gamma) << ','
        << format_double(r.report.accuracy) << ',' << format_double(r.report.clean_accuracy) << ','
        << format_double(r.report.degradation) << '\n';
  }
}

void write_weights_csv(std::ostream& out, const EvalReport& report, const Batch& data) {
  const std::size_t modalities = report.weights.cols();
  out << "id,label,prediction";
  for (std::size_t m = 0; m < modalities; ++m) {
    out << ",w" << m << ",confidence" << m << ",uncertainty" << m << ",alignment" << m;
  }
  out << '\n';
  for (std::size_t i = 0; i < report.weights.rows(); ++i) {
    out << data.ids[i] << ',' << data.labels[i] << ',' << report.predictions[i];
    for (std::size_t m = 0; m < modalities; ++m) {
      const ModalityScore& s = report.scores.at(i, m);
      out << ',' << format_double(report.weights(i, m)) << ',' << format_double(s.confidence) << ','
          << format_double(s.uncertainty) << ',' << format_double(s.alignment);
    }
    out << '\n';
  }
}

}  // namespace dms
