#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dms/config.hpp"
#include "dms/theory_checks.hpp"
#include "dms/trainer.hpp"

namespace dms {

inline constexpr int kReportSchema = 1;

Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& where);

/// Full model state. Doubles are written in shortest round-trip form, so the
/// same state always serializes to the same bytes and reloads exactly.
Json checkpoint_json(const TrainState& state);
TrainState state_from_checkpoint(const Json& j);

Json to_json(const LossBreakdown& loss);
/// Summary of an evaluation; per-sample detail goes to the weights CSV instead.
Json to_json(const EvalReport& report);
Json to_json(const SweepTable& table);
Json to_json(const AblationTable& table);
Json to_json(const BoundCheckResult& result);
Json check_json(const BoundCheckResult& bound, const DecompositionCheckResult& decomposition);
/// True when both theory checks report zero violations.
bool check_passed(const BoundCheckResult& bound, const DecompositionCheckResult& decomposition);

/// 16 hex digits of FNV-1a over the command name and the canonical config JSON.
std::string run_id(const std::string& command, const RunConfig& cfg);

/// Skeleton report: schema, command, run id and config echo. Sections are added by the caller.
Json report_skeleton(const std::string& command, const RunConfig& cfg);
/// Recovers the effective configuration from a written report.
RunConfig config_from_report(const Json& report);

std::string format_double(double v);

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, std::size_t step, const LossBreakdown& loss);
void write_sweep_csv(std::ostream& out, const SweepTable& table);
void write_ablation_csv(std::ostream& out, const AblationTable& table);
/// One row per sample: id, label, prediction, then weight and the three scores per modality.
void write_weights_csv(std::ostream& out, const EvalReport& report, const Batch& data);

}  // namespace dms
