#pragma once

#include <string>
#include <vector>

#include "microstab/continuation.hpp"

namespace microstab {

/// CSV with 17-significant-digit values; columns.size() must match each row.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

void write_surface_csv(const std::string& path, const SweepResult& sweep);
void write_history_csv(const std::string& path,
                       const std::vector<StepRecord>& history);
void write_mode_csv(const std::string& path, const RveMesh& mesh,
                    const VecX& mode);

/// Human-readable run summary plus a machine-readable echo of the inputs.
struct RunSummary {
  std::string tool;
  std::string analysis;
  std::string config_echo;  // serialized configuration
  MacroState macro;
  const BifurcationReport* report = nullptr;  // optional
  double wall_seconds = 0;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> extra;
};

void write_run_summary(const std::string& path, const RunSummary& s);

/// Fixed-point table form (4 decimals), matching printed result tables.
std::string format_table(double v);

}  // namespace microstab
