#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fbgate/config.hpp"

namespace fbgate {

struct JobOutcome {
  std::vector<std::filesystem::path> files;
  std::string summary;  // one line for the terminal
};

/// Runs the configured job and writes its payload files plus a run.log sidecar into out_dir.
/// Payload files depend only on the config and seed; timestamps go to run.log.
JobOutcome run_job(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Reads a pulse.json replay record.
PulseSpec load_pulse_record(const std::filesystem::path& path, double* recorded_fidelity = nullptr);

/// Fixed-format decimal with 17 significant digits.
std::string format_double(double v);

}  // namespace fbgate
