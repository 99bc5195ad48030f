#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbgate/crab.hpp"
#include "fbgate/dynamics.hpp"
#include "fbgate/feshbach.hpp"
#include "fbgate/spbasis.hpp"

namespace fbgate {

enum class Job { Spectrum, Gate, Optimize };

const char* job_name(Job job);

/// Fully resolved run description; every physical quantity is already in oscillator units.
struct RunConfig {
  Job job = Job::Gate;
  std::uint64_t seed = 0;
  TrapConfig trap;
  FeshbachConfig feshbach;
  std::optional<double> B;
  std::vector<double> B_grid;
  LevelWindow window;
  GateSettings gate;
  PulseSpec pulse;
  std::string replay_path;  // pulse.json to replay in a gate job
  CrabOptions optimizer;
  int sample_stride = 100;
  std::string canonical;    // canonical JSON of the input, used for the config hash
};

/// Parses JSON text. Unknown keys, missing required keys and invalid values are collected and
/// thrown together as one ConfigError.
RunConfig parse_config(const std::string& text);

/// FNV-1a 64-bit hash of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fbgate
