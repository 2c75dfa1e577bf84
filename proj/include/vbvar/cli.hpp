#pragma once

#include "vbvar/config.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace vbvar {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

struct CliOptions {
  std::string command;      // empty = take it from the config
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

int run(const CliOptions& opts);
int run(const std::string& config_path);

// command bodies; they throw ValidationError / NumericalFault
void run_fit(const RunConfig& cfg);
void run_simulate(const RunConfig& cfg);
void run_backtest(const RunConfig& cfg);
void run_predict(const RunConfig& cfg);

}  // namespace vbvar
