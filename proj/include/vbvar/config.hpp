#pragma once

#include "vbvar/backtest.hpp"
#include "vbvar/io.hpp"
#include "vbvar/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vbvar {

struct DataConfig {
  std::string path;
  std::vector<std::string> returns;     // empty = all non-predictor columns
  std::vector<std::string> predictors;
  std::string size_path;                // needed for size weighting
};

struct RunConfig {
  std::string command = "simulate";  // fit | simulate | backtest | predict
  DataConfig data;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  int verbosity = 1;
  bool write_timing = false;
  ModelSpec model;
  std::vector<EstimatorSpec> estimators;  // simulate / backtest; empty = one built from model
  ScenarioSpec scenario;
  BacktestSpec backtest;
  int predict_holdout = 1;

  std::vector<EstimatorSpec> resolved_estimators() const;
};

// parse with unknown-key and type checking; problems are appended to errors
RunConfig parse_config(const json& j, std::vector<std::string>& errors);
// throws ValidationError with every problem listed
RunConfig load_config(const std::string& path);

std::vector<std::string> validate_config(const RunConfig& cfg);
std::vector<std::string> validate_config(const json& j);

json default_config_json();

}  // namespace vbvar
