#pragma once

#include "vbvar/backtest.hpp"
#include "vbvar/cavi.hpp"
#include "vbvar/posterior.hpp"
#include "vbvar/predict.hpp"
#include "vbvar/simulate.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace vbvar {

using json = nlohmann::ordered_json;

// %.17g, "nan"/"inf"/"-inf" for non-finite values
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);
double parse_double(const std::string& s);

// returns: column names of the d return series (empty = every non-predictor column);
// predictors: column names of the p predictors. The first column is the period label.
Dataset load_dataset(const std::string& path, const std::vector<std::string>& returns,
                     const std::vector<std::string>& predictors);
// T x d size panel with the same label column and the same return column names
Mat load_panel(const std::string& path, const std::vector<std::string>& columns, int T);

json to_json(const Mat& m);
json to_json(const Vec& v);
json to_json(const BoolMat& m);
Mat mat_from_json(const json& j);
Vec vec_from_json(const json& j);

json to_json(const ModelSpec& spec);
json fit_to_json(const FitResult& fit, const PosteriorSummary& post, const Dataset& ds);

// deterministic text with every float at 17 significant digits
std::string dump_json(const json& j, int indent = 2);
void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace vbvar
