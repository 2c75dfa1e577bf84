#include "vbvar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vbvar {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw ValidationError("empty numeric field");
  const char* first = s.data() + b;
  const char* last = s.data() + e + 1;
  if (*first == '+') ++first;
  double v = 0.0;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ValidationError("cannot parse number '" + s + "'");
  return v;
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("csv: unterminated quote");
  out.push_back(cur);
  return out;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_line(line);
    if (first) {
      t.header = std::move(f);
      first = false;
      continue;
    }
    if (f.size() != t.header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(f.size()));
    t.rows.push_back(std::move(f));
  }
  if (first) throw ValidationError("csv has no header row: " + path);
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ostringstream o;
  auto emit = [&](const std::vector<std::string>& r) {
    for (size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << quote(r[i]);
    o << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  write_text(path, o.str());
}

namespace {

Mat columns_of(const CsvTable& t, const std::vector<int>& cols, const std::string& path) {
  Mat m(t.rows.size(), cols.size());
  for (size_t r = 0; r < t.rows.size(); ++r)
    for (size_t c = 0; c < cols.size(); ++c) {
      const std::string& s = t.rows[r][cols[c]];
      try {
        m(r, c) = parse_double(s);
      } catch (const ValidationError&) {
        throw ValidationError(path + ": row " + std::to_string(r + 2) + ", column '" +
                              t.header[cols[c]] + "': not a number ('" + s + "')");
      }
    }
  return m;
}

std::vector<int> lookup(const CsvTable& t, const std::vector<std::string>& names,
                        const std::string& path) {
  std::vector<int> out;
  for (const auto& n : names) {
    int c = t.column(n);
    if (c < 0) throw ValidationError(path + ": no column named '" + n + "'");
    if (c == 0) throw ValidationError(path + ": column '" + n + "' is the period label");
    out.push_back(c);
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& path, const std::vector<std::string>& returns,
                     const std::vector<std::string>& predictors) {
  CsvTable t = read_csv(path);
  if (t.header.size() < 2) throw ValidationError(path + ": need a label column and data columns");
  std::vector<int> xc = lookup(t, predictors, path);
  std::vector<int> yc;
  if (returns.empty()) {
    for (int c = 1; c < static_cast<int>(t.header.size()); ++c)
      if (std::find(xc.begin(), xc.end(), c) == xc.end()) yc.push_back(c);
  } else {
    yc = lookup(t, returns, path);
  }
  for (int c : yc)
    if (std::find(xc.begin(), xc.end(), c) != xc.end())
      throw ValidationError(path + ": column '" + t.header[c] + "' is both a return and a predictor");
  Dataset ds;
  ds.y = columns_of(t, yc, path);
  ds.x = xc.empty() ? Mat(ds.y.rows(), 0) : columns_of(t, xc, path);
  for (int c : yc) ds.y_labels.push_back(t.header[c]);
  for (int c : xc) ds.x_labels.push_back(t.header[c]);
  for (const auto& r : t.rows) ds.time_index.push_back(r[0]);
  ds.validate();
  return ds;
}

Mat load_panel(const std::string& path, const std::vector<std::string>& columns, int T) {
  CsvTable t = read_csv(path);
  Mat m = columns_of(t, lookup(t, columns, path), path);
  if (m.rows() != T)
    throw ValidationError(path + ": expected " + std::to_string(T) + " rows, got " +
                          std::to_string(m.rows()));
  if (!m.allFinite()) throw ValidationError(path + ": missing or non-finite values");
  return m;
}

json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    a.push_back(std::move(r));
  }
  return a;
}

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const BoolMat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k) ? 1 : 0);
    a.push_back(std::move(r));
  }
  return a;
}

Mat mat_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected a matrix (array of rows)");
  if (j.empty()) return Mat();
  const size_t c = j[0].size();
  Mat m(j.size(), c);
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != c) throw ValidationError("ragged matrix");
    for (size_t k = 0; k < c; ++k) {
      if (!j[i][k].is_number()) throw ValidationError("matrix entries must be numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected a vector");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError("vector entries must be numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

json to_json(const ModelSpec& s) {
  json j;
  j["prior"] = to_string(s.prior);
  j["parametrization"] = to_string(s.parametrization);
  j["factorization"] = to_string(s.factorization);
  j["predictive"] = to_string(s.predictive);
  j["n_draws"] = s.n_draws;
  j["max_joint_dim"] = s.max_joint_dim;
  j["hyper"] = {{"a_nu", s.hyper.a_nu},   {"b_nu", s.hyper.b_nu}, {"tau", s.hyper.tau},
                {"upsilon", s.hyper.upsilon0}, {"h1", s.hyper.h1}, {"h2", s.hyper.h2},
                {"h3", s.hyper.h3}};
  j["convergence"] = {{"max_iter", s.convergence.max_iter},
                      {"tol_elbo", s.convergence.tol_elbo},
                      {"tol_param", s.convergence.tol_param}};
  return j;
}

json fit_to_json(const FitResult& f, const PosteriorSummary& post, const Dataset& ds) {
  const auto& st = f.state;
  json j;
  j["model"] = to_json(f.spec);
  j["returns"] = ds.y_labels;
  std::vector<std::string> reg{"intercept"};
  reg.insert(reg.end(), ds.x_labels.begin(), ds.x_labels.end());
  for (const auto& l : ds.y_labels) reg.push_back(l + "_lag");
  j["regressors"] = reg;
  j["T"] = st.T;
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["elbo_trace"] = st.elbo_trace;
  j["theta_mean"] = to_json(f.theta_hat);
  Mat var(st.d, st.q);
  for (int r = 0; r < st.d; ++r)
    for (int c = 0; c < st.q; ++c) var(r, c) = f.theta_cov(r * st.q + c, r * st.q + c);
  j["theta_var"] = to_json(var);
  j["theta_savs"] = to_json(post.savs.theta_sparse);
  j["savs_mask"] = to_json(post.savs.mask);
  if (f.a_hat.size() > 0) j["a_mean"] = to_json(f.a_hat);
  json beta = json::array();
  for (int r = 0; r < st.d; ++r) {
    json e;
    e["mean"] = to_json(st.beta_mu[r]);
    e["var"] = to_json(Vec(st.beta_cov[r].diagonal()));
    beta.push_back(std::move(e));
  }
  j["beta"] = beta;
  j["nu_shape"] = to_json(st.nu_a);
  j["nu_rate"] = to_json(st.nu_b);
  j["nu_mean"] = to_json(f.v_hat);
  j["omega_mean"] = to_json(f.mu_omega);
  j["e_log_det_omega"] = f.e_log_det_omega;
  j["wishart"] = {{"delta", post.wishart.delta_hat},
                  {"H", to_json(post.wishart.H_hat)},
                  {"at_boundary", post.wishart.at_boundary}};
  return j;
}

namespace {

void emit(std::ostringstream& o, const json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? "\n" + std::string(indent * (depth + 1), ' ') : "";
  const std::string close = indent > 0 ? "\n" + std::string(indent * depth, ' ') : "";
  const char* sep = indent > 0 ? ": " : ":";
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) { o << "{}"; return; }
      o << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        o << (first ? "" : ",") << pad << json(it.key()).dump() << sep;
        emit(o, it.value(), indent, depth + 1);
        first = false;
      }
      o << close << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) { o << "[]"; return; }
      // numeric rows stay on one line
      bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      o << '[';
      bool first = true;
      for (const auto& e : j) {
        o << (first ? "" : ",") << (flat ? (first || indent == 0 ? "" : " ") : pad);
        emit(o, e, indent, depth + 1);
        first = false;
      }
      o << (flat ? "" : close) << ']';
      return;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      o << (std::isfinite(v) ? format_double(v) : "null");
      return;
    }
    default:
      o << j.dump();
  }
}

}  // namespace

std::string dump_json(const json& j, int indent) {
  std::ostringstream o;
  emit(o, j, indent, 0);
  return o.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << text;
  if (!out) throw ValidationError("write failed: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, dump_json(j) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace vbvar
