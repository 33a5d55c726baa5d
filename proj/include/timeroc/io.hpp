#pragma once

// Data ingestion, declarative model specs and output serialisation.

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/roc.hpp"
#include "timeroc/simulation.hpp"

namespace timeroc {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Numbers and CSV cells

/// Shortest representation that reads back to the same double; NaN is
/// written as NA.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
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
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

inline bool parse_number(std::string_view s, double& v) {
  s = trim(s);
  if (s == "Inf" || s == "inf") return v = std::numeric_limits<double>::infinity(), true;
  if (s == "-Inf" || s == "-inf") return v = -std::numeric_limits<double>::infinity(), true;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Survival data tables

/// Reads a header-led CSV with columns z, delta, y and any further numeric
/// covariate columns. Rows are numbered from 1 (the header is row 0).
inline SurvivalData read_survival_csv(std::istream& in, const std::string& source = "input") {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!detail::trim(line).empty()) {
      header = detail::split_csv(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::schema_error, source + ": missing header");
  auto find = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k].empty()) throw Error(ErrorCode::schema_error, source + ": empty column name " + std::to_string(k + 1));
    if (std::find(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(k), header[k]) !=
        header.begin() + static_cast<std::ptrdiff_t>(k))
      throw Error(ErrorCode::schema_error, source + ": duplicate column '" + header[k] + "'");
  }
  for (const char* required : {"z", "delta", "y"})
    if (find(required) < 0) throw Error(ErrorCode::schema_error, source + ": missing column '" + required + "'");
  for (const std::string& h : header)
    if (h == kTimeVariable) throw Error(ErrorCode::schema_error, source + ": column name 't' is reserved for time");

  std::vector<std::vector<double>> cols(header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::parse_error, source + ": row " + std::to_string(row) + " has " +
                                              std::to_string(cells.size()) + " cells, expected " +
                                              std::to_string(header.size()));
    for (std::size_t k = 0; k < cells.size(); ++k) {
      double v = 0.0;
      if (!detail::parse_number(cells[k], v))
        throw Error(ErrorCode::parse_error, source + ": row " + std::to_string(row) + ", column " +
                                                std::to_string(k + 1) + " ('" + header[k] + "'): '" + cells[k] +
                                                "' is not a number");
      cols[k].push_back(v);
    }
  }
  if (row == 0) throw Error(ErrorCode::validation_error, source + ": no data rows");

  auto to_vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval(); };
  SurvivalData d;
  d.z = to_vec(cols[static_cast<std::size_t>(find("z"))]);
  d.delta = to_vec(cols[static_cast<std::size_t>(find("delta"))]);
  d.marker = to_vec(cols[static_cast<std::size_t>(find("y"))]);
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] != "z" && header[k] != "delta" && header[k] != "y") d.covariates[header[k]] = to_vec(cols[k]);

  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const std::string where = source + ": row " + std::to_string(i + 1) + ": ";
    if (!(d.z(i) > 0) || !std::isfinite(d.z(i)))
      throw Error(ErrorCode::validation_error, where + "z must be positive and finite");
    if (d.delta(i) != 0.0 && d.delta(i) != 1.0)
      throw Error(ErrorCode::validation_error, where + "delta must be 0 or 1, got " + format_double(d.delta(i)));
    if (!std::isfinite(d.marker(i))) throw Error(ErrorCode::validation_error, where + "y must be finite");
    for (const auto& [name, col] : d.covariates)
      if (!std::isfinite(col(i))) throw Error(ErrorCode::validation_error, where + name + " must be finite");
  }
  return d;
}

inline SurvivalData read_survival_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::schema_error, "cannot open '" + path + "'");
  return read_survival_csv(in, path);
}

inline void write_survival_csv(std::ostream& out, const SurvivalData& d) {
  out << "z,delta,y";
  for (const auto& [name, col] : d.covariates) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << format_double(d.z(i)) << ',' << format_double(d.delta(i)) << ',' << format_double(d.marker(i));
    for (const auto& [name, col] : d.covariates) out << ',' << format_double(col(i));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Model specs as JSON
//
// A term is {"kind": ..., "variables": [...], "J": 8, "penalty_order": 2}.
// Kinds: linear, smooth1d, smooth2d (with optional "interaction": true for
// margin-constrained products), varying_by_time (["u", "t"]: u * s(t)) and
// varying_by_var (["u", "v"]: u * s(v)).

inline TermSpec term_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_spec, "term must be an object");
  for (const auto& [key, value] : j.items())
    if (key != "kind" && key != "variables" && key != "J" && key != "penalty_order" && key != "degree" &&
        key != "knots" && key != "interaction" && key != "label")
      throw Error(ErrorCode::invalid_spec, "unknown term field '" + key + "'");
  TermSpec t;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    t.variables = j.at("variables").get<std::vector<std::string>>();
    if (kind == "linear") {
      t.kind = TermKind::linear;
    } else if (kind == "smooth1d") {
      t.kind = TermKind::smooth1d;
    } else if (kind == "smooth2d") {
      t.kind = TermKind::smooth2d;
    } else if (kind == "varying_by_time" || kind == "varying_by_var") {
      t.kind = TermKind::varying;
      if (t.variables.size() == 2 && (kind == "varying_by_time") != (t.variables[1] == kTimeVariable))
        throw Error(ErrorCode::invalid_spec, kind == "varying_by_time"
                                                 ? "varying_by_time needs [\"u\", \"t\"]"
                                                 : "varying_by_var must not vary over time; use varying_by_time");
    } else {
      throw Error(ErrorCode::invalid_spec, "unknown term kind '" + kind + "'");
    }
    if (j.contains("J")) t.dimension = j.at("J").get<int>();
    if (j.contains("penalty_order")) t.penalty_order = j.at("penalty_order").get<int>();
    if (j.contains("degree")) t.degree = j.at("degree").get<int>();
    if (j.contains("interaction")) t.interaction_only = j.at("interaction").get<bool>();
    if (j.contains("label")) t.label = j.at("label").get<std::string>();
    if (j.contains("knots")) {
      const std::string k = j.at("knots").get<std::string>();
      if (k == "quantile")
        t.knot_rule = KnotRule::quantile;
      else if (k == "equidistant")
        t.knot_rule = KnotRule::equidistant;
      else
        throw Error(ErrorCode::invalid_spec, "unknown knot rule '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_spec, std::string("malformed term: ") + e.what());
  }
  if (t.interaction_only && t.kind != TermKind::smooth2d)
    throw Error(ErrorCode::invalid_spec, "'interaction' applies to smooth2d terms only");
  return t;
}

inline Json to_json(const TermSpec& t) {
  Json j;
  switch (t.kind) {
    case TermKind::linear: j["kind"] = "linear"; break;
    case TermKind::smooth1d: j["kind"] = "smooth1d"; break;
    case TermKind::smooth2d: j["kind"] = "smooth2d"; break;
    case TermKind::varying:
      j["kind"] = t.variables.size() == 2 && t.variables[1] == kTimeVariable ? "varying_by_time" : "varying_by_var";
      break;
  }
  j["variables"] = t.variables;
  if (t.kind != TermKind::linear) {
    j["J"] = t.dimension;
    j["penalty_order"] = t.penalty_order;
    j["degree"] = t.degree;
    if (t.knot_rule) j["knots"] = *t.knot_rule == KnotRule::quantile ? "quantile" : "equidistant";
  }
  if (t.kind == TermKind::smooth2d) j["interaction"] = t.interaction_only;
  if (!t.label.empty()) j["label"] = t.label;
  return j;
}

/// Either {"intercept": bool, "terms": [...]} or a bare term array.
inline ModelSpec model_from_json(const Json& j) {
  ModelSpec m;
  const Json* terms = &j;
  if (j.is_object()) {
    for (const auto& [key, value] : j.items())
      if (key != "intercept" && key != "terms") throw Error(ErrorCode::invalid_spec, "unknown model field '" + key + "'");
    if (j.contains("intercept")) {
      if (!j["intercept"].is_boolean()) throw Error(ErrorCode::invalid_spec, "'intercept' must be a boolean");
      m.intercept = j["intercept"].get<bool>();
    }
    if (!j.contains("terms")) throw Error(ErrorCode::invalid_spec, "model needs a 'terms' array");
    terms = &j["terms"];
  }
  if (!terms->is_array()) throw Error(ErrorCode::invalid_spec, "'terms' must be an array");
  for (const Json& t : *terms) m.terms.push_back(term_from_json(t));
  return m;
}

inline Json to_json(const ModelSpec& m) {
  Json j;
  j["intercept"] = m.intercept;
  j["terms"] = Json::array();
  for (const TermSpec& t : m.terms) j["terms"].push_back(to_json(t));
  return j;
}

/// Hazard model candidates (more than one only for AIC comparison) and the
/// two marker models.
struct SpecFile {
  std::vector<ModelSpec> hazard;
  LocationScaleSpec marker;
};

inline SpecFile spec_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_spec, "spec must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "hazard" && key != "marker") throw Error(ErrorCode::invalid_spec, "unknown spec field '" + key + "'");
  if (!j.contains("hazard") || !j.contains("marker"))
    throw Error(ErrorCode::invalid_spec, "spec needs 'hazard' and 'marker'");
  SpecFile s;
  const Json& h = j["hazard"];
  // an array of objects or of arrays lists candidates; an array of terms is one model
  const bool candidates = h.is_array() && !h.empty() && (h[0].is_array() || h[0].contains("terms"));
  if (candidates)
    for (const Json& c : h) s.hazard.push_back(model_from_json(c));
  else
    s.hazard.push_back(model_from_json(h));
  const Json& m = j["marker"];
  if (!m.is_object() || !m.contains("mean") || !m.contains("logsq"))
    throw Error(ErrorCode::invalid_spec, "'marker' needs 'mean' and 'logsq' models");
  s.marker.mean = model_from_json(m["mean"]);
  s.marker.logsq = model_from_json(m["logsq"]);
  return s;
}

inline Json to_json(const SpecFile& s) {
  Json j;
  if (s.hazard.size() == 1) {
    j["hazard"] = to_json(s.hazard[0]);
  } else {
    j["hazard"] = Json::array();
    for (const ModelSpec& m : s.hazard) j["hazard"].push_back(to_json(m));
  }
  j["marker"]["mean"] = to_json(s.marker.mean);
  j["marker"]["logsq"] = to_json(s.marker.logsq);
  return j;
}

inline SpecFile read_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_spec, "cannot open spec '" + path + "'");
  try {
    return spec_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_spec, path + ": " + e.what());
  }
}

/// Main effects of time, marker and covariates plus all pairwise
/// interactions for the hazard (J = 8); covariate smooths with J = 13 for the
/// marker mean and log-variance. With a single covariate x this is the
/// simulation model.
inline SpecFile default_spec(const std::vector<std::string>& covariates) {
  auto smooth = [](const std::string& v, int J) {
    TermSpec t;
    t.kind = TermKind::smooth1d;
    t.variables = {v};
    t.dimension = J;
    return t;
  };
  auto inter = [](const std::string& a, const std::string& b) {
    TermSpec t;
    t.kind = TermKind::smooth2d;
    t.variables = {a, b};
    t.dimension = 8;
    t.interaction_only = true;
    return t;
  };
  SpecFile s;
  ModelSpec h;
  h.terms.push_back(smooth(kTimeVariable, 8));
  for (const std::string& c : covariates) h.terms.push_back(smooth(c, 8));
  h.terms.push_back(smooth(kMarkerVariable, 8));
  for (const std::string& c : covariates) h.terms.push_back(inter(c, kTimeVariable));
  h.terms.push_back(inter(kMarkerVariable, kTimeVariable));
  for (const std::string& c : covariates) h.terms.push_back(inter(c, kMarkerVariable));
  for (std::size_t a = 0; a < covariates.size(); ++a)
    for (std::size_t b = a + 1; b < covariates.size(); ++b) h.terms.push_back(inter(covariates[a], covariates[b]));
  s.hazard.push_back(h);
  for (const std::string& c : covariates) {
    s.marker.mean.terms.push_back(smooth(c, 13));
    s.marker.logsq.terms.push_back(smooth(c, 13));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Small option parsers

inline BreakRule parse_breaks(std::string_view s) {
  BreakRule r;
  if (s == "events") return r;
  if (s.rfind("equal:", 0) == 0) {
    double v = 0.0;
    if (detail::parse_number(s.substr(6), v) && v >= 1 && v == std::floor(v) && v <= 1e6) {
      r.kind = BreakRule::Kind::equal;
      r.intervals = static_cast<int>(v);
      return r;
    }
  }
  throw Error(ErrorCode::invalid_input, "breaks must be 'events' or 'equal:S', got '" + std::string(s) + "'");
}

inline std::string to_string(const BreakRule& r) {
  return r.kind == BreakRule::Kind::uncensored_times ? "events" : "equal:" + std::to_string(r.intervals);
}

/// Comma-separated numbers; an entry "a:b:n" expands to n equispaced values.
inline std::vector<double> parse_number_list(std::string_view s) {
  std::vector<double> out;
  for (const std::string& cell : detail::split_csv(s)) {
    if (cell.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(cell);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    double a = 0, b = 0, n = 0;
    if (parts.size() == 1 && detail::parse_number(parts[0], a) && std::isfinite(a)) {
      out.push_back(a);
    } else if (parts.size() == 3 && detail::parse_number(parts[0], a) && detail::parse_number(parts[1], b) &&
               detail::parse_number(parts[2], n) && n >= 2 && n == std::floor(n) && n <= 1e6) {
      const int m = static_cast<int>(n);
      for (int k = 0; k < m; ++k) out.push_back(a + (b - a) * k / (m - 1));
    } else {
      throw Error(ErrorCode::invalid_input, "cannot read '" + cell + "' as a number or a:b:n range");
    }
  }
  if (out.empty()) throw Error(ErrorCode::invalid_input, "empty number list");
  return out;
}

/// Covariate grid: "name=v,...;name2=v,..." (Cartesian product), or a bare
/// list when the data have exactly one covariate.
inline std::vector<CovariatePoint> parse_xgrid(std::string_view s, const std::vector<std::string>& covariates) {
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  std::stringstream ss{std::string(s)};
  for (std::string part; std::getline(ss, part, ';');) {
    if (detail::trim(part).empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) {
      if (covariates.size() != 1)
        throw Error(ErrorCode::invalid_input, "xgrid needs name=values when there is not exactly one covariate");
      axes.emplace_back(covariates[0], parse_number_list(part));
    } else {
      axes.emplace_back(std::string(detail::trim(part.substr(0, eq))), parse_number_list(part.substr(eq + 1)));
    }
  }
  for (const auto& [name, v] : axes)
    if (std::find(covariates.begin(), covariates.end(), name) == covariates.end())
      throw Error(ErrorCode::schema_error, "xgrid names unknown covariate '" + name + "'");
  for (const std::string& c : covariates)
    if (std::none_of(axes.begin(), axes.end(), [&](const auto& a) { return a.first == c; }))
      throw Error(ErrorCode::invalid_input, "xgrid gives no values for covariate '" + c + "'");
  std::vector<CovariatePoint> out{CovariatePoint{}};
  for (const auto& [name, values] : axes) {
    std::vector<CovariatePoint> next;
    for (const CovariatePoint& p : out)
      for (double v : values) {
        CovariatePoint q = p;
        q[name] = v;
        next.push_back(q);
      }
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline Json error_json(const std::exception& e) {
  Json j;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    const std::string what = err->what();
    const std::string code(to_string(err->code()));
    j["error"]["code"] = code;
    j["error"]["message"] = what.rfind(code + ": ", 0) == 0 ? what.substr(code.size() + 2) : what;
  } else {
    j["error"]["code"] = "internal-error";
    j["error"]["message"] = e.what();
  }
  return j;
}

inline Json to_json(const CovariatePoint& x) {
  Json j = Json::object();
  for (const auto& [name, v] : x) j[name] = v;
  return j;
}

/// Summary of a fitted penalised model: smoothing parameters, effective
/// degrees of freedom and coefficients per term.
inline Json model_summary(const FittedModel& m) {
  Json j;
  j["family"] = to_string(m.family);
  j["selection"] = to_string(m.selection);
  j["double_penalty"] = m.double_penalty;
  j["n"] = m.n;
  j["converged"] = m.converged;
  j["edf"] = m.edf;
  j["deviance"] = m.deviance;
  j["loglik"] = m.loglik;
  j["scale"] = m.scale;
  j["aic"] = m.aic;
  j["reml"] = m.reml;
  j["gcv"] = m.gcv;
  j["intercept"] = m.terms.intercept ? Json(m.coefficients(0)) : Json(nullptr);
  j["smoothing_parameters"] = Json::array();
  for (Eigen::Index k = 0; k < m.log_lambda.size(); ++k) {
    const PenaltyInfo& p = m.penalties.at(static_cast<std::size_t>(k));
    j["smoothing_parameters"].push_back(
        {{"term", m.terms.terms.at(p.term).label}, {"null_space", p.null_space}, {"log_lambda", m.log_lambda(k)}});
  }
  j["terms"] = Json::array();
  for (std::size_t k = 0; k < m.terms.terms.size(); ++k) {
    const Eigen::VectorXd c = m.term_coefficients(k);
    j["terms"].push_back({{"label", m.terms.terms[k].label},
                          {"edf", m.term_edf(static_cast<Eigen::Index>(k))},
                          {"coefficients", std::vector<double>(c.data(), c.data() + c.size())}});
  }
  return j;
}

inline Json hazard_summary(const FittedHazardModel& h) {
  Json j = model_summary(h.gam);
  j["breaks"] = to_string(h.rule);
  j["intervals"] = h.breakpoints.size() - 1;
  j["t_max"] = h.t_max;
  j["augmented_rows"] = h.augmented_rows;
  return j;
}

inline Json marker_summary(const LocationScaleModel& m) {
  Json j;
  j["n"] = m.n;
  j["gamma_hat"] = m.gamma_hat;
  j["mean"] = model_summary(m.mean_model);
  j["logsq"] = model_summary(m.logsq_model);
  return j;
}

namespace detail {

inline void write_csv_header(std::ostream& out, const std::vector<std::string>& covs,
                             std::initializer_list<const char*> tail) {
  out << 't';
  for (const std::string& c : covs) out << ',' << c;
  for (const char* h : tail) out << ',' << h;
  out << '\n';
}

inline void write_cell_prefix(std::ostream& out, const RocCell& c, const std::vector<std::string>& covs) {
  out << format_double(c.t);
  for (const std::string& name : covs) out << ',' << format_double(c.x.at(name));
}

inline std::vector<std::string> covariate_names(const RocSurface& s) {
  std::vector<std::string> names;
  if (!s.cells.empty())
    for (const auto& [name, v] : s.cells.front().x) names.push_back(name);
  return names;
}

inline double at_or_nan(const std::vector<double>& v, std::size_t k) { return k < v.size() ? v[k] : kNaN; }

}  // namespace detail

/// Long format: t, covariates, p, value, lower, upper.
inline void write_roc_csv(std::ostream& out, const RocSurface& s) {
  const auto covs = detail::covariate_names(s);
  detail::write_csv_header(out, covs, {"p", "value", "lower", "upper"});
  for (const RocCell& c : s.cells)
    for (std::size_t k = 0; k < s.p_grid.size(); ++k) {
      detail::write_cell_prefix(out, c, covs);
      out << ',' << format_double(s.p_grid[k]) << ',' << format_double(c.roc[k]) << ','
          << format_double(detail::at_or_nan(c.roc_lower, k)) << ','
          << format_double(detail::at_or_nan(c.roc_upper, k)) << '\n';
    }
}

/// Long format: t, covariates, threshold, measure (se or sp), value, lower, upper.
inline void write_sesp_csv(std::ostream& out, const RocSurface& s) {
  const auto covs = detail::covariate_names(s);
  detail::write_csv_header(out, covs, {"threshold", "measure", "value", "lower", "upper"});
  for (const RocCell& c : s.cells)
    for (const char* measure : {"se", "sp"})
      for (std::size_t l = 0; l < s.thresholds.size(); ++l) {
        detail::write_cell_prefix(out, c, covs);
        const double v = measure[1] == 'e' ? c.se[l] : c.sp[l];
        out << ',' << format_double(s.thresholds[l]) << ',' << measure << ',' << format_double(v) << ",NA,NA\n";
      }
}

/// Long format: t, covariates, value, lower, upper.
inline void write_auc_csv(std::ostream& out, const RocSurface& s) {
  const auto covs = detail::covariate_names(s);
  detail::write_csv_header(out, covs, {"value", "lower", "upper"});
  for (const RocCell& c : s.cells) {
    detail::write_cell_prefix(out, c, covs);
    out << ',' << format_double(c.auc) << ',' << format_double(c.auc_lower) << ',' << format_double(c.auc_upper)
        << '\n';
  }
}

/// One row per replicate and evaluation time.
inline void write_study_csv(std::ostream& out, const StudyResult& r) {
  out << "scenario,n,replicate,time_index,t,censoring,status,ermse_roc,ermse_se,ermse_sp,bias_auc,reason\n";
  for (const StudyRow& row : r.rows) {
    std::string reason = row.reason;
    std::replace(reason.begin(), reason.end(), '"', '\'');
    out << to_string(row.scenario) << ',' << row.n << ',' << row.replicate << ',' << row.time_index << ','
        << format_double(row.t) << ',' << format_double(row.censoring) << ',' << (row.ok ? "ok" : "failed") << ','
        << format_double(row.ermse_roc) << ',' << format_double(row.ermse_se) << ',' << format_double(row.ermse_sp)
        << ',' << format_double(row.bias_auc) << ",\"" << reason << "\"\n";
  }
}

}  // namespace timeroc
