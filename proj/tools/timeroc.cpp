// timeroc command-line tool: fit models, evaluate covariate-specific
// time-dependent ROC curves and AUCs, bootstrap bands, simulate data and
// run simulation studies. Every run writes a manifest.json whose "config"
// entry replays the run via `timeroc --config manifest.json`.

#include <CLI11.hpp>
#include <boost/version.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "timeroc/timeroc.hpp"

namespace fs = std::filesystem;
using namespace timeroc;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Options {
  std::string command;
  std::string input;
  std::string spec_path;
  std::string selection = "reml";
  bool double_penalty = false;
  std::string breaks = "events";
  std::string times = "quartiles";
  std::string xgrid;
  int boot = 0;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::string out = "timeroc-out";
  std::string config;
  // generate / simulate
  std::string scenario = "all";
  int n = 300;
  std::string sizes = "300,600";
  int replicates = 100;
  bool full = false;
  double a = kNaN, b = kNaN;
  int calibration_draws = 50000;
};

std::uint64_t fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::invalid_input, "cannot write '" + path.string() + "'");
  out << body;
}

template <class Writer>
void write_with(const fs::path& path, Writer&& w) {
  std::ostringstream ss;
  w(ss);
  write_text(path, ss.str());
}

Criterion criterion_of(const std::string& selection) {
  if (selection == "reml" || selection == "aic-compare") return Criterion::reml;
  if (selection == "gcv") return Criterion::gcv;
  throw Error(ErrorCode::invalid_input, "selection must be reml, gcv or aic-compare");
}

std::vector<Scenario> scenarios_of(const std::string& s) {
  if (s == "all") return {Scenario::I, Scenario::II, Scenario::III};
  std::vector<Scenario> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_scenario(part));
  return out;
}

// ---------------------------------------------------------------------------
// Resolved run configuration. Everything needed to reproduce a run lives in
// this JSON object; manifests echo it verbatim.

Json resolve_config(const Options& o, const SurvivalData* data) {
  Json c;
  c["command"] = o.command;
  if (o.command == "generate" || o.command == "simulate") {
    c["scenarios"] = Json::array();
    for (Scenario s : scenarios_of(o.scenario)) c["scenarios"].push_back(std::string(to_string(s)));
    c["seed"] = o.seed;
    if (o.command == "generate") {
      if (c["scenarios"].size() != 1) throw Error(ErrorCode::invalid_input, "generate needs a single scenario");
      c["n"] = o.n;
      if (std::isnan(o.a) != std::isnan(o.b)) throw Error(ErrorCode::invalid_input, "give both --a and --b");
      if (!std::isnan(o.a)) c["censoring"] = {{"a", o.a}, {"b", o.b}};
    } else {
      Json sizes = Json::array();
      for (double v : parse_number_list(o.sizes)) {
        if (v < 10 || v != std::floor(v)) throw Error(ErrorCode::invalid_input, "sample sizes must be integers >= 10");
        sizes.push_back(static_cast<int>(v));
      }
      c["sizes"] = sizes;
      c["replicates"] = o.full ? 500 : o.replicates;
      c["double_penalty"] = o.double_penalty;
      c["breaks"] = to_string(parse_breaks(o.breaks));
    }
    c["calibration_draws"] = o.calibration_draws;
    return c;
  }

  c["input"] = o.input;
  c["input_fnv1a"] = hex(fnv1a(o.input));
  std::vector<std::string> covs;
  for (const auto& [name, col] : data->covariates) covs.push_back(name);
  const SpecFile spec = o.spec_path.empty() ? default_spec(covs) : read_spec_file(o.spec_path);
  c["spec"] = to_json(spec);
  criterion_of(o.selection);
  if (spec.hazard.size() > 1 && o.selection != "aic-compare")
    throw Error(ErrorCode::invalid_spec, "several hazard candidates need --select aic-compare");
  c["selection"] = o.selection;
  c["double_penalty"] = o.double_penalty;
  c["breaks"] = to_string(parse_breaks(o.breaks));
  if (o.command == "fit") return c;

  std::vector<double> times;
  if (o.times == "quartiles") {
    std::vector<double> z(data->z.data(), data->z.data() + data->z.size());
    for (double q : {0.25, 0.5, 0.75}) times.push_back(quantile7(z, q));
  } else {
    times = parse_number_list(o.times);
  }
  c["times"] = times;
  std::vector<CovariatePoint> xs;
  if (!o.xgrid.empty()) {
    xs = parse_xgrid(o.xgrid, covs);
  } else {
    // quartiles of every covariate
    xs = {CovariatePoint{}};
    for (const auto& [name, col] : data->covariates) {
      std::vector<double> v(col.data(), col.data() + col.size());
      std::vector<CovariatePoint> next;
      for (const CovariatePoint& p : xs)
        for (double q : {0.25, 0.5, 0.75}) {
          CovariatePoint r = p;
          r[name] = quantile7(v, q);
          next.push_back(r);
        }
      xs = std::move(next);
    }
  }
  c["xgrid"] = Json::array();
  for (const CovariatePoint& x : xs) c["xgrid"].push_back(to_json(x));
  c["p_points"] = 101;
  const int boot = o.command == "bootstrap" && o.boot == 0 ? 500 : o.boot;
  if (boot < 0) throw Error(ErrorCode::invalid_input, "--boot must be non-negative");
  if (o.command == "bootstrap" && boot < 2) throw Error(ErrorCode::invalid_input, "bootstrap needs --boot >= 2");
  if (!(o.level > 0 && o.level < 1)) throw Error(ErrorCode::invalid_input, "--level must lie in (0, 1)");
  c["boot"] = boot;
  c["level"] = o.level;
  c["seed"] = o.seed;
  return c;
}

Json versions() {
  Json v;
  v["timeroc"] = kToolVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = BOOST_LIB_VERSION;
  v["cli11"] = CLI11_VERSION;
  v["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
              std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__clang__)
  v["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
  v["compiler"] = "gcc " __VERSION__;
#endif
  return v;
}

struct Manifest {
  Json j;
  Manifest(const Json& config) {
    j["tool"] = "timeroc";
    j["created"] = utc_now();
    j["versions"] = versions();
    j["command"] = config["command"];
    j["seed"] = config.contains("seed") ? config["seed"] : Json(nullptr);
    j["config"] = config;
    j["warnings"] = Json::array();
    j["outputs"] = Json::array();
  }
  void warn(const std::string& w) { j["warnings"].push_back(w); }
  void output(const std::string& f) { j["outputs"].push_back(f); }
};

// ---------------------------------------------------------------------------
// Commands

struct FitResult {
  FitConfig config;
  FittedPair models;
  Json candidates = Json::array();
  std::size_t chosen = 0;
};

FitResult fit_from_config(const SurvivalData& data, const Json& c) {
  const SpecFile spec = spec_from_json(c["spec"]);
  FitResult r;
  r.config.marker = spec.marker;
  r.config.breaks = parse_breaks(c["breaks"].get<std::string>());
  const std::string selection = c["selection"].get<std::string>();
  r.config.hazard_options.selection = r.config.marker_options.selection = criterion_of(selection);
  r.config.hazard_options.double_penalty = r.config.marker_options.double_penalty = c["double_penalty"].get<bool>();
  std::optional<FittedHazardModel> best;
  for (std::size_t k = 0; k < spec.hazard.size(); ++k) {
    FittedHazardModel h = fit_hazard(data, spec.hazard[k], r.config.breaks, r.config.hazard_options);
    r.candidates.push_back({{"index", k}, {"aic", h.gam.aic}, {"edf", h.gam.edf}});
    if (!best || h.gam.aic < best->gam.aic) {
      best = std::move(h);
      r.chosen = k;
    }
  }
  r.config.hazard = spec.hazard[r.chosen];
  r.models.hazard = std::move(*best);
  Columns x;
  for (const auto& [name, col] : data.covariates) x[name] = col;
  r.models.marker = fit_location_scale(data.marker, x, r.config.marker, r.config.marker_options,
                                       r.config.marker_options);
  return r;
}

Json data_summary(const SurvivalData& d) {
  Json j;
  j["rows"] = d.size();
  j["censoring_fraction"] = d.censoring_fraction();
  j["covariates"] = Json::array();
  for (const auto& [name, col] : d.covariates) j["covariates"].push_back(name);
  return j;
}

void run_estimation(const Json& c, const fs::path& out, Manifest& m) {
  const std::string input = c["input"].get<std::string>();
  const SurvivalData data = read_survival_csv(input);
  if (hex(fnv1a(input)) != c["input_fnv1a"].get<std::string>())
    m.warn("input-changed: '" + input + "' differs from the file the configuration was recorded with");
  std::cerr << "timeroc: read " << data.size() << " rows from " << input << " (censoring fraction "
            << format_double(data.censoring_fraction()) << ")\n";
  m.j["data"] = data_summary(data);
  const std::string command = c["command"].get<std::string>();
  const FitResult fit = fit_from_config(data, c);
  if (!fit.models.hazard.gam.converged) m.warn("no-convergence: hazard model did not fully converge");
  if (!fit.models.marker.mean_model.converged || !fit.models.marker.logsq_model.converged)
    m.warn("no-convergence: marker model did not fully converge");

  if (command == "fit") {
    Json model;
    model["hazard"] = hazard_summary(fit.models.hazard);
    model["marker"] = marker_summary(fit.models.marker);
    model["candidates"] = fit.candidates;
    model["chosen"] = fit.chosen;
    write_text(out / "model.json", model.dump(2) + "\n");
    m.output("model.json");
    return;
  }

  RocRequest req;
  req.times = c["times"].get<std::vector<double>>();
  for (const Json& x : c["xgrid"]) {
    CovariatePoint p;
    for (const auto& [name, v] : x.items()) p[name] = v.get<double>();
    req.xs.push_back(p);
  }
  req.p_grid = default_p_grid(c["p_points"].get<int>());
  RocSurface surface = evaluate_roc(fit.models.hazard, fit.models.marker, req);
  const int boot = c["boot"].get<int>();
  if (boot > 0) {
    BootstrapOptions bo;
    bo.replicates = boot;
    bo.level = c["level"].get<double>();
    bo.seed = c["seed"].get<std::uint64_t>();
    const BootstrapSummary s = bootstrap_bands(data, fit.config, req, surface, bo);
    m.j["bootstrap"] = {{"requested", s.requested}, {"failed", s.failed}, {"level", bo.level}};
  }
  for (const std::string& w : surface.warnings) m.warn(w);
  if (command == "roc" || command == "bootstrap") {
    write_with(out / "roc.csv", [&](std::ostream& os) { write_roc_csv(os, surface); });
    write_with(out / "sesp.csv", [&](std::ostream& os) { write_sesp_csv(os, surface); });
    m.output("roc.csv");
    m.output("sesp.csv");
  }
  write_with(out / "auc.csv", [&](std::ostream& os) { write_auc_csv(os, surface); });
  m.output("auc.csv");
}

CensoringCalibration calibration_for(Scenario s, const Json& c) {
  if (c.contains("censoring")) {
    CensoringCalibration cal;
    cal.a = c["censoring"]["a"].get<double>();
    cal.b = c["censoring"]["b"].get<double>();
    cal.rate = kNaN;
    return cal;
  }
  return calibrate_censoring(s, 0.5, c["calibration_draws"].get<int>());
}

Json calibration_json(Scenario s, const CensoringCalibration& cal) {
  Json j{{"scenario", std::string(to_string(s))}, {"a", cal.a}, {"b", cal.b}};
  j["rate"] = std::isnan(cal.rate) ? Json(nullptr) : Json(cal.rate);
  j["draws"] = cal.draws;
  return j;
}

void run_generate(const Json& c, const fs::path& out, Manifest& m) {
  const Scenario s = parse_scenario(c["scenarios"][0].get<std::string>());
  const CensoringCalibration cal = calibration_for(s, c);
  ScenarioSpec spec;
  spec.id = s;
  spec.a = cal.a;
  spec.b = cal.b;
  const SurvivalData d = generate(spec, c["n"].get<int>(), c["seed"].get<std::uint64_t>());
  m.j["calibration"] = Json::array({calibration_json(s, cal)});
  m.j["data"] = data_summary(d);
  write_with(out / "data.csv", [&](std::ostream& os) { write_survival_csv(os, d); });
  m.output("data.csv");
}

void run_simulate(const Json& c, const fs::path& out, Manifest& m) {
  StudyConfig cfg;
  cfg.scenarios.clear();
  for (const Json& s : c["scenarios"]) cfg.scenarios.push_back(parse_scenario(s.get<std::string>()));
  cfg.sizes = c["sizes"].get<std::vector<int>>();
  cfg.replicates = c["replicates"].get<int>();
  cfg.seed = c["seed"].get<std::uint64_t>();
  cfg.double_penalty = c["double_penalty"].get<bool>();
  cfg.breaks = parse_breaks(c["breaks"].get<std::string>());
  cfg.calibration_draws = c["calibration_draws"].get<int>();
  const StudyResult r = run_study(cfg);
  m.j["calibration"] = Json::array();
  for (const ScenarioTruth& t : r.truths) m.j["calibration"].push_back(calibration_json(t.scenario, t.calibration));
  Json summary = Json::array();
  for (Scenario s : cfg.scenarios)
    for (int n : cfg.sizes)
      for (int q = 0; q < 3; ++q)
        summary.push_back({{"scenario", std::string(to_string(s))},
                           {"n", n},
                           {"time_index", q},
                           {"median_ermse_roc", median_ermse_roc(r, s, n, q)},
                           {"mean_abs_auc_bias", mean_abs_auc_bias(r, s, n, q)}});
  m.j["summary"] = summary;
  m.j["failed_replicates"] = r.failed_replicates;
  for (const StudyRow& row : r.rows)
    if (!row.ok && row.time_index == 0)
      m.warn("replicate-failure: scenario " + std::string(to_string(row.scenario)) + ", n=" + std::to_string(row.n) +
             ", replicate " + std::to_string(row.replicate) + ": " + row.reason);
  write_with(out / "study.csv", [&](std::ostream& os) { write_study_csv(os, r); });
  m.output("study.csv");
}

void run(const Json& config, const fs::path& out) {
  fs::create_directories(out);
  Manifest m(config);
  const std::string command = config.at("command").get<std::string>();
  if (command == "generate")
    run_generate(config, out, m);
  else if (command == "simulate")
    run_simulate(config, out, m);
  else if (command == "fit" || command == "roc" || command == "auc" || command == "bootstrap")
    run_estimation(config, out, m);
  else
    throw Error(ErrorCode::invalid_input, "unknown command '" + command + "'");
  write_text(out / "manifest.json", m.j.dump(2) + "\n");
}

void add_estimation_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--input", o.input, "CSV with columns z, delta, y and covariates")->required();
  cmd->add_option("--spec", o.spec_path, "model spec JSON (default: all main effects and pairwise interactions)");
  cmd->add_option("--select", o.selection, "smoothing selection")
      ->check(CLI::IsMember({"reml", "gcv", "aic-compare"}));
  cmd->add_flag("--double-penalty", o.double_penalty, "penalise the null space of every smooth");
  cmd->add_option("--breaks", o.breaks, "PAM break points: events or equal:S");
}

void add_roc_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--times", o.times, "evaluation times: 'quartiles' or a list (a:b:n ranges allowed)");
  cmd->add_option("--xgrid", o.xgrid, "covariate grid, e.g. 'x=-1:3:50' or 'x=0,1;w=2,3'");
  cmd->add_option("--boot", o.boot, "bootstrap replicates (0: none)");
  cmd->add_option("--level", o.level, "bootstrap interval level");
  cmd->add_option("--seed", o.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"timeroc: covariate-specific time-dependent ROC curves from censored data"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(0, 1);
  app.add_option("--config", o.config, "replay the configuration recorded in a manifest.json");
  app.add_option("--out", o.out, "output directory");

  CLI::App* fit = app.add_subcommand("fit", "fit the hazard and marker models, write model.json");
  add_estimation_options(fit, o);
  CLI::App* roc = app.add_subcommand("roc", "ROC curves, Se/Sp and AUC (long-format CSV)");
  CLI::App* aucc = app.add_subcommand("auc", "AUC only");
  CLI::App* boot = app.add_subcommand("bootstrap", "ROC and AUC with percentile bootstrap bands");
  for (CLI::App* cmd : {roc, aucc, boot}) {
    add_estimation_options(cmd, o);
    add_roc_options(cmd, o);
  }
  CLI::App* gen = app.add_subcommand("generate", "draw a data set from a simulation scenario");
  gen->add_option("--scenario", o.scenario, "I, II or III")->required();
  gen->add_option("--n", o.n, "number of records");
  gen->add_option("--seed", o.seed, "random seed");
  gen->add_option("--a", o.a, "censoring parameter a (default: calibrated)");
  gen->add_option("--b", o.b, "censoring parameter b (default: calibrated)");
  gen->add_option("--calibration-draws", o.calibration_draws, "Monte-Carlo draws for censoring calibration");
  CLI::App* sim = app.add_subcommand("simulate", "replicated simulation study");
  sim->add_option("--scenario", o.scenario, "I, II, III, a comma list, or all");
  sim->add_option("--sizes", o.sizes, "sample sizes");
  sim->add_option("--replicates", o.replicates, "replicates per scenario and size");
  sim->add_flag("--full", o.full, "500 replicates");
  sim->add_option("--seed", o.seed, "random seed");
  o.double_penalty = false;
  bool sim_dp = true;
  sim->add_flag("--double-penalty,!--no-double-penalty", sim_dp, "double penalty (default on)");
  sim->add_option("--breaks", o.breaks, "PAM break points: events or equal:S");
  sim->add_option("--calibration-draws", o.calibration_draws, "Monte-Carlo draws for censoring calibration");
  for (CLI::App* cmd : {fit, roc, aucc, boot, gen, sim}) cmd->add_option("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    Json j;
    j["error"]["code"] = "usage-error";
    j["error"]["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 2;
  }

  try {
    Json config;
    if (!o.config.empty()) {
      if (!app.get_subcommands().empty()) throw Error(ErrorCode::invalid_input, "--config replays a run; omit the command");
      std::ifstream in(o.config);
      if (!in) throw Error(ErrorCode::invalid_input, "cannot open '" + o.config + "'");
      Json j;
      try {
        j = Json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse_error, o.config + ": " + e.what());
      }
      config = j.contains("config") ? j["config"] : j;
      if (!config.is_object() || !config.contains("command"))
        throw Error(ErrorCode::invalid_input, o.config + " holds no run configuration");
    } else {
      if (app.get_subcommands().empty()) throw Error(ErrorCode::invalid_input, "no command given (see --help)");
      o.command = app.get_subcommands().front()->get_name();
      if (o.command == "simulate") o.double_penalty = sim_dp;
      std::optional<SurvivalData> data;
      if (o.command != "generate" && o.command != "simulate") data = read_survival_csv(o.input);
      config = resolve_config(o, data ? &*data : nullptr);
    }
    run(config, o.out);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << error_json(Error(ErrorCode::invalid_input, std::string("configuration: ") + e.what())).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << error_json(e).dump() << "\n";
    return 1;
  }
  return 0;
}
