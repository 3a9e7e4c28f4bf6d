#include "scfo/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "json.hpp"

namespace scfo {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

VectorXd to_vector(const json& j) {
  VectorXd v(static_cast<int>(j.size()));
  int i = 0;
  for (const auto& e : j) v(i++) = e.get<double>();
  return v;
}

}  // namespace

ConfigLoad parse_scenario_config(const std::string& json_text) {
  ConfigLoad out;
  json j = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    out.errors.push_back("config: not valid JSON");
    return out;
  }
  ScenarioConfig& c = out.config;
  auto err = [&](const std::string& m) { out.errors.push_back("config: " + m); };

  try {
    if (j.contains("plant")) c.plant = j["plant"].get<std::string>();
    if (j.contains("iterations")) c.iterations = j["iterations"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("noise")) {
      const json& n = j["noise"];
      std::string kind = n.value("kind", "gaussian");
      if (kind == "gaussian")
        c.noise_kind = NoiseKind::Gaussian;
      else if (kind == "truncated-gaussian")
        c.noise_kind = NoiseKind::TruncatedGaussian;
      else if (kind == "chebyshev")
        c.noise_kind = NoiseKind::Chebyshev;
      else
        err("unknown noise kind '" + kind + "'");
      c.sigma = n.value("sigma", 0.01);
      c.chebyshev_mean = n.value("mean", 0.0);
      c.chebyshev_coverage = n.value("coverage", 0.99);
    }
    if (j.contains("alpha_sigma")) c.alpha_sigma = j["alpha_sigma"].get<double>();
    if (j.contains("delta_e")) c.delta_e = j["delta_e"].get<double>();
    if (j.contains("slacks")) {
      const json& s = j["slacks"];
      if (s.contains("d_max")) c.slack_max_g = to_vector(s["d_max"]);
      if (s.contains("budget")) c.slack_budget_g = to_vector(s["budget"]);
      if (s.contains("d_max_numerical")) c.slack_max_num = to_vector(s["d_max_numerical"]);
      if (s.contains("budget_numerical"))
        c.slack_budget_num = to_vector(s["budget_numerical"]);
      if (s.contains("beta")) c.beta_g = to_vector(s["beta"]);
    }
    if (j.contains("constants")) c.constants = j["constants"].get<std::string>();
    if (j.contains("bad_M")) c.bad_M = j["bad_M"].get<bool>();
    if (j.contains("u0")) c.u0 = to_vector(j["u0"]);
    if (j.contains("excitation")) c.excitation = j["excitation"].get<bool>();
    if (j.contains("necessary_decrease"))
      c.necessary_decrease = j["necessary_decrease"].get<bool>();
    if (j.contains("consistency_checks"))
      c.consistency_checks = j["consistency_checks"].get<bool>();
    if (j.contains("cost_numerical")) c.cost_numerical = j["cost_numerical"].get<bool>();
    if (j.contains("grid_points")) c.grid_points = j["grid_points"].get<int>();
    if (j.contains("reference_fallback"))
      c.reference_fallback = j["reference_fallback"].get<std::string>();
    if (j.contains("delta_r_min")) c.delta_r_min = j["delta_r_min"].get<double>();
  } catch (const json::exception& e) {
    err(e.what());
  }

  if (c.iterations < 1) err("iterations must be >= 1");
  if (c.sigma < 0) err("noise sigma must be >= 0");
  if (c.delta_e < 0) err("delta_e must be >= 0");
  bool known = false;
  for (const auto& n : builtin_plant_names()) known = known || n == c.plant;
  if (!known) err("unknown plant '" + c.plant + "'");
  return out;
}

ConfigLoad load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigLoad out;
    out.errors.push_back("config: cannot open " + path);
    return out;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str());
}

void write_trajectory_csv(const Trajectory& t, std::ostream& os) {
  if (t.rows.empty()) return;
  const auto& first = t.rows.front();
  os << "k,tau";
  for (int i = 0; i < first.u.size(); ++i) os << ",u" << (i + 1);
  os << ",cost_true,cost_meas";
  for (int j = 0; j < first.g_true.size(); ++j) os << ",gp" << (j + 1) << "_true";
  for (int j = 0; j < first.g_num_true.size(); ++j) os << ",g" << (j + 1) << "_true";
  for (int j = 0; j < first.d_g.size(); ++j) os << ",d_p" << (j + 1);
  for (int j = 0; j < first.d_num.size(); ++j) os << ",d_" << (j + 1);
  os << ",K,k_star,scenario,P\n";
  for (const auto& r : t.rows) {
    os << r.k << ',' << fmt17(r.tau);
    for (int i = 0; i < r.u.size(); ++i) os << ',' << fmt17(r.u(i));
    os << ',' << fmt17(r.cost_true) << ',' << (r.cost_meas ? fmt17(*r.cost_meas) : "");
    for (int j = 0; j < r.g_true.size(); ++j) os << ',' << fmt17(r.g_true(j));
    for (int j = 0; j < r.g_num_true.size(); ++j) os << ',' << fmt17(r.g_num_true(j));
    for (int j = 0; j < r.d_g.size(); ++j) os << ',' << fmt17(r.d_g(j));
    for (int j = 0; j < r.d_num.size(); ++j) os << ',' << fmt17(r.d_num(j));
    os << ',' << fmt17(r.gain) << ',' << r.k_star << ',' << r.scenario << ','
       << fmt17(r.robustness) << '\n';
  }
}

std::string summary_json(const ScenarioConfig& cfg, const Trajectory& t) {
  json s;
  s["plant"] = cfg.plant;
  s["iterations"] = cfg.iterations;
  s["seed"] = cfg.seed;
  s["final_cost_true"] = t.final_cost_true;
  s["violation_integral_experimental"] = std::vector<double>(
      t.violation_integral_g.data(),
      t.violation_integral_g.data() + t.violation_integral_g.size());
  s["violation_integral_numerical"] = std::vector<double>(
      t.violation_integral_num.data(),
      t.violation_integral_num.data() + t.violation_integral_num.size());
  s["warnings"] = t.warnings;
  return s.dump(2);
}

namespace {

struct SweepRange {
  std::string key;
  long long from = 0, to = 0;
  bool ok = false;
};

SweepRange parse_sweep(const std::string& text) {
  SweepRange r;
  const auto eq = text.find('=');
  const auto dots = text.find("..");
  if (eq == std::string::npos || dots == std::string::npos || dots < eq) return r;
  r.key = text.substr(0, eq);
  try {
    r.from = std::stoll(text.substr(eq + 1, dots - eq - 1));
    r.to = std::stoll(text.substr(dots + 2));
  } catch (...) {
    return r;
  }
  r.ok = r.key == "seed" && r.to >= r.from;
  return r;
}

int run_one(const ScenarioConfig& cfg, const std::filesystem::path& dir,
            std::ostream& out, std::ostream& err, json* aggregate) {
  Trajectory t;
  try {
    t = run_scenario(cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto csv_path = dir / ("trajectory_" + std::to_string(cfg.seed) + ".csv");
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) {
    err << "error: cannot write " << csv_path.string() << "\n";
    return 2;
  }
  write_trajectory_csv(t, csv);
  csv.close();
  if (aggregate) {
    json entry;
    entry["seed"] = cfg.seed;
    entry["final_cost_true"] = t.final_cost_true;
    entry["violation_integral_experimental"] = std::vector<double>(
        t.violation_integral_g.data(),
        t.violation_integral_g.data() + t.violation_integral_g.size());
    aggregate->push_back(entry);
  } else {
    const auto sum_path = dir / "summary.json";
    std::ofstream sum(sum_path, std::ios::binary);
    if (!sum) {
      err << "error: cannot write " << sum_path.string() << "\n";
      return 2;
    }
    sum << summary_json(cfg, t) << "\n";
  }
  out << "wrote " << csv_path.string() << " (final cost " << t.final_cost_true << ")\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    out << "usage: scfo_run run <config.json> [--seed N] [--iters N] [--out DIR]\n"
           "                [--sweep seed=a..b]\n"
           "       scfo_run plants\n";
    return args.empty() ? 1 : 0;
  }
  if (args[0] == "plants") {
    for (const auto& n : builtin_plant_names()) out << n << "\n";
    return 0;
  }
  if (args[0] != "run") {
    err << "error: unknown command '" << args[0] << "'\n";
    return 1;
  }
  if (args.size() < 2) {
    err << "error: run requires a config path\n";
    return 1;
  }
  ConfigLoad load = load_scenario_config(args[1]);
  std::filesystem::path out_dir = ".";
  if (const char* env = std::getenv("SCFO_OUT_DIR")) out_dir = env;
  std::optional<SweepRange> sweep;

  for (std::size_t i = 2; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto next = [&](const char* what) -> std::optional<std::string> {
      if (i + 1 >= args.size()) {
        load.errors.push_back(std::string("missing value for ") + what);
        return std::nullopt;
      }
      return args[++i];
    };
    if (a == "--seed") {
      if (auto v = next("--seed")) load.config.seed = std::stoull(*v);
    } else if (a == "--iters") {
      if (auto v = next("--iters")) load.config.iterations = std::stoi(*v);
    } else if (a == "--out") {
      if (auto v = next("--out")) out_dir = *v;
    } else if (a == "--sweep") {
      if (auto v = next("--sweep")) {
        SweepRange r = parse_sweep(*v);
        if (!r.ok)
          load.errors.push_back("bad --sweep (expected seed=a..b): " + *v);
        else
          sweep = r;
      }
    } else {
      load.errors.push_back("unknown flag: " + a);
    }
  }
  if (!load.ok()) {
    json e;
    e["errors"] = load.errors;
    err << e.dump(2) << "\n";
    return 1;
  }
  // Surface scenario-level validation before any files are written.
  try {
    prepare_scenario(load.config);
  } catch (const std::exception& e) {
    json msg;
    msg["errors"] = {e.what()};
    err << msg.dump(2) << "\n";
    return 1;
  }

  if (!sweep) return run_one(load.config, out_dir, out, err, nullptr);

  json aggregate = json::array();
  for (long long s = sweep->from; s <= sweep->to; ++s) {
    ScenarioConfig cfg = load.config;
    cfg.seed = static_cast<std::uint64_t>(s);
    const int rc = run_one(cfg, out_dir, out, err, &aggregate);
    if (rc != 0) return rc;
  }
  json agg;
  agg["runs"] = aggregate;
  double worst = -kInf, sum = 0;
  for (const auto& e : aggregate) {
    const double f = e["final_cost_true"].get<double>();
    worst = std::max(worst, f);
    sum += f;
  }
  agg["mean_final_cost"] = sum / static_cast<double>(aggregate.size());
  agg["worst_final_cost"] = worst;
  const auto agg_path = out_dir / "summary.json";
  std::ofstream sum_file(agg_path, std::ios::binary);
  if (!sum_file) {
    err << "error: cannot write " << agg_path.string() << "\n";
    return 2;
  }
  sum_file << agg.dump(2) << "\n";
  out << "wrote " << agg_path.string() << "\n";
  return 0;
}

}  // namespace scfo
