#include "qmeas/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qmeas/errors.hpp"
#include "qmeas/io.hpp"
#include "qmeas/synth.hpp"

namespace qmeas {

namespace {

namespace fs = std::filesystem;

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw InputError(where + ": unknown field '" + it.key() + "'");
  }
}

double require_positive(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  if (!j.at(key).is_number()) throw InputError(where + ": field '" + key + "' must be a number");
  const double v = j.at(key).get<double>();
  if (!(v > 0.0)) throw InputError(where + ": field '" + key + "' must be positive");
  return v;
}

// Config matrices travel as {re, im} flat row-major arrays.
ComplexMatrix config_matrix(const json& j, const std::string& where) {
  check_keys(j, {"re", "im"}, where);
  if (!j.contains("re")) throw InputError(where + ": missing field 're'");
  std::vector<double> re = j.at("re").get<std::vector<double>>();
  std::vector<double> im(re.size(), 0.0);
  if (j.contains("im")) im = j.at("im").get<std::vector<double>>();
  if (im.size() != re.size()) throw InputError(where + ": re/im size mismatch");
  const int n = static_cast<int>(std::llround(std::sqrt(static_cast<double>(re.size()))));
  if (n * n != static_cast<int>(re.size()))
    throw InputError(where + ": entry count is not a perfect square");
  ComplexMatrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = cd(re[r * n + c], im[r * n + c]);
  return m;
}

Eigen::VectorXcd config_vector(const json& j, const std::string& where) {
  check_keys(j, {"re", "im"}, where);
  if (!j.contains("re")) throw InputError(where + ": missing field 're'");
  std::vector<double> re = j.at("re").get<std::vector<double>>();
  std::vector<double> im(re.size(), 0.0);
  if (j.contains("im")) im = j.at("im").get<std::vector<double>>();
  if (im.size() != re.size()) throw InputError(where + ": re/im size mismatch");
  Eigen::VectorXcd v(re.size());
  for (std::size_t i = 0; i < re.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = cd(re[i], im[i]);
  return v;
}

std::vector<HermitianOperator> config_controls(const json& j, const Tolerances& tol) {
  if (!j.contains("controls") || !j.at("controls").is_array() || j.at("controls").empty())
    throw InputError("config: missing or empty 'controls' array");
  std::vector<HermitianOperator> out;
  int idx = 0;
  for (const json& c : j.at("controls")) {
    std::ostringstream where;
    where << "controls[" << idx++ << "]";
    out.emplace_back(config_matrix(c, where.str()), tol);
  }
  return out;
}

Tolerances apply_overrides(const json& config, const CliOptions& opts) {
  Tolerances tol = default_tolerances();
  if (config.contains("tolerances")) {
    const json& t = config.at("tolerances");
    if (!t.is_object()) throw InputError("config: 'tolerances' must be an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      if (!it.value().is_number())
        throw InputError("config: tolerance '" + it.key() + "' must be a number");
      if (!tol.set(it.key(), it.value().get<double>()))
        throw InputError("config: unknown tolerance '" + it.key() + "'");
    }
  }
  for (const std::string& kv : opts.tol_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw InputError("--tol-override expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw InputError("--tol-override: bad value in '" + kv + "'");
    }
    if (!tol.set(key, value)) throw InputError("--tol-override: unknown key '" + key + "'");
  }
  return tol;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config parse error: ") + e.what());
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  atomic_write(path.string(), j.dump(2) + "\n");
}

json block_to_json(const JordanBlock& b) {
  json j{{"type", type_name(b.type)},
         {"rank", b.rank},
         {"multiplicity", b.multiplicity},
         {"algebra_dim", b.algebra_dim},
         {"state_indices", b.state_indices}};
  if (!b.warning.empty()) j["warning"] = b.warning;
  return j;
}

ControlSchedule schedule_from_config(const json& config, double x_boundary,
                                     const Tolerances& tol) {
  const bool has_schedule = config.contains("schedule");
  const bool has_centers = config.contains("centers");
  if (has_schedule == has_centers)
    throw InputError("config: provide exactly one of 'schedule' or 'centers'");
  if (has_schedule) return schedule_from_json(config.at("schedule"), tol);
  std::vector<double> centers = config.at("centers").get<std::vector<double>>();
  const int n = static_cast<int>(centers.size());
  ComplexMatrix frame = ComplexMatrix::Identity(n, n);
  if (config.contains("frame")) frame = config_matrix(config.at("frame"), "frame");
  if (frame.rows() != n)
    throw InputError("config: frame dimension must match the number of centers");
  return ControlSchedule::closed_form(UnitaryOperator(frame, tol), std::move(centers),
                                      x_boundary, {});
}

int cmd_analyze(const json& config, const CliOptions& opts, const Tolerances& tol) {
  check_keys(config, {"controls", "tolerances", "exhaustive"}, "config");
  std::vector<HermitianOperator> controls = config_controls(config, tol);
  ClosureOptions copts;
  copts.exhaustive = opts.exhaustive ||
                     (config.contains("exhaustive") && config.at("exhaustive").get<bool>());
  copts.keep_non_maximal = opts.verbose;
  ClosureResult result = find_closed_subspaces(controls, tol, copts);

  auto subspace_json = [&](const ClosedSubspace& cs) {
    BlockDecomposition blocks = block_decompose(cs, tol);
    json basis = json::array();
    for (const auto& b : cs.matrix_basis) basis.push_back(matrix_to_json(b.matrix()));
    json prov = json::array();
    for (const auto& [k, signs] : cs.provenance)
      prov.push_back(json{{"k", k}, {"signs", signs}});
    json blocks_json = json::array();
    for (const auto& blk : blocks.blocks) blocks_json.push_back(block_to_json(blk));
    return json{{"dimension", cs.dim()},
                {"closure_residual", cs.closure_residual},
                {"basis", std::move(basis)},
                {"provenance", std::move(prov)},
                {"frame", matrix_to_json(blocks.frame.matrix())},
                {"blocks", std::move(blocks_json)},
                {"spectrum_capacity", spectrum_capacity(blocks)}};
  };
  json subspaces = json::array();
  for (const ClosedSubspace& cs : result.subspaces) subspaces.push_back(subspace_json(cs));
  json out{{"command", "analyze"},
           {"subspace_count", result.subspaces.size()},
           {"nodes_explored", result.nodes_explored},
           {"exhaustive", copts.exhaustive},
           {"subspaces", std::move(subspaces)}};
  if (opts.verbose) {
    json extra = json::array();
    for (const ClosedSubspace& cs : result.non_maximal) extra.push_back(subspace_json(cs));
    out["non_maximal"] = std::move(extra);
  }
  write_json(fs::path(opts.out_dir) / "analysis.json", out);
  return 0;
}

int cmd_simulate(const json& config, const CliOptions& opts, const Tolerances& tol) {
  check_keys(config,
             {"schedule", "centers", "frame", "delta", "X", "psi0", "seed", "trajectories",
              "tolerances"},
             "config");
  const double delta = require_positive(config, "delta", "config");
  const double x_boundary = require_positive(config, "X", "config");
  WalkConfig wc{schedule_from_config(config, x_boundary, tol),
                delta,
                x_boundary,
                Eigen::VectorXcd(),
                0,
                0};
  if (!config.contains("psi0")) throw InputError("config: missing field 'psi0'");
  wc.psi0 = config_vector(config.at("psi0"), "psi0");
  wc.seed = config.contains("seed") ? config.at("seed").get<std::uint64_t>() : 0;
  if (opts.seed) wc.seed = *opts.seed;
  if (!config.contains("trajectories"))
    throw InputError("config: missing field 'trajectories'");
  wc.trajectories = config.at("trajectories").get<int>();
  if (wc.trajectories <= 0) throw InputError("config: 'trajectories' must be positive");
  wc.validate(tol);

  std::vector<TrajectoryRecord> records = run_trajectories(wc, tol);
  std::ostringstream csv;
  write_trajectories_csv(csv, wc, records);
  atomic_write((fs::path(opts.out_dir) / "trajectories.csv").string(), csv.str());

  std::size_t plus = 0;
  double mean_steps = 0.0;
  for (const auto& r : records) {
    if (r.outcome == Outcome::Plus) ++plus;
    mean_steps += static_cast<double>(r.steps);
  }
  mean_steps /= static_cast<double>(records.size());
  const double p_plus = static_cast<double>(plus) / static_cast<double>(records.size());

  WalkOperators w = total_walk_operator(wc.schedule, x_boundary, delta, tol);
  MeasurementPair pair = endpoint_pair(w, tol);  // throws -> exit 3
  const double born = (pair.m1 * wc.psi0).squaredNorm();

  json summary{{"command", "simulate"},
               {"trajectories", wc.trajectories},
               {"seed", wc.seed},
               {"delta", delta},
               {"X", x_boundary},
               {"p_plus_empirical", p_plus},
               {"p_minus_empirical", 1.0 - p_plus},
               {"p_plus_born", born},
               {"completeness_residual", pair.completeness_residual},
               {"mean_steps", mean_steps},
               {"simd", kernels::isa_name(kernels::active())}};
  write_json(fs::path(opts.out_dir) / "summary.json", summary);
  return 0;
}

int cmd_verify(const json& config, const CliOptions& opts, const Tolerances& tol) {
  check_keys(config, {"schedule", "centers", "frame", "delta", "X", "psi0", "x_probe",
                      "tolerances"},
             "config");
  const double delta = require_positive(config, "delta", "config");
  const double x_boundary = require_positive(config, "X", "config");
  ControlSchedule schedule = schedule_from_config(config, x_boundary, tol);
  const int n = schedule.dim();
  const int steps = static_cast<int>(std::llround(x_boundary / delta));
  if (steps < 1 || std::abs(x_boundary - steps * delta) > 1e-9 * std::max(1.0, x_boundary))
    throw InputError("config: X must be an integral multiple of delta");
  double x_probe = config.contains("x_probe") ? config.at("x_probe").get<double>()
                                              : std::min(0.3, 0.5 * x_boundary);
  Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(n);
  psi0[0] = 1.0;
  if (config.contains("psi0")) psi0 = config_vector(config.at("psi0"), "psi0");

  json checks = json::array();
  bool all_pass = true;
  auto add_check = [&](const std::string& name, bool pass, double value,
                       const std::string& detail) {
    checks.push_back(json{{"name", name}, {"pass", pass}, {"value", value},
                          {"detail", detail}});
    all_pass = all_pass && pass;
  };

  // Step completeness over the lattice.
  {
    double worst = 0.0;
    for (int j = -(steps - 1); j <= steps - 1; ++j) {
      auto [mp, mm] = step_operators(schedule.evaluate(j * delta), delta);
      worst = std::max(worst, (mp.adjoint() * mp + mm.adjoint() * mm -
                               ComplexMatrix::Identity(n, n))
                                  .norm());
    }
    add_check("step_completeness", worst <= 1e-12, worst, "max |M+^2 + M-^2 - I|_F over sites");
  }

  // Reversibility order under delta-halving.
  {
    const double probe_delta = std::min(delta, 1e-2);
    const double ratio = reversibility_halving_ratio(schedule, x_probe, probe_delta);
    const double order = std::log2(ratio);
    add_check("reversibility_order", order >= 2.5, order,
              "log2 residual halving ratio at x_probe; flow solutions exceed 2.5");
  }

  // Path independence on a small embedded walk.
  {
    const int n_small = 4;
    const double d_small = std::min(delta, schedule.x_max() / (2.0 * n_small));
    WalkConfig wc{schedule, d_small, n_small * d_small, psi0, 0, 0};
    EnumerateResult er = enumerate_paths(wc, tol);
    double worst = 1.0;
    for (const auto& bucket_list : {er.plus_states, er.minus_states}) {
      for (std::size_t i = 0; i < bucket_list.size(); ++i)
        for (std::size_t k = i + 1; k < bucket_list.size(); ++k) {
          const double f =
              std::norm(bucket_list[i].state.dot(bucket_list[k].state));
          worst = std::min(worst, f);
        }
    }
    add_check("path_independence", 1.0 - worst <= 1e-8, 1.0 - worst,
              "max same-outcome conditioned-state infidelity, exhaustive N=4");
  }

  // Endpoint normalization.
  {
    double residual = std::numeric_limits<double>::infinity();
    bool ok = false;
    std::string detail = "completeness residual of the normalized endpoint pair";
    try {
      WalkOperators w = total_walk_operator(schedule, x_boundary, delta, tol);
      MeasurementPair pair = endpoint_pair(w, tol);
      residual = pair.completeness_residual;
      ok = true;
    } catch (const Error& e) {
      detail = e.what();
    }
    add_check("endpoint_normalization", ok, residual, detail);
  }

  json out{{"command", "verify"}, {"all_pass", all_pass}, {"checks", std::move(checks)}};
  write_json(fs::path(opts.out_dir) / "verify.json", out);
  return all_pass ? 0 : 3;
}

int cmd_synthesize(const json& config, const CliOptions& opts, const Tolerances& tol) {
  check_keys(config, {"target", "controls", "delta", "X", "tolerance", "tolerances"},
             "config");
  if (!config.contains("target")) throw InputError("config: missing field 'target'");
  const double delta = require_positive(config, "delta", "config");
  const double x_boundary = require_positive(config, "X", "config");
  TargetMeasurement target{config_matrix(config.at("target"), "target"),
                           config.contains("tolerance")
                               ? config.at("tolerance").get<double>()
                               : 1e-6};
  std::vector<HermitianOperator> controls = config_controls(config, tol);

  ClosureOptions copts;
  copts.exhaustive = opts.exhaustive;
  ClosureResult closure = find_closed_subspaces(controls, tol, copts);

  json attempts = json::array();
  for (std::size_t i = 0; i < closure.subspaces.size(); ++i) {
    BlockDecomposition blocks = block_decompose(closure.subspaces[i], tol);
    AchievabilityReport rep = check_achievable(target, blocks, target.tolerance);
    json rep_json{{"subspace", i},
                  {"achievable", rep.achievable},
                  {"spectrum_capacity", rep.spectrum_count},
                  {"violations", rep.violations}};
    if (!rep.achievable) {
      attempts.push_back(std::move(rep_json));
      continue;
    }
    SynthesisResult synth = synthesize_schedule(target, blocks, x_boundary, delta, tol);
    json groups = json::array();
    for (const auto& g : synth.report.block_assignment)
      groups.push_back(json{{"block", g.block}, {"value", g.value},
                            {"multiplicity", g.multiplicity}});
    json out{{"command", "synthesize"},
             {"achievable", true},
             {"subspace", i},
             {"spectrum_capacity", synth.report.spectrum_count},
             {"eigenvalue_groups", std::move(groups)},
             {"centers", synth.centers},
             {"target_values", synth.target_values},
             {"predicted_values", synth.predicted},
             {"roundtrip_error", synth.roundtrip_error},
             {"completeness_residual", synth.realized.completeness_residual},
             {"a", synth.realized.a},
             {"b", synth.realized.b},
             {"schedule", schedule_to_json(synth.schedule)},
             {"polar",
              json{{"w1", matrix_to_json(synth.plan.w1.matrix())},
                   {"w2", matrix_to_json(synth.plan.w2.matrix())},
                   {"p1", matrix_to_json(synth.plan.p1.matrix())},
                   {"p2", matrix_to_json(synth.plan.p2.matrix())}}},
             {"attempts", std::move(attempts)}};
    write_json(fs::path(opts.out_dir) / "synthesis.json", out);
    write_json(fs::path(opts.out_dir) / "schedule.json", schedule_to_json(synth.schedule));
    return 0;
  }

  json out{{"command", "synthesize"},
           {"achievable", false},
           {"attempts", std::move(attempts)}};
  write_json(fs::path(opts.out_dir) / "synthesis.json", out);
  std::string msg = "synthesize: target not achievable under any closed subspace";
  throw NotAchievableError(msg);
}

}  // namespace

int run_command(const CliOptions& opts) {
  try {
    json config = load_config(opts.config_path);
    Tolerances tol = apply_overrides(config, opts);
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    if (ec) throw InputError("cannot create output directory: " + opts.out_dir);
    if (opts.command == "analyze") return cmd_analyze(config, opts, tol);
    if (opts.command == "simulate") return cmd_simulate(config, opts, tol);
    if (opts.command == "verify") return cmd_verify(config, opts, tol);
    if (opts.command == "synthesize") return cmd_synthesize(config, opts, tol);
    throw InputError("unknown command: " + opts.command);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Continuous two-outcome measurement decomposition toolkit"};
  app.require_subcommand(1);

  CliOptions opts;
  std::uint64_t seed_value = 0;
  bool seed_set = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"analyze", "enumerate closed control subspaces and their block structure"},
      {"simulate", "run feedback-walk trajectories (CSV + summary JSON)"},
      {"verify", "run invariant checks on a schedule"},
      {"synthesize", "synthesize a schedule realizing a target measurement"}};
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", opts.config_path, "JSON config file")->required();
    sub->add_option("--out", opts.out_dir, "output directory (default: .)");
    CLI::Option* seed_opt = sub->add_option("--seed", seed_value, "override the config seed");
    sub->add_flag("--exhaustive", opts.exhaustive,
                  "explore all violating constraint orders");
    sub->add_flag("--verbose", opts.verbose,
                  "analyze: also report non-maximal closed subspaces");
    sub->add_option("--tol-override", opts.tol_overrides,
                    "override a tolerance, key=value (repeatable)");
    sub->callback([&opts, &seed_set, sub, seed_opt]() {
      opts.command = sub->get_name();
      seed_set = seed_opt->count() > 0;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (seed_set) opts.seed = seed_value;
  return run_command(opts);
}

}  // namespace qmeas
