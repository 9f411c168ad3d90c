// eqk: stochastic traffic equilibria from the command line.
//
//   eqk solve   --edges E.csv --trips T.csv --method dual-universal --gamma 1 --epsilon 1e-6
//   eqk verify  [--only CHECK] [--seed N]
//   eqk psi     --edges E.csv --trips T.csv (--t-file F.csv | --free-flow) [--compare-layered]
//   eqk convert-tntp --net X_net.tntp --trips X_trips.tntp --out-edges E.csv --out-trips T.csv
//
// Exit codes: 0 success, 1 input error, 2 no convergence, 3 verification failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "eqk/dual_solver.hpp"
#include "eqk/error.hpp"
#include "eqk/instances.hpp"
#include "eqk/io.hpp"
#include "eqk/log.hpp"
#include "eqk/path_solver.hpp"
#include "eqk/smoothing.hpp"
#include "verify.hpp"

namespace {

using json = nlohmann::json;
using namespace eqk;

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kInput = 1, kNotConverged = 2, kVerifyFailed = 3 };

struct NetworkArgs {
  std::string edges, trips, instance, model;
};

void add_network_flags(CLI::App* cmd, NetworkArgs& args) {
  cmd->add_option("--edges", args.edges, "edge table (CSV)");
  cmd->add_option("--trips", args.trips, "trips table (CSV)");
  cmd->add_option("--instance", args.instance, "built-in instance instead of files");
  cmd->add_option("--model", args.model, "override every edge's cost model")->check(CLI::IsMember({"bpr", "sd"}));
}

Network load(const NetworkArgs& args) {
  std::optional<Network> net;
  if (!args.instance.empty()) {
    if (!args.edges.empty() || !args.trips.empty()) throw InputError("--instance excludes --edges/--trips");
    net = instances::by_name(args.instance);
  } else {
    if (args.edges.empty() || args.trips.empty()) throw InputError("need --edges and --trips (or --instance)");
    net = load_network(args.edges, args.trips);
  }
  if (args.model == "bpr") return net->with_model(CostModel::kBpr);
  if (args.model == "sd") return net->with_model(CostModel::kStableDynamics);
  return std::move(*net);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.precision(17);
  return out;
}

json certificate_json(const Certificate& c) {
  json trace = json::array();
  for (const auto& p : c.trace) {
    trace.push_back({{"iteration", p.iteration}, {"gap", p.gap}, {"dual_value", p.dual_value},
                     {"primal_value", p.primal_value}});
  }
  return {{"method", c.method},
          {"gamma", c.gamma},
          {"epsilon", c.epsilon},
          {"iterations", c.iterations},
          {"primal_value", c.primal_value},
          {"dual_value", c.dual_value},
          {"gap", c.gap},
          {"entropy_term", c.entropy_term},
          {"capacity_violation", c.capacity_violation},
          {"gradient_evaluations", c.gradient_evaluations},
          {"function_evaluations", c.function_evaluations},
          {"max_accepted_lipschitz", c.max_accepted_lipschitz},
          {"lipschitz_bound", c.lipschitz_bound},
          {"converged", c.converged},
          {"trace", trace}};
}

std::vector<double> times_for(const Network& net, const EdgeFlow& f) {
  std::vector<double> t(net.edge_count());
  for (EdgeId e = 0; e < net.edge_count(); ++e) {
    const auto& p = net.edge(e).cost;
    try {
      t[e] = edge_cost(p, std::max(0.0, f[e]));
    } catch (const DomainError&) {
      t[e] = p.t_free;
    }
  }
  return t;
}

std::vector<double> parse_counts(const std::string& text, std::size_t od_count) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError("bad path-count bound '" + item + "'");
    }
  }
  if (values.size() == 1) values.assign(od_count, values[0]);
  if (values.size() != od_count) throw InputError("need one path-count bound per OD pair or a single value");
  return values;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  NetworkArgs net;
  std::string method = "dual-universal";
  std::string gamma = "1";
  double epsilon = 1e-6;
  std::size_t max_iters = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out_flows, out_cert, out_manifest;
  double lambda = 1e-5;
  double target_accuracy = 0.0;
  std::string path_count_bounds;
  bool strongly_convex = false;
};

int cmd_solve(const SolveArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const Network net = load(a.net);

  json manifest;
  manifest["tool"] = "eqk";
  manifest["version"] = kVersion;
  manifest["inputs"] = {{"edges", a.net.edges}, {"trips", a.net.trips}, {"instance", a.net.instance},
                        {"model_override", a.net.model}};

  double gamma = 0.0;
  if (a.gamma == "auto") {
    if (!(a.target_accuracy > 0.0)) throw InputError("--gamma auto needs --target-accuracy");
    const auto counts =
        a.path_count_bounds.empty() ? count_paths(net) : parse_counts(a.path_count_bounds, net.od_count());
    gamma = gamma_for_accuracy(net, a.target_accuracy, counts);
    if (!std::isfinite(gamma)) throw InputError("every OD pair has a single path; gamma auto is undefined");
    manifest["path_count_bounds"] = counts;
    manifest["target_accuracy"] = a.target_accuracy;
  } else {
    try {
      std::size_t used = 0;
      gamma = std::stod(a.gamma, &used);
      if (used != a.gamma.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw InputError("--gamma must be a number or 'auto'");
    }
  }

  // Complexity estimates for the two dual families; reported, never used to choose.
  {
    CharacteristicFunction cf(net);
    const auto edges = cf.max_path_edges();
    const double h = static_cast<double>(*std::max_element(edges.begin(), edges.end()));
    const double r = dual_radius_estimate(net);
    const double m2 = h * net.total_demand() * net.total_demand();
    const double m = static_cast<double>(net.edge_count());
    json estimates = {{"dual_radius", r}, {"second_moment_bound", m2}, {"sinks", cf.sink_count()}};
    if (gamma > 0.0) {
      const double l = cf.lipschitz_bound(gamma);
      estimates["lipschitz_bound"] = l;
      estimates["fgm_operations"] = static_cast<double>(cf.sink_count()) * m * std::sqrt(l * r * r / a.epsilon);
    }
    estimates["smd_operations"] = m * m2 * r * r / (a.epsilon * a.epsilon);
    manifest["estimates"] = estimates;
  }

  Certificate cert;
  EdgeFlow flow;
  std::vector<double> time;
  json config;
  if (a.method == "dual-fgm" || a.method == "dual-universal" || a.method == "dual-smd") {
    SolverConfig c;
    c.method = a.method == "dual-fgm" ? DualMethod::kFgm
               : a.method == "dual-smd" ? DualMethod::kSmd
                                        : DualMethod::kUniversal;
    c.gamma = gamma;
    c.epsilon = a.epsilon;
    c.max_iters = a.max_iters;
    c.seed = a.seed;
    c.threads = a.threads;
    config = {{"method", a.method}, {"gamma", c.gamma}, {"epsilon", c.epsilon}, {"max_iters", c.max_iters},
              {"seed", c.seed}, {"threads", c.threads}, {"averaging", c.averaging},
              {"initial_lipschitz_guess", c.initial_lipschitz_guess}, {"smd_check_every", c.smd_check_every}};
    const auto eq = solve_dual(net, c);
    cert = eq.certificate;
    flow = eq.f_star;
    time = eq.t_star.t;
  } else if (a.method == "path-fgm") {
    const auto paths = enumerate_all_paths(net);
    PathSolverConfig c;
    c.gamma = gamma;
    c.epsilon = a.epsilon;
    c.max_iters = a.max_iters;
    c.strongly_convex = a.strongly_convex;
    config = {{"method", a.method}, {"gamma", c.gamma}, {"epsilon", c.epsilon}, {"max_iters", c.max_iters},
              {"strongly_convex", c.strongly_convex}, {"paths", paths.path_count()}};
    const auto sol = solve_path_fgm(net, paths, c);
    cert = sol.certificate;
    flow = sol.f;
    time = times_for(net, flow);
  } else if (a.method == "path-penalty") {
    const auto paths = enumerate_all_paths(net);
    PenaltyConfig c;
    c.gamma = gamma;
    c.lambda = a.lambda;
    c.epsilon = a.epsilon;
    c.max_iters = a.max_iters;
    config = {{"method", a.method}, {"gamma", c.gamma}, {"lambda", c.lambda}, {"epsilon", c.epsilon},
              {"max_iters", c.max_iters}, {"continuation", c.continuation}, {"paths", paths.path_count()}};
    const auto sol = solve_penalty(net, paths, c);
    cert.method = a.method;
    cert.gamma = gamma;
    cert.epsilon = a.epsilon;
    cert.iterations = sol.iterations;
    cert.primal_value = sol.objective;
    cert.dual_value = sol.gap - sol.objective;
    cert.gap = sol.gap;
    cert.converged = sol.converged;
    cert.trace = sol.trace;
    flow = sol.f;
    time = times_for(net, flow);
    manifest["coupling_residual"] = sol.coupling_residual;
  } else {
    throw InputError("unknown method '" + a.method + "'");
  }
  manifest["config"] = config;

  if (!a.out_flows.empty()) {
    auto out = open_out(a.out_flows);
    write_flows(out, net, flow, time);
  }
  if (!a.out_cert.empty()) open_out(a.out_cert) << certificate_json(cert).dump(2) << '\n';
  manifest["outputs"] = {{"flows", a.out_flows}, {"certificate", a.out_cert}, {"manifest", a.out_manifest}};
  manifest["converged"] = cert.converged;
  manifest["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!a.out_manifest.empty()) open_out(a.out_manifest) << manifest.dump(2) << '\n';

  std::cout << a.method << ": iterations " << cert.iterations << ", gap " << format_double(cert.gap)
            << (cert.converged ? "" : " (not converged)") << '\n';
  return cert.converged ? kOk : kNotConverged;
}

int cmd_verify(const std::string& only, std::uint64_t seed) {
  bool all = true;
  for (const auto& r : cli::run_verify(only, seed)) {
    const auto& rep = r.report;
    json line = {{"check", r.check},
                 {"instance", r.instance},
                 {"quantity", rep.quantity},
                 {"oracle", rep.oracle},
                 {"oracle_value", rep.oracle_value},
                 {"method_value", rep.method_value},
                 {"abs_deviation", rep.abs_deviation},
                 {"rel_deviation", rep.rel_deviation},
                 {"tolerance", rep.tolerance},
                 {"pass", rep.pass}};
    std::cout << line.dump() << '\n';
    all = all && rep.pass;
  }
  return all ? kOk : kVerifyFailed;
}

struct PsiArgs {
  NetworkArgs net;
  std::string t_file;
  bool free_flow = false;
  double gamma = 1.0;
  bool compare_layered = false;
};

int cmd_psi(const PsiArgs& a) {
  const Network net = load(a.net);
  std::vector<double> t;
  if (a.free_flow == !a.t_file.empty()) throw InputError("give exactly one of --t-file and --free-flow");
  if (a.free_flow) {
    for (const auto& e : net.edges()) t.push_back(e.cost.t_free);
  } else {
    std::ifstream in(a.t_file);
    if (!in) throw InputError("cannot read '" + a.t_file + "'");
    t = read_times(in, net.edge_count());
  }
  const DualPoint dual{t, a.gamma};
  CharacteristicFunction cf(net);
  EdgeFlow flow;
  const double value = cf.evaluate(t, a.gamma, &flow);
  std::cout << "gamma_psi " << format_double(value) << '\n';

  const auto od_values = cf.od_values(t, a.gamma);
  for (std::size_t w = 0; w < net.od_count(); ++w) {
    const auto& od = net.od_pairs()[w];
    std::cout << "od " << w << ' ' << net.vertex_name(od.origin) << ' ' << net.vertex_name(od.destination) << ' '
              << format_double(od_values[w]) << '\n';
  }
  for (VertexId sink : net.sinks()) {
    const auto order = topological_order(net, sink);
    std::cout << "sink " << net.vertex_name(sink) << (order.valid ? "" : " (cyclic, walks)") << '\n';
    if (!order.valid) continue;
    const auto table = psi_sink_ordered(net, dual, order);
    for (VertexId v = 0; v < net.vertex_count(); ++v) {
      if (table.values[v] == kNoPath) continue;
      std::cout << "  " << net.vertex_name(v) << ' ' << format_double(table.values[v]) << '\n';
    }
  }
  double sq = 0.0, top = 0.0, total = 0.0;
  for (double f : flow) {
    sq += f * f;
    top = std::max(top, f);
    total += f;
  }
  std::cout << "grad_norm_2 " << format_double(std::sqrt(sq)) << '\n'
            << "grad_norm_inf " << format_double(top) << '\n'
            << "grad_mean " << format_double(flow.empty() ? 0.0 : total / static_cast<double>(flow.size())) << '\n';

  if (a.compare_layered) {
    const std::size_t h = std::max<std::size_t>(1, net.vertex_count() - 1);
    double worst = 0.0;
    for (std::size_t w = 0; w < net.od_count(); ++w) {
      const auto& od = net.od_pairs()[w];
      const auto layered = psi_source_layered(net, dual, od.origin, h);
      const double b = layered.b(h, od.destination);
      const double scale = std::max(1.0, std::abs(od_values[w]));
      worst = std::max(worst, std::abs(b - od_values[w]) / scale);
    }
    std::cout << "layered_max_discrepancy " << format_double(worst) << '\n';
  }
  return kOk;
}

int cmd_convert(const std::string& net_in, const std::string& trips_in, const std::string& edges_out,
                const std::string& trips_out) {
  std::ifstream net(net_in), trips(trips_in);
  if (!net) throw InputError("cannot read '" + net_in + "'");
  if (!trips) throw InputError("cannot read '" + trips_in + "'");
  auto e = open_out(edges_out);
  convert_tntp_network(net, e);
  auto t = open_out(trips_out);
  convert_tntp_trips(trips, t);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic traffic equilibrium solver"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "compute an equilibrium and its certificate");
  add_network_flags(solve_cmd, solve.net);
  solve_cmd->add_option("--method", solve.method)
      ->check(CLI::IsMember({"dual-fgm", "dual-universal", "dual-smd", "path-fgm", "path-penalty"}));
  solve_cmd->add_option("--gamma", solve.gamma, "smoothing parameter or 'auto'");
  solve_cmd->add_option("--epsilon", solve.epsilon);
  solve_cmd->add_option("--max-iters", solve.max_iters);
  solve_cmd->add_option("--seed", solve.seed);
  solve_cmd->add_option("--threads", solve.threads);
  solve_cmd->add_option("--out-flows", solve.out_flows);
  solve_cmd->add_option("--out-cert", solve.out_cert);
  solve_cmd->add_option("--out-manifest", solve.out_manifest);
  solve_cmd->add_option("--lambda", solve.lambda, "penalty coefficient for path-penalty");
  solve_cmd->add_option("--target-accuracy", solve.target_accuracy, "epsilon for --gamma auto");
  solve_cmd->add_option("--path-count-bound-per-od", solve.path_count_bounds,
                        "comma-separated |P_w| bounds (or one value for all)");
  solve_cmd->add_flag("--strongly-convex", solve.strongly_convex, "path-fgm with restarts");

  std::string only;
  std::uint64_t verify_seed = 1;
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle checks on built-in instances");
  verify_cmd->add_option("--only", only, "one check group");
  verify_cmd->add_option("--seed", verify_seed);

  PsiArgs psi;
  auto* psi_cmd = app.add_subcommand("psi", "evaluate the characteristic function");
  add_network_flags(psi_cmd, psi.net);
  psi_cmd->add_option("--t-file", psi.t_file, "CSV with edge_index,time columns");
  psi_cmd->add_flag("--free-flow", psi.free_flow);
  psi_cmd->add_option("--gamma", psi.gamma);
  psi_cmd->add_flag("--compare-layered", psi.compare_layered);

  std::string tntp_net, tntp_trips, out_edges, out_trips;
  auto* convert_cmd = app.add_subcommand("convert-tntp", "convert TNTP files to CSV tables");
  convert_cmd->add_option("--net", tntp_net)->required();
  convert_cmd->add_option("--trips", tntp_trips)->required();
  convert_cmd->add_option("--out-edges", out_edges)->required();
  convert_cmd->add_option("--out-trips", out_trips)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve);
    if (*verify_cmd) return cmd_verify(only, verify_seed);
    if (*psi_cmd) return cmd_psi(psi);
    if (*convert_cmd) return cmd_convert(tntp_net, tntp_trips, out_edges, out_trips);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const SolverError& e) {
    std::cerr << "solver failed: " << e.what() << '\n';
    return kNotConverged;
  }
  return kInput;
}
