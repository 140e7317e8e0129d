#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <random>

#include "gridmesh/admm.hpp"
#include "gridmesh/aladin.hpp"
#include "gridmesh/casefile.hpp"
#include "gridmesh/centralized.hpp"
#include "gridmesh/topology.hpp"

#include <json.hpp>

using nlohmann::json;
using namespace gridmesh;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitBudget = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write " + path);
  out << text;
}

std::vector<CaseData> load_cases(const std::vector<std::string>& paths) {
  std::vector<CaseData> cases;
  cases.reserve(paths.size());
  for (const auto& p : paths) cases.push_back(load_case(p));
  return cases;
}

ConnectionSpec load_spec_or_empty(const std::string& path, size_t n_cases) {
  if (!path.empty()) return load_connection_spec(path);
  if (n_cases != 1)
    throw CaseError("--conn is required when more than one case file is given");
  return ConnectionSpec{};
}

int thread_count(int requested) {
  int n = requested > 0 ? requested : 1;
  if (const char* env = std::getenv("GRIDMESH_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

json solution_json(const CaseData& merged, const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                   const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  json buses = json::array();
  for (size_t k = 0; k < merged.buses.size(); ++k)
    buses.push_back({{"id", merged.buses[k].id},
                     {"vm", vm[k]},
                     {"va", va[k]},
                     {"p", p[k]},
                     {"q", q[k]}});
  return json{{"baseMVA", merged.base_mva}, {"bus", buses}};
}

/// Core-bus entries of the region states gathered back into merged bus order.
void gather_solution(const DistProblem& prob, const std::vector<Eigen::VectorXd>& chi,
                     Eigen::VectorXd& vm, Eigen::VectorXd& va, Eigen::VectorXd& p,
                     Eigen::VectorXd& q) {
  const int n = static_cast<int>(prob.merged.merged.buses.size());
  vm.resize(n);
  va.resize(n);
  p.resize(n);
  q.resize(n);
  for (size_t i = 0; i < prob.regions.size(); ++i) {
    const RegionModel& m = prob.regions[i];
    for (int j = 0; j < m.n_core; ++j) {
      const int pos = prob.merged.merged.bus_index(m.core_global_ids[j]);
      va[pos] = chi[i][m.th(j)];
      vm[pos] = chi[i][m.vm(j)];
      p[pos] = chi[i][m.p(j)];
      q[pos] = chi[i][m.q(j)];
    }
  }
}

int report_validation(const DistProblem& prob, const std::vector<Eigen::VectorXd>& chi) {
  const PFSolution ref = solve_newton_raphson(prob.merged.merged);
  Eigen::VectorXd vm, va, p, q;
  gather_solution(prob, chi, vm, va, p, q);
  const double dvm = (vm - ref.vm).lpNorm<Eigen::Infinity>();
  const double dva = (va - ref.va).lpNorm<Eigen::Infinity>();
  const double dp = (p - ref.p).lpNorm<Eigen::Infinity>();
  const double dq = (q - ref.q).lpNorm<Eigen::Infinity>();
  std::printf("validate: max|dvm|=%.3e max|dva|=%.3e max|dp|=%.3e max|dq|=%.3e\n", dvm, dva, dp,
              dq);
  return 0;
}

std::vector<Eigen::VectorXd> perturbed_start(const DistProblem& prob, double sigma,
                                             uint64_t seed) {
  const PFSolution ref = solve_newton_raphson(prob.merged.merged);
  std::vector<Eigen::VectorXd> start = scatter_states(prob, ref.vm, ref.va, ref.p, ref.q);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& s : start)
    for (int j = 0; j < s.size(); ++j) s[j] += sigma * normal(rng);
  return start;
}

struct SolveOptions {
  std::vector<std::string> cases;
  std::string conn, trace_path, out_path, plot_path;
  std::string method = "aladin";
  std::string formulation = "least-squares";
  std::string hessian = "gauss-newton";
  double rho = -1.0, nu = 1e4, tol = 1e-10, inner_tol = 1e-12, lambda0 = 0.01;
  int max_iter = -1, threads = 1;
  bool validate = false, timing = false;
  double sigma = 0.0;
  uint64_t seed = 0;
};

Formulation parse_formulation(const std::string& s) {
  if (s == "feasibility") return Formulation::Feasibility;
  if (s == "least-squares" || s == "ls") return Formulation::LeastSquares;
  throw CaseError("unknown formulation '" + s + "'");
}

HessianMethod parse_hessian(const std::string& s) {
  if (s == "gauss-newton") return HessianMethod::GaussNewton;
  if (s == "finite-diff") return HessianMethod::FiniteDiff;
  if (s == "bfgs") return HessianMethod::BFGS;
  if (s == "lbfgs") return HessianMethod::LBFGS;
  throw CaseError("unknown hessian '" + s + "'");
}

int run_solve(const SolveOptions& opt) {
  const std::vector<CaseData> cases = load_cases(opt.cases);
  const ConnectionSpec spec = load_spec_or_empty(opt.conn, cases.size());
  const Formulation form = parse_formulation(opt.formulation);
  DistProblem prob = build_problem(cases, spec, form);

  std::vector<Eigen::VectorXd> zeta0;
  if (opt.sigma != 0.0) zeta0 = perturbed_start(prob, opt.sigma, opt.seed);

  IterationTrace trace;
  std::vector<Eigen::VectorXd> chi;
  SolveStatus status;
  int iterations = 0;
  std::string message;

  if (opt.method == "admm") {
    AdmmConfig cfg;
    cfg.rho = opt.rho > 0 ? opt.rho : 1e3;
    cfg.max_iter = opt.max_iter > 0 ? opt.max_iter : 200;
    cfg.tol = opt.tol;
    cfg.inner_tol = opt.inner_tol;
    cfg.lambda0 = opt.lambda0;
    cfg.zeta0 = zeta0;
    cfg.threads = thread_count(opt.threads);
    AdmmResult r = admm_solve(prob, cfg);
    trace = std::move(r.trace);
    chi = std::move(r.chi);
    status = r.status;
    iterations = r.iterations;
    message = r.message;
  } else if (opt.method == "aladin") {
    AladinConfig cfg;
    cfg.rho = opt.rho > 0 ? opt.rho : 1e2;
    cfg.nu = opt.nu;
    cfg.hessian = parse_hessian(opt.hessian);
    cfg.max_iter = opt.max_iter > 0 ? opt.max_iter : 50;
    cfg.tol = opt.tol;
    cfg.inner_tol = opt.inner_tol;
    cfg.lambda0 = opt.lambda0;
    cfg.zeta0 = zeta0;
    cfg.threads = thread_count(opt.threads);
    AladinResult r = aladin_solve(prob, cfg);
    trace = std::move(r.trace);
    chi = std::move(r.chi);
    status = r.status;
    iterations = r.iterations;
    message = r.message;
  } else {
    throw CaseError("unknown method '" + opt.method + "'");
  }

  if (!opt.trace_path.empty()) write_file(opt.trace_path, trace.to_csv(opt.timing));
  if (!opt.plot_path.empty()) write_file(opt.plot_path, trace.to_plot_data());
  if (!opt.out_path.empty()) {
    Eigen::VectorXd vm, va, p, q;
    gather_solution(prob, chi, vm, va, p, q);
    json sol = solution_json(prob.merged.merged, vm, va, p, q);
    sol["iterations"] = iterations;
    sol["converged"] = status == SolveStatus::Converged;
    write_file(opt.out_path, sol.dump(2) + "\n");
  }

  std::printf("%s %s: %s after %d iterations\n", opt.method.c_str(), opt.formulation.c_str(),
              status == SolveStatus::Converged        ? "converged"
              : status == SolveStatus::IterationLimit ? "iteration limit"
                                                      : "failed",
              iterations);
  if (!message.empty()) std::printf("  %s\n", message.c_str());
  if (opt.validate && status == SolveStatus::Converged) report_validation(prob, chi);

  if (status == SolveStatus::Converged) return kExitConverged;
  if (status == SolveStatus::IterationLimit) return kExitBudget;
  return kExitNumerical;
}

int run_perturb(SolveOptions opt, const std::vector<double>& sigmas,
                const std::string& trace_prefix, double consensus_target) {
  const std::vector<CaseData> cases = load_cases(opt.cases);
  const ConnectionSpec spec = load_spec_or_empty(opt.conn, cases.size());
  DistProblem prob = build_problem(cases, spec, parse_formulation(opt.formulation));

  for (double sigma : sigmas) {
    AdmmConfig cfg;
    cfg.rho = opt.rho > 0 ? opt.rho : 1e3;
    cfg.max_iter = opt.max_iter > 0 ? opt.max_iter : 500;
    cfg.tol = opt.tol;
    cfg.inner_tol = opt.inner_tol;
    cfg.lambda0 = opt.lambda0;
    cfg.zeta0 = perturbed_start(prob, sigma, opt.seed);
    cfg.threads = thread_count(opt.threads);
    const AdmmResult r = admm_solve(prob, cfg);

    int to_target = -1;
    for (int it = 1; it <= r.iterations; ++it) {
      const TraceRow* row = r.trace.global_row(it);
      if (row && row->consensus_inf <= consensus_target) {
        to_target = it;
        break;
      }
    }
    std::printf("sigma=%g iterations_to_%g=%d final_consensus=%.3e status=%s\n", sigma,
                consensus_target, to_target,
                r.iterations ? r.trace.global_row(r.iterations)->consensus_inf : 0.0,
                r.status == SolveStatus::Converged        ? "converged"
                : r.status == SolveStatus::IterationLimit ? "iteration-limit"
                                                          : "failed");
    if (!trace_prefix.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "%ssigma%g.csv", trace_prefix.c_str(), sigma);
      write_file(name, r.trace.to_csv(opt.timing));
    }
  }
  return kExitConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridmesh: distributed AC power flow via ADMM and ALADIN"};
  app.require_subcommand(1);

  // merge
  auto* merge = app.add_subcommand("merge", "merge regional cases into one case file");
  std::vector<std::string> merge_cases_paths;
  std::string merge_conn, merge_out = "merged.m", merge_sidecar;
  merge->add_option("cases", merge_cases_paths, "regional case files")->required();
  merge->add_option("--conn", merge_conn, "connection spec (json)");
  merge->add_option("--out", merge_out, "merged case output path");
  merge->add_option("--sidecar", merge_sidecar, "sidecar json output path");

  // split
  auto* split = app.add_subcommand("split", "report region core/copy structure");
  std::vector<std::string> split_cases_paths;
  std::string split_conn, split_out;
  split->add_option("cases", split_cases_paths, "regional case files")->required();
  split->add_option("--conn", split_conn, "connection spec (json)");
  split->add_option("--out", split_out, "region summary json output path");

  // solve-central
  auto* central = app.add_subcommand("solve-central", "centralized Newton-Raphson power flow");
  std::string central_case, central_out;
  double central_tol = 1e-10;
  int central_max_iter = 30;
  central->add_option("case", central_case, "case file")->required();
  central->add_option("--tol", central_tol, "mismatch tolerance");
  central->add_option("--max-iter", central_max_iter, "iteration limit");
  central->add_option("--out", central_out, "solution json output path");

  // solve
  auto* solve = app.add_subcommand("solve", "distributed solve (admm or aladin)");
  SolveOptions opt;
  solve->add_option("cases", opt.cases, "regional case files")->required();
  solve->add_option("--conn", opt.conn, "connection spec (json)");
  solve->add_option("--method", opt.method, "admm | aladin");
  solve->add_option("--formulation", opt.formulation, "feasibility | least-squares");
  solve->add_option("--hessian", opt.hessian, "gauss-newton | finite-diff | bfgs | lbfgs");
  solve->add_option("--rho", opt.rho, "penalty parameter");
  solve->add_option("--nu", opt.nu, "aladin proximal weight");
  solve->add_option("--tol", opt.tol, "outer tolerance");
  solve->add_option("--inner-tol", opt.inner_tol, "local solver tolerance");
  solve->add_option("--lambda0", opt.lambda0, "initial dual value");
  solve->add_option("--max-iter", opt.max_iter, "outer iteration limit");
  solve->add_option("--threads", opt.threads, "region-parallel threads");
  solve->add_option("--trace", opt.trace_path, "trace csv output path");
  solve->add_option("--plot", opt.plot_path, "gnuplot data output path");
  solve->add_option("--out", opt.out_path, "solution json output path");
  solve->add_option("--sigma", opt.sigma, "perturb the start by sigma * N(0,1)");
  solve->add_option("--seed", opt.seed, "perturbation seed");
  solve->add_flag("--validate", opt.validate, "compare against centralized Newton-Raphson");
  solve->add_flag("--timing", opt.timing, "record wall times in the trace");

  // perturb
  auto* perturb = app.add_subcommand("perturb", "admm runs from perturbed starts");
  SolveOptions popt;
  popt.method = "admm";
  popt.formulation = "feasibility";
  popt.tol = 1e-10;
  std::vector<double> sigmas = {0.01, 0.1, 1.0, 10.0};
  std::string trace_prefix;
  double consensus_target = 1e-3;
  perturb->add_option("cases", popt.cases, "regional case files")->required();
  perturb->add_option("--conn", popt.conn, "connection spec (json)");
  perturb->add_option("--formulation", popt.formulation, "feasibility | least-squares");
  perturb->add_option("--sigmas", sigmas, "perturbation magnitudes");
  perturb->add_option("--seed", popt.seed, "rng seed");
  perturb->add_option("--rho", popt.rho, "penalty parameter");
  perturb->add_option("--tol", popt.tol, "outer tolerance");
  perturb->add_option("--max-iter", popt.max_iter, "outer iteration limit");
  perturb->add_option("--threads", popt.threads, "region-parallel threads");
  perturb->add_option("--trace-prefix", trace_prefix, "per-sigma trace file prefix");
  perturb->add_option("--consensus-target", consensus_target, "reported iteration threshold");
  perturb->add_flag("--timing", popt.timing, "record wall times in the traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*merge) {
      const std::vector<CaseData> cases = load_cases(merge_cases_paths);
      const ConnectionSpec spec = load_spec_or_empty(merge_conn, cases.size());
      const MergeResult mr = merge_cases(cases, spec);
      write_file(merge_out, write_matpower_case(mr.merged));
      if (!merge_sidecar.empty()) write_file(merge_sidecar, mr.sidecar_json());
      std::printf("merged %zu regions into %zu buses -> %s\n", cases.size(),
                  mr.merged.buses.size(), merge_out.c_str());
      return kExitConverged;
    }
    if (*split) {
      const std::vector<CaseData> cases = load_cases(split_cases_paths);
      const ConnectionSpec spec = load_spec_or_empty(split_conn, cases.size());
      const std::vector<RegionModel> regions = split_cases(cases, spec);
      json out = json::array();
      for (const RegionModel& m : regions) {
        json copies = json::array();
        for (const CopyBusRef& c : m.copies)
          copies.push_back({{"owner_region", c.owner_region},
                            {"owner_bus", c.owner_bus},
                            {"global_id", c.global_id},
                            {"connection", c.conn}});
        out.push_back({{"region", m.index},
                       {"n_core", m.n_core},
                       {"n_copy", m.n_copy},
                       {"n_state", m.n_state()},
                       {"copies", copies}});
        std::printf("region %d: %d core, %d copy, %d states\n", m.index, m.n_core, m.n_copy,
                    m.n_state());
      }
      if (!split_out.empty()) write_file(split_out, out.dump(2) + "\n");
      return kExitConverged;
    }
    if (*central) {
      const CaseData c = load_case(central_case);
      const PFSolution sol = solve_newton_raphson(c, central_tol, central_max_iter);
      std::printf("converged in %d iterations, mismatch %.3e\n", sol.iterations, sol.mismatch);
      if (!central_out.empty()) {
        json out = solution_json(c, sol.vm, sol.va, sol.p, sol.q);
        out["iterations"] = sol.iterations;
        out["mismatch"] = sol.mismatch;
        write_file(central_out, out.dump(2) + "\n");
      }
      return kExitConverged;
    }
    if (*solve) return run_solve(opt);
    if (*perturb) return run_perturb(popt, sigmas, trace_prefix, consensus_target);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const CaseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const SolveError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
