#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sosmm/document.hpp"

namespace fs = std::filesystem;
using namespace sosmm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DocumentError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DocumentError(path + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Theta box from a box file, else from the document's a-priori intervals.
std::optional<Box> theta_box_of(const EstimationProblem& p, const std::string& box_file) {
  const auto names = p.space->theta_names();
  if (!box_file.empty()) {
    const auto j = read_json(box_file);
    return box_from_json(j.contains("theta_box") ? j.at("theta_box") : j, names, box_file);
  }
  Box b;
  for (const auto& n : names) {
    const auto it = p.bounds.find(n);
    if (it == p.bounds.end()) return std::nullopt;
    b.lower.push_back(it->second.first);
    b.upper.push_back(it->second.second);
  }
  b.validate();
  return b;
}

NamedBounds alpha_bounds_of(const EstimationProblem& p) {
  NamedBounds out;
  for (const auto& [name, iv] : p.bounds)
    if (!p.space->is_theta(p.space->index_of(name))) out[name] = iv;
  return out;
}

std::vector<std::vector<double>> surface_grid(const Box& box) {
  const auto d = box.dim();
  const int res = d == 1 ? 201 : d == 2 ? 41 : std::max(2, static_cast<int>(std::pow(4000.0, 1.0 / double(d))));
  return oracle::tensor_grid(box, res, false);
}

// Grid values of the inner maximum, or a reason it was skipped.
std::optional<std::vector<double>> inner_oracle(const EstimationProblem& p, const std::vector<std::vector<double>>& pts,
                                                std::string& why) {
  std::size_t inner_dims = 0;
  for (auto v : detail::union_vars(p.J, p.S)) inner_dims += !p.space->is_theta(v);
  if (inner_dims > 3) {
    why = "oracle column skipped: inner problem has " + std::to_string(inner_dims) + " variables";
    return std::nullopt;
  }
  const auto ab = alpha_bounds_of(p);
  std::vector<double> vals;
  try {
    for (const auto& th : pts) vals.push_back(oracle::grid_max(p.J, th, p.S, ab, oracle::default_resolution(inner_dims)).value);
  } catch (const std::exception& e) {
    why = std::string("oracle column skipped: ") + e.what();
    return std::nullopt;
  }
  return vals;
}

void write_surface(const fs::path& path, const EstimationProblem& p, const ValueFunctionApprox& v, bool with_oracle,
                   std::vector<std::string>& warnings) {
  const auto pts = surface_grid(v.box);
  std::vector<double> approx;
  for (const auto& th : pts) approx.push_back(v(th));
  std::optional<std::vector<double>> orc;
  if (with_oracle) {
    std::string why;
    orc = inner_oracle(p, pts, why);
    if (!orc) warnings.push_back(why);
  }
  std::ostringstream os;
  write_surface_csv(os, p.space->theta_names(), pts, approx, orc ? &*orc : nullptr);
  write_file(path, os.str());
}

// ------------------------------------------------------------------ solve

struct SolveArgs {
  std::string problem, out = ".", box;
  std::vector<int> taus;
  int order = 0, max_order = 0, box_order = 0;
  bool dense = false, oracle_check = false, verbose = false;
  int outer_res = 0, inner_res = 0;
};

Json oracle_block(const EstimationProblem& p, const TwoStageResult& r, const SolveArgs& a) {
  const auto ell = p.space->theta_count();
  for (auto v : p.M.variables_used())
    if (!p.space->is_theta(v)) return Json{{"skipped", "outer set uses lifting variables"}};
  if (ell > 2) return Json{{"skipped", "more than two parameters"}};
  std::size_t inner_dims = 0;
  for (auto v : detail::union_vars(p.J, p.S)) inner_dims += !p.space->is_theta(v);
  if (inner_dims > 3) return Json{{"skipped", "inner problem has more than three variables"}};
  const Box box = r.theta_box;
  const int outer = a.outer_res > 0 ? a.outer_res : oracle::default_resolution(ell);
  const int inner = a.inner_res > 0 ? a.inner_res : oracle::default_resolution(inner_dims);
  const auto g = oracle::grid_minmax(p.J, p.M, p.S, box, alpha_bounds_of(p), outer, inner);
  double gap = 0.0;
  for (std::size_t k = 0; k < ell; ++k) gap = std::max(gap, std::abs(r.estimate[k] - g.theta[k]));
  return Json{{"theta", g.theta},
              {"value", g.value},
              {"error_estimate", g.error_estimate},
              {"outer_resolution", outer},
              {"inner_resolution", inner},
              {"estimate_gap_inf", gap},
              {"value_gap", r.outer_value - g.value}};
}

int run_solve(const SolveArgs& a) {
  const auto doc = read_problem(a.problem);
  const auto& p = doc.problem;
  TwoStageSettings s;
  s.taus = a.taus;
  s.order = a.order;
  s.max_order = a.max_order;
  s.box_order = a.box_order;
  s.sparse = !a.dense;
  s.solver.verbose = a.verbose;
  if (!a.box.empty()) s.theta_box = theta_box_of(p, a.box);
  const auto r = solve_two_stage(p, s);

  const fs::path out(a.out);
  auto report = make_report(p, r);
  std::vector<std::string> extra;
  write_surface(out / "value_surface.csv", p, r.value_function(), a.oracle_check, extra);
  if (a.oracle_check) report["oracle"] = oracle_block(p, r, a);
  for (auto& w : extra) report["warnings"].push_back(w);
  write_file(out / "report.json", dump(report));

  std::ostringstream os;
  os << "tau,order,lower_bound,status,rows,iterations,flat\n";
  os.precision(12);
  for (const auto& run : r.runs)
    for (const auto& o : run.hierarchy.orders)
      os << run.tau << ',' << o.t << ',' << o.lower_bound << ',' << sdp::to_string(o.status) << ',' << o.rows << ','
         << o.iterations << ',' << (o.flat ? 1 : 0) << '\n';
  write_file(out / "bounds.csv", os.str());

  std::cout << "estimate";
  for (double v : r.estimate) std::cout << ' ' << v;
  std::cout << "\nouter value " << r.outer_value << "\n";
  for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  return r.degraded() ? 2 : 0;
}

// --------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string example, out;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::vector<int> subset;
};

int run_simulate(const SimulateArgs& a) {
  if (a.n == 0) throw UsageError("--n must be positive");
  Instance inst;
  if (a.example == "arx-binary") {
    if (!a.subset.empty()) throw UsageError("--subset applies to miso-static only");
    inst = simulate_quantized_arx(a.seed, a.n);
  } else {
    MisoOptions mo;
    if (!a.subset.empty()) mo.subset = a.subset;
    inst = simulate_miso_static(a.seed, a.n, mo);
  }
  const auto text = serialize(document_from_instance(inst));
  if (a.out.empty() || a.out == "-")
    std::cout << text;
  else
    write_file(a.out, text);
  return 0;
}

// ----------------------------------------------------------- stage commands

struct StageArgs {
  std::string problem, out = ".", box, value_function;
  int tau = 0, order = 0, max_order = 0;
  bool dense = false, verbose = false;
  double padding = 0.0;
  int outer_res = 0, inner_res = 0;
};

int run_value_approx(const StageArgs& a) {
  const auto doc = read_problem(a.problem);
  const auto& p = doc.problem;
  const auto box = theta_box_of(p, a.box);
  if (!box) throw UsageError("value-approx needs theta intervals: add them to a_priori_box or pass --box");
  ValueApproxOptions vo;
  vo.solver.verbose = a.verbose;
  vo.alpha_bounds = alpha_bounds_of(p);
  if (!a.dense && p.cliques) vo.pattern = p.cliques;
  const int tau = a.tau > 0 ? a.tau : (p.J.degree() + 1) / 2;
  const auto v = approximate_value_function(p.J, p.S, *box, tau, vo);
  const fs::path out(a.out);
  std::vector<std::string> warnings;
  write_surface(out / "value_surface.csv", p, v, true, warnings);
  auto j = value_function_json(v, p.space->theta_names());
  j["warnings"] = warnings;
  write_file(out / "value_function.json", dump(j));
  std::cout << "tau " << tau << " objective " << v.objective_value << " status " << sdp::to_string(v.status) << "\n";
  return v.status == sdp::Status::optimal ? 0 : 2;
}

int run_polymin(const StageArgs& a) {
  const auto doc = read_problem(a.problem);
  const auto& p = doc.problem;
  sdp::Settings solver;
  solver.verbose = a.verbose;
  HierarchyResult h;
  if (!a.value_function.empty()) {
    const auto vf = read_json(a.value_function);
    const auto names = names_from_json(vf.at("variables").at("theta"), a.value_function + ": variables.theta");
    if (names != p.space->theta_names()) throw DocumentError(a.value_function + ": parameters differ from the problem's");
    const auto sp = VariableSpace::make(names);
    const auto f = polynomial_from_json(vf.at("polynomial"), sp, a.value_function + ": polynomial");
    std::optional<Box> box = a.box.empty() ? box_from_json(vf.at("box"), names, a.value_function + ": box")
                                           : theta_box_of(p, a.box);
    const int tmin = std::max(a.order, std::max(1, (f.degree() + 1) / 2));
    h = minimize_over_outer_set(f, p, *box, tmin, std::max(tmin, a.max_order), solver, !a.dense);
  } else {
    MomentOptions mo;
    mo.solver = solver;
    mo.bounds = p.bounds;
    if (!a.dense && p.cliques) mo.pattern = p.cliques;
    const int tmin = std::max(a.order, minimal_order(p.J, p.M));
    h = solve_hierarchy(p.J, p.M, tmin, std::max(tmin, a.max_order), mo);
  }
  const fs::path out(a.out);
  auto j = hierarchy_json(h);
  j["variables"] = h.space->names();
  write_file(out / "polymin.json", dump(j));
  std::ostringstream os;
  write_bounds_csv(os, h);
  write_file(out / "bounds.csv", os.str());
  std::cout << "lower bound " << h.orders.back().lower_bound << ", " << h.minimizers.size() << " point(s)\n";
  for (const auto& w : h.warnings) std::cerr << "warning: " << w << "\n";
  bool ok = !h.extraction_failed;
  for (const auto& o : h.orders) ok = ok && o.status == sdp::Status::optimal;
  return ok ? 0 : 2;
}

int run_bound_box(const StageArgs& a) {
  const auto doc = read_problem(a.problem);
  const auto& p = doc.problem;
  sdp::Settings solver;
  solver.verbose = a.verbose;
  const auto r = problem_outer_box(p, a.order, solver, !a.dense, a.padding);
  const auto names = p.space->theta_names();
  Json lo = Json::array(), hi = Json::array();
  for (const auto& o : r.lower_solves) lo.push_back(order_json(o));
  for (const auto& o : r.upper_solves) hi.push_back(order_json(o));
  const Json j{{"theta_box", box_json(names, r.box)}, {"lower_solves", lo}, {"upper_solves", hi}};
  write_file(fs::path(a.out) / "box.json", dump(j));
  for (std::size_t k = 0; k < names.size(); ++k)
    std::cout << names[k] << " in [" << r.box.lower[k] << ", " << r.box.upper[k] << "]\n";
  return 0;
}

int run_oracle(const StageArgs& a) {
  const auto doc = read_problem(a.problem);
  const auto& p = doc.problem;
  const auto box = theta_box_of(p, a.box);
  if (!box) throw UsageError("oracle needs theta intervals: add them to a_priori_box or pass --box");
  for (auto v : p.M.variables_used())
    if (!p.space->is_theta(v)) throw UsageError("oracle: the outer set uses lifting variables");
  std::size_t inner_dims = 0;
  for (auto v : detail::union_vars(p.J, p.S)) inner_dims += !p.space->is_theta(v);
  const int outer = a.outer_res > 0 ? a.outer_res : oracle::default_resolution(box->dim());
  const int inner = a.inner_res > 0 ? a.inner_res : oracle::default_resolution(inner_dims);
  const auto ab = alpha_bounds_of(p);

  std::vector<std::vector<double>> pts;
  std::vector<double> vals;
  auto member = [&](std::span<const double> th) {
    std::vector<double> x(p.space->size(), 0.0);
    std::copy(th.begin(), th.end(), x.begin());
    return p.M.contains(x, oracle::kMembershipTolerance);
  };
  auto inner_max = [&](std::span<const double> th) -> std::optional<oracle::GridMax> {
    try {
      auto g = oracle::grid_max(p.J, th, p.S, ab, inner);
      pts.emplace_back(th.begin(), th.end());
      vals.push_back(g.value);
      return g;
    } catch (const oracle::EmptyGridError&) {
      return std::nullopt;
    }
  };
  if (box->dim() > 4) throw UsageError("oracle refuses more than four parameters");
  const auto g = oracle::grid_minmax(*box, outer, member, inner_max);
  const fs::path out(a.out);
  const Json j{{"theta", g.theta},
               {"value", g.value},
               {"error_estimate", g.error_estimate},
               {"feasible_outer", g.feasible_outer},
               {"outer_resolution", outer},
               {"inner_resolution", inner}};
  write_file(out / "oracle.json", dump(j));
  std::ostringstream os;
  write_surface_csv(os, p.space->theta_names(), pts, vals, nullptr);
  write_file(out / "oracle_surface.csv", os.str());
  std::cout << "grid min-max " << g.value << " at";
  for (double v : g.theta) std::cout << ' ' << v;
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial min-max estimation by moment/SOS relaxations"};
  app.require_subcommand(1);
  int code = 0;

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "two-stage estimate: value function, then outer minimization");
  solve->add_option("--problem", sa.problem, "problem document")->required()->check(CLI::ExistingFile);
  solve->add_option("--tau", sa.taus, "value-function degrees, e.g. 1,2,3")->delimiter(',');
  solve->add_option("--order", sa.order, "first outer relaxation order");
  solve->add_option("--max-order", sa.max_order, "last outer relaxation order");
  solve->add_option("--box-order", sa.box_order, "outer-box relaxation order");
  solve->add_option("--box", sa.box, "theta box file; skips the outer-box stage");
  solve->add_flag("--dense,!--sparse", sa.dense, "ignore the document's cliques")->default_val(false);
  solve->add_flag("--oracle-check", sa.oracle_check, "compare against the grid oracle");
  solve->add_option("--outer-res", sa.outer_res, "oracle outer grid resolution");
  solve->add_option("--inner-res", sa.inner_res, "oracle inner grid resolution");
  solve->add_option("--out", sa.out, "output directory");
  solve->add_flag("-v,--verbose", sa.verbose);
  solve->callback([&] { code = run_solve(sa); });

  SimulateArgs si;
  auto* sim = app.add_subcommand("simulate", "generate an example problem document");
  sim->add_option("--example", si.example)->required()->check(CLI::IsMember({"arx-binary", "miso-static"}));
  sim->add_option("--n", si.n, "number of samples")->required();
  sim->add_option("--seed", si.seed);
  sim->add_option("--subset", si.subset, "kept parameters, e.g. 1,3")->delimiter(',');
  sim->add_option("--out", si.out, "output file (default stdout)");
  sim->callback([&] { code = run_simulate(si); });

  StageArgs st;
  auto stage = [&](const char* name, const char* desc) {
    auto* c = app.add_subcommand(name, desc);
    c->add_option("--problem", st.problem, "problem document")->required()->check(CLI::ExistingFile);
    c->add_option("--out", st.out, "output directory");
    c->add_option("--box", st.box, "theta box file");
    c->add_flag("--dense,!--sparse", st.dense)->default_val(false);
    c->add_flag("-v,--verbose", st.verbose);
    return c;
  };
  auto* va = stage("value-approx", "polynomial upper bound of the inner maximum");
  va->add_option("--tau", st.tau, "half degree of the approximation");
  va->callback([&] { code = run_value_approx(st); });
  auto* pm = stage("polymin", "moment hierarchy for the objective over the outer set");
  pm->add_option("--order", st.order);
  pm->add_option("--max-order", st.max_order);
  pm->add_option("--value-function", st.value_function, "minimize this value function instead")
      ->check(CLI::ExistingFile);
  pm->callback([&] { code = run_polymin(st); });
  auto* bb = stage("bound-box", "outer box of the parameter projection of the outer set");
  bb->add_option("--order", st.order);
  bb->add_option("--padding", st.padding, "absolute padding per edge");
  bb->callback([&] { code = run_bound_box(st); });
  auto* orc = stage("oracle", "grid min-max reference");
  orc->add_option("--outer-res", st.outer_res);
  orc->add_option("--inner-res", st.inner_res);
  orc->callback([&] { code = run_oracle(st); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}
