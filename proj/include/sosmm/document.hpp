#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sosmm/estimation.hpp"

namespace sosmm {

using Json = nlohmann::ordered_json;

class DocumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------ polynomials

inline Json to_json(const Polynomial& p) {
  Json terms = Json::array();
  for (const auto& [e, c] : p.terms()) terms.push_back(Json{{"exps", e.data()}, {"coef", c}});
  return Json{{"terms", std::move(terms)}};
}

inline Polynomial polynomial_from_json(const Json& j, const SpacePtr& space, const std::string& where) {
  if (!j.is_object() || !j.contains("terms") || !j.at("terms").is_array())
    throw DocumentError(where + ": expected an object with a 'terms' array");
  Polynomial p(space);
  const auto& terms = j.at("terms");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    const std::string at = where + ": term " + std::to_string(i);
    if (!t.is_object()) throw DocumentError(at + ": expected an object");
    if (!t.contains("exps") || !t.at("exps").is_array()) throw DocumentError(at + ": missing 'exps' array");
    if (!t.contains("coef") || !t.at("coef").is_number()) throw DocumentError(at + ": missing numeric 'coef'");
    const auto& ex = t.at("exps");
    if (ex.size() != space->size())
      throw DocumentError(at + ": 'exps' has " + std::to_string(ex.size()) + " entries, expected " +
                          std::to_string(space->size()));
    std::vector<int> e;
    for (const auto& v : ex) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw DocumentError(at + ": exponents must be non-negative integers");
      e.push_back(v.get<int>());
    }
    p.add_term(ExponentVector(std::move(e)), t.at("coef").get<double>());
  }
  return p;
}

// ------------------------------------------------------------------ sets

inline Json to_json(const SemialgebraicSet& s) {
  Json ineq = Json::array(), eq = Json::array();
  for (const auto& g : s.inequalities()) ineq.push_back(to_json(g));
  for (const auto& h : s.equalities()) eq.push_back(to_json(h));
  return Json{{"ineq", std::move(ineq)}, {"eq", std::move(eq)}};
}

inline SemialgebraicSet set_from_json(const Json& j, const SpacePtr& space, const std::string& where) {
  SemialgebraicSet s(space);
  if (j.is_null()) return s;
  if (!j.is_object()) throw DocumentError(where + ": expected an object with 'ineq' and 'eq'");
  for (const char* key : {"ineq", "eq"}) {
    if (!j.contains(key)) continue;
    const auto& list = j.at(key);
    if (!list.is_array()) throw DocumentError(where + "." + key + ": expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto p = polynomial_from_json(list[i], space, where + "." + key + "[" + std::to_string(i) + "]");
      std::string(key) == "ineq" ? s.add_inequality(std::move(p)) : s.add_equality(std::move(p));
    }
  }
  return s;
}

// -------------------------------------------------------------- documents

struct ProblemDocument {
  EstimationProblem problem;
  Json dataset;  // generator metadata, carried through unchanged
};

inline Json dataset_json(const Dataset& d) {
  Json j{{"example", d.example}, {"n", d.N}, {"seed", d.seed}};
  if (!d.subset.empty()) j["subset"] = d.subset;
  j["theta_true"] = d.theta_true;
  return j;
}

inline Json to_json(const ProblemDocument& doc) {
  const auto& p = doc.problem;
  Json j;
  j["variables"] = Json{{"theta", p.space->theta_names()}, {"alpha", p.space->alpha_names()}};
  j["objective"] = to_json(p.J);
  j["outer_set"] = to_json(p.M);
  j["inner_set"] = to_json(p.S);
  Json box = Json::object();
  for (const auto& [name, iv] : p.bounds) box[name] = {iv.first, iv.second};
  j["a_priori_box"] = std::move(box);
  if (p.cliques) {
    j["cliques"] = p.cliques->names();
    j["rip_valid"] = p.cliques->rip_valid();
  }
  j["kind"] = to_string(p.kind);
  if (!p.notes.empty()) j["notes"] = p.notes;
  if (!doc.dataset.is_null()) j["dataset"] = doc.dataset;
  return j;
}

inline std::vector<std::string> names_from_json(const Json& j, const std::string& where) {
  if (j.is_null()) return {};
  if (!j.is_array()) throw DocumentError(where + ": expected an array of names");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw DocumentError(where + ": names must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline ProblemDocument problem_from_json(const Json& j) {
  if (!j.is_object()) throw DocumentError("document: expected a JSON object");
  for (const char* key : {"variables", "objective"})
    if (!j.contains(key)) throw DocumentError(std::string("document: missing field '") + key + "'");
  const auto& vars = j.at("variables");
  if (!vars.is_object()) throw DocumentError("variables: expected {\"theta\": [...], \"alpha\": [...]}");
  SpacePtr space;
  try {
    space = VariableSpace::make(names_from_json(vars.value("theta", Json()), "variables.theta"),
                                names_from_json(vars.value("alpha", Json()), "variables.alpha"));
  } catch (const std::invalid_argument& e) {
    throw DocumentError(std::string("variables: ") + e.what());
  }

  ProblemDocument doc;
  auto& p = doc.problem;
  p.space = space;
  p.J = polynomial_from_json(j.at("objective"), space, "objective");
  p.M = set_from_json(j.value("outer_set", Json()), space, "outer_set");
  p.S = set_from_json(j.value("inner_set", Json()), space, "inner_set");
  if (j.contains("a_priori_box")) {
    const auto& box = j.at("a_priori_box");
    if (!box.is_object()) throw DocumentError("a_priori_box: expected {name: [lo, hi]}");
    for (const auto& [name, iv] : box.items()) {
      if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
        throw DocumentError("a_priori_box." + name + ": expected [lo, hi]");
      p.bounds[name] = {iv[0].get<double>(), iv[1].get<double>()};
    }
  }
  if (j.contains("cliques")) {
    const auto& cl = j.at("cliques");
    if (!cl.is_array()) throw DocumentError("cliques: expected an array of name lists");
    std::vector<std::vector<std::string>> groups;
    for (std::size_t i = 0; i < cl.size(); ++i) groups.push_back(names_from_json(cl[i], "cliques[" + std::to_string(i) + "]"));
    try {
      p.cliques = SparsityPattern::from_names(space, groups);
    } catch (const std::exception& e) {
      throw DocumentError(std::string("cliques: ") + e.what());
    }
    p.cliques->verify();
  }
  try {
    p.kind = parse_kind(j.value("kind", std::string("general_minmax")));
  } catch (const std::invalid_argument& e) {
    throw DocumentError(std::string("kind: ") + e.what());
  }
  p.notes = j.value("notes", std::string());
  if (j.contains("dataset")) doc.dataset = j.at("dataset");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DocumentError(std::string("document: ") + e.what());
  }
  return doc;
}

inline ProblemDocument parse_problem(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DocumentError(std::string("JSON syntax: ") + e.what());
  }
  return problem_from_json(j);
}

inline ProblemDocument read_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DocumentError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

inline std::string serialize(const ProblemDocument& doc) { return to_json(doc).dump(2) + "\n"; }

inline ProblemDocument document_from_instance(const Instance& inst) {
  ProblemDocument doc{inst.problem, dataset_json(inst.data)};
  doc.dataset["generating_point"] = inst.generating_point;
  return doc;
}

// --------------------------------------------------------------- results

inline Json box_json(const std::vector<std::string>& names, const Box& b) {
  Json j = Json::object();
  for (std::size_t k = 0; k < b.dim(); ++k) j[names[k]] = {b.lower[k], b.upper[k]};
  return j;
}

inline Box box_from_json(const Json& j, const std::vector<std::string>& names, const std::string& where) {
  Box b;
  for (const auto& n : names) {
    if (!j.contains(n)) throw DocumentError(where + ": no interval for " + n);
    const auto& iv = j.at(n);
    if (!iv.is_array() || iv.size() != 2) throw DocumentError(where + "." + n + ": expected [lo, hi]");
    b.lower.push_back(iv[0].get<double>());
    b.upper.push_back(iv[1].get<double>());
  }
  b.validate();
  return b;
}

inline Json residuals_json(const sdp::Residuals& r) {
  return Json{{"primal", r.primal_feas}, {"dual", r.dual_feas}, {"relative_gap", r.relative_gap}};
}

inline Json order_json(const OrderResult& o) {
  return Json{{"order", o.t},
              {"lower_bound", o.lower_bound},
              {"status", sdp::to_string(o.status)},
              {"rows", o.rows},
              {"iterations", o.iterations},
              {"ranks", o.ranks},
              {"flat", o.flat}};
}

inline Json hierarchy_json(const HierarchyResult& h) {
  Json orders = Json::array();
  for (const auto& o : h.orders) orders.push_back(order_json(o));
  Json j{{"bounds_per_order", std::move(orders)}};
  j["flat_at"] = h.flat_at ? Json(*h.flat_at) : Json();
  j["minimizers"] = h.minimizers;
  j["minimizer_values"] = h.minimizer_values;
  j["minimizer_violations"] = h.minimizer_violations;
  j["extraction_failed"] = h.extraction_failed;
  j["warnings"] = h.warnings;
  return j;
}

inline Json value_function_json(const ValueFunctionApprox& v, const std::vector<std::string>& theta) {
  return Json{{"variables", Json{{"theta", theta}}},
              {"tau", v.tau},
              {"polynomial", to_json(v.polynomial)},
              {"objective_value", v.objective_value},
              {"box", box_json(theta, v.box)},
              {"status", sdp::to_string(v.status)},
              {"rows", v.rows},
              {"cliques", v.cliques},
              {"certificate_residual", v.certificate_residual},
              {"residuals", residuals_json(v.residuals)}};
}

/// report.json.  Every wall-clock figure lives under "timings".
inline Json make_report(const EstimationProblem& p, const TwoStageResult& r) {
  const auto theta = p.space->theta_names();
  Json est = Json::object();
  for (std::size_t k = 0; k < theta.size(); ++k) est[theta[k]] = r.estimate[k];

  Json j;
  j["kind"] = to_string(p.kind);
  j["status"] = r.degraded() ? "degraded" : "optimal";
  j["estimate"] = std::move(est);
  j["outer_value"] = r.outer_value;
  j["theta_box"] = box_json(theta, r.theta_box);
  j["sparse"] = r.sparse;

  Json per = Json::array();
  for (const auto& run : r.runs) {
    Json orders = Json::array();
    for (const auto& o : run.hierarchy.orders) orders.push_back(order_json(o));
    per.push_back(Json{{"tau", run.tau},
                       {"stage1_objective", run.approx.objective_value},
                       {"stage1_status", sdp::to_string(run.approx.status)},
                       {"stage1_rows", run.approx.rows},
                       {"theta", run.theta},
                       {"value", run.value},
                       {"orders", std::move(orders)}});
  }
  j["bounds_per_order"] = std::move(per);
  j["running_best"] = r.best.values;
  j["value_function"] = to_json(r.value_function().polynomial);

  const auto& best = r.runs[r.best_run];
  j["residuals"] = Json{{"outer_set", r.feasibility_residual},
                        {"stage1_certificate", best.approx.certificate_residual},
                        {"stage1_sdp", residuals_json(best.approx.residuals)},
                        {"stage2_sdp", best.hierarchy.orders.empty() ? Json()
                                                                     : residuals_json(best.hierarchy.orders.back().residuals)}};

  Json runs = Json::array();
  double total = r.box_seconds;
  for (const auto& run : r.runs) {
    runs.push_back(Json{{"tau", run.tau}, {"value_function", run.stage1_seconds}, {"outer_minimization", run.stage2_seconds}});
    total += run.stage1_seconds + run.stage2_seconds;
  }
  j["timings"] = Json{{"outer_box", r.box_seconds}, {"runs", std::move(runs)}, {"total", total}};
  j["warnings"] = r.warnings;
  return j;
}

inline Json without_timings(Json j) {
  if (j.is_object()) {
    j.erase("timings");
    for (auto& [k, v] : j.items()) v = without_timings(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_timings(v);
  }
  return j;
}

}  // namespace sosmm
