#include <gtest/gtest.h>

#include "sosmm/document.hpp"

namespace sosmm {
namespace {

TEST(PolynomialRecord, RoundTrip) {
  const auto sp = VariableSpace::make({"x"}, {"y"});
  const auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1);
  const auto p = 0.1 * x.pow(3) - 2.5 * x * y + 1.0 / 3.0;
  const auto q = polynomial_from_json(to_json(p), sp, "p");
  EXPECT_EQ(p, q);
  EXPECT_EQ(to_json(q).dump(), to_json(p).dump());
}

TEST(PolynomialRecord, RepeatedExponentsAccumulate) {
  const auto sp = VariableSpace::make({"x"});
  const Json j = Json::parse(R"({"terms": [{"exps": [1], "coef": 2}, {"exps": [1], "coef": -0.5}]})");
  EXPECT_DOUBLE_EQ(polynomial_from_json(j, sp, "p").coefficient(ExponentVector{1}), 1.5);
}

TEST(PolynomialRecord, ErrorsNameTheTerm) {
  const auto sp = VariableSpace::make({"x"});
  auto check = [&](const char* text, const char* needle) {
    try {
      polynomial_from_json(Json::parse(text), sp, "objective");
      ADD_FAILURE() << "accepted " << text;
    } catch (const DocumentError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  check(R"({"terms": [{"exps": [1], "coef": 1}, {"exps": [1, 2], "coef": 1}]})", "term 1: 'exps' has 2 entries");
  check(R"({"terms": [{"exps": [-1], "coef": 1}]})", "term 0: exponents");
  check(R"({"terms": [{"exps": [1.5], "coef": 1}]})", "term 0: exponents");
  check(R"({"terms": [{"exps": [1]}]})", "term 0: missing numeric 'coef'");
  check(R"({"terms": 3})", "objective: expected");
}

TEST(ProblemDocument, GeneratedDocumentsRoundTrip) {
  for (const auto& inst : {simulate_quantized_arx(3, 8), simulate_miso_static(3, 5)}) {
    const auto doc = document_from_instance(inst);
    const auto text = serialize(doc);
    const auto back = parse_problem(text);
    EXPECT_EQ(serialize(back), text);
    EXPECT_EQ(back.problem.J, inst.problem.J);
    EXPECT_EQ(back.problem.M.equalities().size(), inst.problem.M.equalities().size());
    EXPECT_EQ(back.problem.bounds, inst.problem.bounds);
    EXPECT_EQ(back.problem.cliques->names(), inst.problem.cliques->names());
    EXPECT_EQ(back.problem.kind, inst.problem.kind);
  }
}

TEST(ProblemDocument, MinimalDocumentDefaults) {
  const auto doc = parse_problem(R"({"variables": {"theta": ["t"]}, "objective": {"terms": [{"exps": [2], "coef": 1}]}})");
  EXPECT_EQ(doc.problem.kind, ProblemKind::general_minmax);
  EXPECT_TRUE(doc.problem.M.is_entire_space());
  EXPECT_FALSE(doc.problem.cliques.has_value());
  EXPECT_EQ(parse_problem(serialize(doc)).problem.J, doc.problem.J);
}

TEST(ProblemDocument, RejectsBadFields) {
  const std::string head = R"({"variables": {"theta": ["t"], "alpha": ["a"]}, "objective": {"terms": []})";
  EXPECT_THROW(parse_problem(head + R"(, "kind": "other"})"), DocumentError);
  EXPECT_THROW(parse_problem(head + R"(, "a_priori_box": {"t": [1, 0]}})"), DocumentError);
  EXPECT_THROW(parse_problem(head + R"(, "a_priori_box": {"z": [0, 1]}})"), std::exception);
  EXPECT_THROW(parse_problem(head + R"(, "cliques": [["t", "q"]]})"), DocumentError);
  EXPECT_THROW(parse_problem(R"({"variables": {"theta": ["t", "t"]}, "objective": {"terms": []}})"), DocumentError);
  EXPECT_THROW(parse_problem(R"({"objective": {"terms": []}})"), DocumentError);
  // Conditional-center documents need a theta-free inner set.
  EXPECT_THROW(parse_problem(head + R"(, "inner_set": {"ineq": [{"terms": [{"exps": [1, 0], "coef": 1}]}]},
                                       "kind": "conditional_center"})"),
               DocumentError);
}

TEST(Report, FieldsAndTimingStrip) {
  const auto sp = VariableSpace::make({"t"}, {"a"});
  const auto t = Polynomial::variable(sp, "t"), a = Polynomial::variable(sp, "a");
  EstimationProblem p;
  p.space = sp;
  p.J = (t - a).pow(2);
  p.S = SemialgebraicSet(sp, {1.0 - a * a}, {});
  p.M = SemialgebraicSet(sp, {1.0 - t * t}, {});
  p.bounds = {{"a", {-1.0, 1.0}}};
  const auto r = solve_two_stage(p);
  const auto j = make_report(p, r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  for (const char* need : {"estimate", "outer_value", "bounds_per_order", "residuals", "timings", "warnings"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), need), keys.end()) << need;
  const auto s = without_timings(j);
  EXPECT_FALSE(s.contains("timings"));
  EXPECT_EQ(s["estimate"], j["estimate"]);
  EXPECT_EQ(without_timings(make_report(p, solve_two_stage(p))).dump(), s.dump());
}

}  // namespace
}  // namespace sosmm
