#include <gtest/gtest.h>

#include "clbforge/error.hpp"
#include "clbforge/harness.hpp"
#include "clbforge/source_model.hpp"
#include "source_fixtures.hpp"

namespace clbforge {
namespace {

using testing::kListingSource;

const VarDecl* find_var(const std::vector<VarDecl>& vs, std::string_view name) {
  for (const auto& v : vs)
    if (v.name == name) return &v;
  return nullptr;
}

struct Scanned {
  TranslationUnit tu;
  std::vector<QualifiedCondition> qcs;
};

Scanned scan(std::string_view src, Config cfg = {}) {
  Scanned s{load_translation_unit(src), {}};
  s.qcs = find_qualified_conditions(s.tu, s.tu.macros, cfg);
  return s;
}

TEST(ParseTranslationUnit, ListingFunction) {
  const auto tu = load_translation_unit(kListingSource);
  ASSERT_EQ(tu.functions.size(), 1u);
  const auto& f = tu.functions[0];
  EXPECT_EQ(f.name, "funB");
  ASSERT_EQ(f.params.size(), 1u);
  EXPECT_EQ(f.params[0].name, "val");
  EXPECT_EQ(f.params[0].kind, VarKind::ScalarInt);
  const auto* a = find_var(f.locals, "a");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->kind, VarKind::ScalarInt);
  EXPECT_TRUE(f.span.contains(f.body_span));
}

TEST(ParseTranslationUnit, DeclarationsOnly) {
  EXPECT_TRUE(load_translation_unit(testing::kDeclarationsOnlySource).functions.empty());
}

TEST(ParseTranslationUnit, UnknownAggregateLocalIsOther) {
  const auto tu = load_translation_unit("struct s { int a; };\nint f(void) {\n  struct s v;\n  mystery_t m;\n  return 0;\n}\n");
  ASSERT_EQ(tu.functions.size(), 1u);
  const auto* v = find_var(tu.functions[0].locals, "v");
  ASSERT_NE(v, nullptr);
  EXPECT_EQ(v->kind, VarKind::Other);
}

TEST(ParseTranslationUnit, VariableKinds) {
  const auto tu = load_translation_unit(
      "typedef unsigned int u32;\n"
      "void f(int *p, char buf[], unsigned short us, u32 t) {\n"
      "  int a = 1, b = 2;\n"
      "  const char *msg = \"x\";\n"
      "  int arr[4];\n"
      "  double d;\n"
      "  unsigned long ul;\n"
      "  register int r;\n"
      "  (void)a;\n"
      "}\n");
  ASSERT_EQ(tu.functions.size(), 1u);
  const auto& f = tu.functions[0];
  EXPECT_EQ(find_var(f.params, "p")->kind, VarKind::AddressValued);
  EXPECT_EQ(find_var(f.params, "buf")->kind, VarKind::AddressValued);
  EXPECT_EQ(find_var(f.params, "us")->kind, VarKind::ScalarInt);
  EXPECT_EQ(find_var(f.params, "t")->kind, VarKind::ScalarInt);
  EXPECT_EQ(find_var(f.locals, "a")->kind, VarKind::Other);  // multiple declarators
  EXPECT_EQ(find_var(f.locals, "msg")->kind, VarKind::AddressValued);
  EXPECT_EQ(find_var(f.locals, "arr")->kind, VarKind::Other);
  EXPECT_EQ(find_var(f.locals, "d")->value_class, ValueClass::Floating);
  EXPECT_EQ(find_var(f.locals, "ul")->value_class, ValueClass::Wide);
  EXPECT_EQ(find_var(f.locals, "r")->kind, VarKind::Other);
}

TEST(ParseTranslationUnit, FunctionsSortedAndDisjoint) {
  const auto tu = load_translation_unit(
      "static int a(void) { return 1; }\nint b(int x) { if (x) { return 2; } return 3; }\n"
      "int (*table[2])(void);\nvoid c(void) __attribute__((unused));\nvoid c(void) { }\n");
  ASSERT_EQ(tu.functions.size(), 3u);
  for (std::size_t i = 1; i < tu.functions.size(); ++i)
    EXPECT_LE(tu.functions[i - 1].span.end, tu.functions[i].span.begin);
}

TEST(ParseTranslationUnit, UnbalancedBraces) {
  EXPECT_THROW(
      {
        try {
          load_translation_unit("int f(void) { if (1) { return 0; }\n");
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::UnbalancedBraces);
          throw;
        }
      },
      Error);
}

TEST(CollectMacros, Rules) {
  EXPECT_EQ(collect_macros(load_translation_unit("#define CONST 7\n")), (MacroTable{{"CONST", 7}}));
  EXPECT_TRUE(collect_macros(load_translation_unit("#define F(x) x+1\n")).empty());
  EXPECT_TRUE(collect_macros(load_translation_unit("#define A 1\n#define A 2\n")).empty());
  EXPECT_TRUE(collect_macros(load_translation_unit("#define A 1\n#undef A\n")).empty());
  EXPECT_TRUE(collect_macros(load_translation_unit("#define S \"str\"\n")).empty());
  EXPECT_EQ(collect_macros(load_translation_unit("#define E ((1 << 4) | 0x3)\n#define N (-2)\n#define U 0xffffffffu\n")),
            (MacroTable{{"E", 19}, {"N", -2}, {"U", -1}}));
}

TEST(EvaluateIntegerExpression, Cases) {
  EXPECT_EQ(evaluate_integer_expression("1 + 2 * 3"), 7);
  EXPECT_EQ(evaluate_integer_expression("~0"), -1);
  EXPECT_EQ(evaluate_integer_expression("'A'"), 65);
  EXPECT_EQ(evaluate_integer_expression("010"), 8);
  EXPECT_EQ(evaluate_integer_expression("0x100000000"), std::nullopt);
  EXPECT_EQ(evaluate_integer_expression("x + 1"), std::nullopt);
  EXPECT_EQ(evaluate_integer_expression("1 / 0"), std::nullopt);
}

TEST(FindQualifiedConditions, Listing) {
  const auto s = scan(kListingSource);
  ASSERT_EQ(s.qcs.size(), 1u);
  const auto& qc = s.qcs[0];
  EXPECT_EQ(qc.var_expr, "a");
  EXPECT_EQ(qc.const_value, 7);
  EXPECT_EQ(qc.const_origin, ConstOrigin::Macro);
  EXPECT_FALSE(qc.has_else);
  EXPECT_TRUE(qc.body_braced);
}

TEST(FindQualifiedConditions, NotEqualities) {
  EXPECT_TRUE(scan("void f(int a, int b) { if (a < 5) { a = 1; } if (a == b) { a = 2; } }\n").qcs.empty());
}

TEST(FindQualifiedConditions, ReversedOperands) {
  const auto s = scan("void f(int a) { if (5 == a) { a = 1; } else { a = 2; } }\n");
  ASSERT_EQ(s.qcs.size(), 1u);
  EXPECT_EQ(s.qcs[0].var_expr, "a");
  EXPECT_EQ(s.qcs[0].const_value, 5);
  EXPECT_EQ(s.qcs[0].const_origin, ConstOrigin::Literal);
  EXPECT_TRUE(s.qcs[0].has_else);
}

TEST(FindQualifiedConditions, OutermostOnlyAndSequentialIds) {
  const auto s = scan("int g;\nvoid f(int a, int b) {\n  if (a == 1) { if (b == 2) { g = 1; } }\n  if (b == 3) g = 3;\n}\n");
  ASSERT_EQ(s.qcs.size(), 2u);
  EXPECT_EQ(s.qcs[0].qc_id, 0u);
  EXPECT_EQ(s.qcs[1].qc_id, 1u);
  EXPECT_EQ(s.qcs[1].var_expr, "b");
  EXPECT_FALSE(s.qcs[1].body_braced);
  for (const auto& a : s.qcs)
    for (const auto& b : s.qcs) EXPECT_FALSE(&a != &b && b.body_span.contains(a.cond_span));
}

TEST(FindQualifiedConditions, MinKeyBits) {
  Config cfg;
  cfg.min_key_bits = 9;
  const auto s = scan("void f(int a) { if (a == 255) { a = 1; } if (a == 256) { a = 2; } if (a == -1) { a = 3; } }\n", cfg);
  ASSERT_EQ(s.qcs.size(), 2u);
  EXPECT_EQ(s.qcs[0].const_value, 256);
  EXPECT_EQ(s.qcs[1].const_value, -1);
}

TEST(FindQualifiedConditions, Deterministic) {
  for (const auto& fx : testing::source_fixtures()) {
    const auto a = scan(fx.source);
    const auto b = scan(fx.source);
    ASSERT_EQ(a.qcs.size(), b.qcs.size());
    for (std::size_t i = 0; i < a.qcs.size(); ++i) {
      EXPECT_EQ(a.qcs[i].qc_id, b.qcs[i].qc_id);
      EXPECT_EQ(a.qcs[i].cond_span, b.qcs[i].cond_span);
      EXPECT_EQ(a.qcs[i].body_span, b.qcs[i].body_span);
      EXPECT_EQ(a.qcs[i].const_value, b.qcs[i].const_value);
    }
  }
}

TEST(FindQualifiedConditions, ConstantsMatchMacroTable) {
  for (const auto& fx : testing::source_fixtures()) {
    const auto s = scan(fx.source);
    for (const auto& qc : s.qcs) {
      if (qc.const_origin != ConstOrigin::Macro) continue;
      std::string name = qc.const_text;
      std::erase_if(name, [](char c) { return c == '(' || c == ')' || c == '-' || c == ' '; });
      ASSERT_TRUE(s.tu.macros.count(name)) << name;
    }
  }
}

TEST(CheckEligibility, ListingFreeVars) {
  auto s = scan(kListingSource);
  ASSERT_EQ(s.qcs.size(), 1u);
  const auto el = check_eligibility(s.tu, s.qcs[0]);
  ASSERT_TRUE(el.eligible) << el.detail;
  ASSERT_EQ(s.qcs[0].free_vars.size(), 1u);
  EXPECT_EQ(s.qcs[0].free_vars[0].name, "val");
  EXPECT_EQ(s.qcs[0].free_var_uses.size(), 1u);
}

TEST(CheckEligibility, Reasons) {
  auto s = scan(
      "void g(void);\n"
      "void f(int a) {\n"
      "  struct { int x; } st;\n"
      "  if (a == 1) { return; }\n"
      "  if (a == 2) { st.x = 1; }\n"
      "  if (a == 3) { g(); }\n"
      "}\n");
  ASSERT_EQ(s.qcs.size(), 3u);
  EXPECT_EQ(check_eligibility(s.tu, s.qcs[0]).reason, SkipReason::ControlFlowEscape);
  EXPECT_EQ(check_eligibility(s.tu, s.qcs[1]).reason, SkipReason::UnsupportedVariable);
  EXPECT_TRUE(check_eligibility(s.tu, s.qcs[2]).eligible);
  EXPECT_TRUE(s.qcs[2].free_vars.empty());
}

TEST(CheckEligibility, ShadowedNamesAreNotFree) {
  auto s = scan("int f(int a, int n) {\n  if (a == 4) {\n    int n = 3;\n    a = n;\n  }\n  return a + n;\n}\n");
  ASSERT_EQ(s.qcs.size(), 1u);
  ASSERT_TRUE(check_eligibility(s.tu, s.qcs[0]).eligible);
  ASSERT_EQ(s.qcs[0].free_vars.size(), 1u);
  EXPECT_EQ(s.qcs[0].free_vars[0].name, "a");
}

TEST(CheckEligibility, MemberNamesAreNotVariables) {
  auto s = scan("struct p { int len; };\nvoid f(struct p *q, int len) {\n  if (len == 2) { q->len = len; }\n}\n");
  ASSERT_EQ(s.qcs.size(), 1u);
  ASSERT_TRUE(check_eligibility(s.tu, s.qcs[0]).eligible);
  ASSERT_EQ(s.qcs[0].free_vars.size(), 2u);
  EXPECT_EQ(s.qcs[0].free_var_uses.size(), 2u);  // q and the right-hand len
}

TEST(ScanFixtures, ExpectedCounts) {
  for (const auto& fx : testing::source_fixtures()) {
    ScanReport r;
    r.files.push_back(scan_source(fx.source, std::string(fx.name) + ".c", Config{}));
    EXPECT_EQ(r.qc_count(), fx.qcs) << fx.name;
    EXPECT_EQ(r.eligible_count(), fx.eligible) << fx.name;
    EXPECT_EQ(r.skip_histogram(), fx.skips) << fx.name;
  }
}

}  // namespace
}  // namespace clbforge
