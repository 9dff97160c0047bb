#include <chrono>
#include <map>
#include <regex>

#include <gtest/gtest.h>

#include "sketchfuzz/connector/connector.hpp"
#include "sketchfuzz/core/text.hpp"
#include "sketchfuzz/gen/generator.hpp"
#include "sketchfuzz/gen/sketcher.hpp"
#include "sketchfuzz/learn/validator.hpp"

using namespace sketchfuzz;

namespace {

SchemaModel two_tables() {
  SchemaModel s;
  s.tables.push_back({"t0", {{"c0", "INT"}, {"c1", "VARCHAR"}}, false});
  s.tables.push_back({"t1", {{"c0", "INT"}}, false});
  return s;
}

Fragment valid(FragmentStore& store, FeatureLevel level, std::string_view feature,
               HoleKind hole, std::string text) {
  Fragment f;
  f.feature = store.upsert_feature(level, feature);
  f.hole = hole;
  f.text = std::move(text);
  f.validity = Validity::Valid;
  f.stats.successes = 1;
  store.add(f);
  return f;
}

std::vector<std::string> texts(const GeneratedContext& ctx) {
  std::vector<std::string> out;
  for (const auto& s : ctx.statements)
    out.push_back(s.text);
  return out;
}

bool any_contains(const std::vector<std::string>& stmts, std::string_view needle) {
  for (const auto& s : stmts)
    if (s.find(needle) != std::string::npos)
      return true;
  return false;
}

} // namespace

// ---------------------------------------------------------------- literals

TEST(Literals, RandomIntHitsBoundaryValues) {
  Rng rng(1);
  std::set<std::string> seen;
  for (int i = 0; i < 2000; ++i) {
    std::string v = random_int(rng);
    seen.insert(v);
    const long long n = std::stoll(v);
    if (v.size() < 5)
      EXPECT_TRUE(n >= -1000 && n <= 1000) << v;
  }
  for (const char* special : {"2147483647", "-2147483648", "9223372036854775807",
                              "-9223372036854775808", "0", "1", "-1"})
    EXPECT_TRUE(seen.count(special)) << special;
}

TEST(Literals, VarcharIsQuotedAndBounded) {
  Rng rng(2);
  bool saw_empty = false;
  const std::regex shape("'[a-z0-9 ]{0,10}'");
  for (int i = 0; i < 2000; ++i) {
    std::string v = random_varchar(rng);
    EXPECT_TRUE(std::regex_match(v, shape)) << v;
    saw_empty |= v == "''";
  }
  EXPECT_TRUE(saw_empty);
}

// Independent calendar check: a date is valid when the day does not exceed
// the month length, computed here from first principles.
TEST(Literals, DatesAreValidCalendarDates) {
  Rng rng(3);
  auto month_len = [](int y, int m) {
    if (m == 2)
      return (y % 400 == 0 || (y % 4 == 0 && y % 100 != 0)) ? 29 : 28;
    return (m == 4 || m == 6 || m == 9 || m == 11) ? 30 : 31;
  };
  for (int i = 0; i < 10000; ++i) {
    std::string v = random_date(rng);
    ASSERT_EQ(v.size(), 12u) << v;
    ASSERT_EQ(v.front(), '\'');
    int y = std::stoi(v.substr(1, 4)), m = std::stoi(v.substr(6, 2)),
        d = std::stoi(v.substr(9, 2));
    EXPECT_EQ(v[5], '-');
    EXPECT_EQ(v[8], '-');
    EXPECT_GE(y, 1970);
    EXPECT_LE(y, 2038);
    EXPECT_GE(m, 1);
    EXPECT_LE(m, 12);
    EXPECT_GE(d, 1);
    EXPECT_LE(d, month_len(y, m)) << v;
  }
}

TEST(Literals, RegistryShipsTheFiveGenerators) {
  const auto& reg = LiteralRegistry::standard();
  EXPECT_EQ(reg.all().size(), 5u);
  for (const char* k : {"RANDOM_INT", "RANDOM_VARCHAR", "RANDOM_DATE", "RANDOM_TABLE",
                        "RANDOM_COLUMN"})
    EXPECT_NE(reg.find(k), nullptr) << k;
  EXPECT_EQ(generator_keywords("a <RANDOM_INT> <=> <X_1> <lower>"),
            (std::vector<std::string>{"RANDOM_INT", "X_1"}));
  EXPECT_FALSE(keywords_registered("<NOPE>"));
  EXPECT_TRUE(keywords_registered("COL <> 1"));
}

// ---------------------------------------------------------------- expansion

TEST(Expand, CheckConstraintBindsColumnAndLiteral) {
  SchemaModel s;
  s.tables.push_back({"t0", {{"c0", "INT"}}, false});
  Rng rng(4);
  const std::string out = expand_fragment("CHECK (COL > <RANDOM_INT>)", s, rng);
  EXPECT_TRUE(std::regex_match(out, std::regex(R"(CHECK \(c0 > -?\d+\))"))) << out;
}

TEST(Expand, KeywordFreeFragmentIsVerbatim) {
  Rng rng(5);
  EXPECT_EQ(expand_fragment("IS NOT DISTINCT FROM", {}, rng), "IS NOT DISTINCT FROM");
}

TEST(Expand, UnknownKeywordAndEmptySchemaErrors) {
  Rng rng(6);
  EXPECT_THROW(expand_fragment("<RANDOM_BLOB>", two_tables(), rng), UnknownKeywordError);
  EXPECT_THROW(expand_fragment("COL > 1", {}, rng), EmptySchemaError);
  EXPECT_THROW(expand_fragment("<RANDOM_TABLE>", {}, rng), EmptySchemaError);
}

TEST(Expand, ColumnRestrictedToChosenTable) {
  const auto s = two_tables();
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const std::string out = expand_fragment("TAB.COL", s, rng);
    EXPECT_TRUE(out == "t0.c0" || out == "t0.c1" || out == "t1.c0") << out;
  }
}

TEST(Expand, QualifiedBindingDoesNotDoubleQualify) {
  const auto s = two_tables();
  Rng rng(8);
  ExpansionContext ctx;
  ctx.table = &s.tables[1];
  ctx.qualify = true;
  EXPECT_EQ(expand_fragment("COL + TAB.COL", s, rng, ctx), "t1.c0 + t1.c0");
}

TEST(Expand, OutputHasNoKeywordsOrAbstractIdentifiers) {
  const auto s = two_tables();
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const std::string out = expand_fragment(
        "f(TAB, COL, COL2, <RANDOM_INT>, <RANDOM_VARCHAR>, <RANDOM_DATE>, "
        "<RANDOM_TABLE>, <RANDOM_COLUMN>)",
        s, rng);
    EXPECT_TRUE(generator_keywords(out).empty()) << out;
    for (const auto& w : {"TAB", "COL", "COL2"})
      EXPECT_EQ(text::replace_word(out, w, "#", false), out) << out;
  }
}

// Chi-squared goodness of fit against the uniform choice over two tables.
TEST(Expand, RandomTableIsUniform) {
  const auto s = two_tables();
  Rng rng(10);
  std::map<std::string, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    ++counts[expand_fragment("<RANDOM_TABLE>", s, rng)];
  ASSERT_EQ(counts.size(), 2u);
  double chi2 = 0;
  for (const auto& [name, c] : counts)
    chi2 += (c - n / 2.0) * (c - n / 2.0) / (n / 2.0);
  EXPECT_LT(chi2, 10.83);  // p = 0.001, one degree of freedom
}

// ---------------------------------------------------------------- context

TEST(Context, SingleTableWithoutFragments) {
  GenConfig cfg;
  cfg.max_tables = 1;
  Generator gen(cfg, nullptr);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    auto ctx = gen.generate_context(rng);
    ASSERT_EQ(ctx.schema.tables.size(), 1u);
    const auto stmts = texts(ctx);
    EXPECT_TRUE(stmts.front().starts_with("CREATE TABLE t0 ("));
    int creates = 0, inserts = 0;
    for (const auto& s : stmts) {
      creates += s.starts_with("CREATE TABLE");
      inserts += s.starts_with("INSERT INTO t0");
    }
    EXPECT_EQ(creates, 1);
    EXPECT_GE(inserts, 1);
    EXPECT_LE(inserts, 20);
    EXPECT_NO_THROW(ctx.schema.check());
  }
}

TEST(Context, SameSeedSameStatements) {
  FragmentStore store;
  valid(store, FeatureLevel::Clause, "NOT NULL", HoleKind::ColumnConstraint, "NOT NULL");
  Generator gen(GenConfig{}, store.snapshot());
  Rng a(77), b(77);
  for (int i = 0; i < 20; ++i) {
    auto x = gen.generate_context(a);
    auto y = gen.generate_context(b);
    EXPECT_EQ(texts(x), texts(y));
    auto qx = gen.generate_query(x.schema, a);
    auto qy = gen.generate_query(y.schema, b);
    EXPECT_EQ(qx.text, qy.text);
  }
}

TEST(Context, LearnedTypeAndTypedLiteral) {
  FragmentStore store;
  valid(store, FeatureLevel::DataType, "ARRAY", HoleKind::DataTypeName, "ARRAY");
  valid(store, FeatureLevel::DataType, "ARRAY", HoleKind::TypedLiteral, "[1, <RANDOM_INT>]");
  Generator gen(GenConfig{}, store.snapshot());
  Rng rng(11);
  bool create = false, insert = false;
  const std::regex literal(R"(\[1, -?\d+\])");
  for (int i = 0; i < 300 && !(create && insert); ++i) {
    auto ctx = gen.generate_context(rng);
    for (const auto& s : texts(ctx)) {
      create |= s.find(" ARRAY") != std::string::npos && s.starts_with("CREATE TABLE");
      insert |= s.starts_with("INSERT") && std::regex_search(s, literal);
    }
  }
  EXPECT_TRUE(create);
  EXPECT_TRUE(insert);
}

TEST(Context, ReferencesOnlyKnownIdentifiers) {
  Generator gen(GenConfig{}, nullptr);
  Rng rng(12);
  const std::regex ref(R"(\b([tv]\d+)\.(c\d+)\b)");
  for (int i = 0; i < 200; ++i) {
    auto ctx = gen.generate_context(rng);
    auto q = gen.generate_query(ctx.schema, rng);
    std::vector<std::string> all = texts(ctx);
    all.push_back(q.text);
    for (const auto& s : all)
      for (std::sregex_iterator it(s.begin(), s.end(), ref), end; it != end; ++it) {
        const TableDef* t = ctx.schema.find((*it)[1].str());
        ASSERT_NE(t, nullptr) << s;
        EXPECT_NE(t->find_column((*it)[2].str()), nullptr) << s;
      }
    for (const auto& f : q.from)
      EXPECT_NE(ctx.schema.find(f), nullptr);
  }
}

TEST(Context, BaseStatementsExecuteOnEmbeddedEngine) {
  auto c = make_connector({});
  Generator gen(GenConfig{}, nullptr);
  Rng rng(13);
  std::size_t total = 0, ok = 0;
  for (int i = 0; i < 100; ++i) {
    c->reset_database();
    auto ctx = gen.generate_context(rng);
    for (const auto& s : ctx.statements) {
      ++total;
      ok += c->execute(s.text).ok();
    }
    for (int q = 0; q < 10; ++q) {
      ++total;
      ok += c->execute(gen.generate_query(ctx.schema, rng).text).ok();
    }
  }
  EXPECT_EQ(ok, total);
}

// ---------------------------------------------------------------- queries

TEST(Query, BaseGrammarOverSingleIntTable) {
  SchemaModel s;
  s.tables.push_back({"t0", {{"c0", "INT"}}, false});
  Generator gen(GenConfig{}, nullptr);
  Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    auto q = gen.generate_query(s, rng);
    EXPECT_TRUE(q.text.starts_with("SELECT * FROM t0 WHERE ")) << q.text;
    EXPECT_EQ(q.from, std::vector<std::string>{"t0"});
    EXPECT_TRUE(q.fragments.empty());
  }
}

TEST(Query, LearnedFunctionAndOperatorAppear) {
  FragmentStore store;
  const auto ceil = valid(store, FeatureLevel::Expression, "CEIL", HoleKind::FunctionName, "CEIL");
  valid(store, FeatureLevel::Expression, "<=>", HoleKind::BinaryOperator, "<=>");
  SchemaModel s;
  s.tables.push_back({"t0", {{"c0", "INT"}}, false});
  Generator gen(GenConfig{}, store.snapshot());
  Rng rng(15);
  bool saw_ceil = false, saw_op = false, recorded = false;
  for (int i = 0; i < 500; ++i) {
    auto q = gen.generate_query(s, rng);
    saw_ceil |= q.predicate.find("CEIL(t0.c0)") != std::string::npos;
    saw_op |= std::regex_search(q.predicate, std::regex(R"(<=> )"));
    for (auto id : q.fragments)
      recorded |= id == ceil.id;
  }
  EXPECT_TRUE(saw_ceil);
  EXPECT_TRUE(saw_op);
  EXPECT_TRUE(recorded);
}

TEST(Query, BoostRaisesSelectionShare) {
  FragmentStore store;
  const auto target = valid(store, FeatureLevel::Expression, "F0", HoleKind::FunctionName, "F0");
  for (int i = 1; i < 10; ++i)
    valid(store, FeatureLevel::Expression, "F" + std::to_string(i), HoleKind::FunctionName,
          "F" + std::to_string(i));
  SchemaModel s;
  s.tables.push_back({"t0", {{"c0", "INT"}}, false});
  auto share = [&](double boost) {
    GenConfig cfg;
    cfg.boost_factor = boost;
    cfg.boosted_feature = target.feature;
    Generator gen(cfg, store.snapshot());
    Rng rng(16);
    double hit = 0, all = 0;
    for (int i = 0; i < 3000; ++i)
      for (auto id : gen.generate_query(s, rng).fragments) {
        ++all;
        hit += id == target.id;
      }
    return hit / all;
  };
  EXPECT_NEAR(share(1), 0.1, 0.03);
  EXPECT_NEAR(share(10), 10.0 / 19.0, 0.05);
}

TEST(Query, GeneratorThroughput) {
  Generator gen(GenConfig{}, nullptr);
  Rng rng(17);
  const auto start = std::chrono::steady_clock::now();
  std::size_t n = 0;
  while (n < 20000) {
    auto ctx = gen.generate_context(rng);
    n += ctx.statements.size();
    for (int q = 0; q < 20; ++q, ++n)
      gen.generate_query(ctx.schema, rng);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GT(n / secs, 1000.0);
}

// ---------------------------------------------------------------- sketcher

namespace {

Feature feature(FeatureLevel level, std::string name) {
  Feature f;
  f.id = FeatureId{1};
  f.level = level;
  f.name = std::move(name);
  return f;
}

SketchRequest request(FeatureLevel level, std::string name) {
  SketchRequest r;
  r.feature = feature(level, std::move(name));
  r.level = level;
  return r;
}

} // namespace

TEST(Sketcher, StatementShape) {
  Rng rng(20);
  auto req = request(FeatureLevel::Statement, "ANALYZE");
  req.statement_holes = 1;
  auto s = make_statement_sketch(req, rng);
  EXPECT_EQ(s.context_statements.front(), "CREATE TABLE TAB (COL INT)");
  EXPECT_EQ(s.holed_statements, std::vector<std::string>{"{0}"});
  req.statement_holes = 2;
  s = make_statement_sketch(req, rng);
  EXPECT_EQ(s.holes, (std::vector<SketchHole>{{0, HoleKind::WholeStatement},
                                              {1, HoleKind::WholeStatement}}));
  EXPECT_THROW(make_statement_sketch(request(FeatureLevel::Clause, "X"), rng), Error);
}

TEST(Sketcher, RandomStatementHoleCountWithinOneToThree) {
  Rng rng(21);
  std::set<std::size_t> counts;
  for (int i = 0; i < 100; ++i)
    counts.insert(make_statement_sketch(request(FeatureLevel::Statement, "X"), rng).holes.size());
  EXPECT_EQ(counts, (std::set<std::size_t>{1, 2, 3}));
}

TEST(Sketcher, ClauseHolePositions) {
  Rng rng(22);
  auto s = make_clause_sketch(request(FeatureLevel::Clause, "NOT NULL"), rng);
  ASSERT_EQ(s.holes.size(), 5u);
  EXPECT_EQ(s.holes[0].kind, HoleKind::TableOption);
  EXPECT_EQ(s.holes[1].kind, HoleKind::ColumnConstraint);
  EXPECT_EQ(s.holes[2].kind, HoleKind::ColumnConstraint);
  EXPECT_EQ(s.holes[3].kind, HoleKind::TableConstraint);
  EXPECT_EQ(s.holes[4].kind, HoleKind::StatementSuffix);
  EXPECT_TRUE(s.holed_statements.back().starts_with("INSERT INTO TAB"));
}

TEST(Sketcher, ExpressionHoleChoice) {
  EXPECT_EQ(expression_hole_for("<=>"), HoleKind::BinaryOperator);
  EXPECT_EQ(expression_hole_for("IS DISTINCT FROM"), HoleKind::BinaryOperator);
  EXPECT_EQ(expression_hole_for("LIKE"), HoleKind::BinaryOperator);
  EXPECT_EQ(expression_hole_for("CEIL"), HoleKind::FunctionName);
  EXPECT_EQ(expression_hole_for("NOT"), HoleKind::UnaryPrefix);
  Rng rng(23);
  auto s = make_expression_sketch(request(FeatureLevel::Expression, "CEIL"), rng);
  const std::string rendered = render_for_prompt(s);
  EXPECT_EQ(text::split_lines(text::trim(rendered)).size(), 3u);
  EXPECT_TRUE(text::trim(rendered).ends_with("WHERE {0}(COL);")) << rendered;
  auto b = make_expression_sketch(request(FeatureLevel::Expression, "<=>"), rng);
  EXPECT_EQ(b.holed_statements.front(), "SELECT * FROM TAB WHERE COL {0} 1");
}

TEST(Sketcher, DatatypeRendering) {
  Rng rng(24);
  auto s = make_datatype_sketch(request(FeatureLevel::DataType, "ARRAY"), rng);
  EXPECT_TRUE(s.context_statements.empty());
  EXPECT_EQ(render_for_prompt(s),
            "CREATE TABLE TAB (COL {0});\nINSERT INTO TAB (COL) VALUES ({1});\n");
}

TEST(Sketcher, RenderKeepsCreateInsertSelectOrder) {
  Rng rng(25);
  auto s = make_expression_sketch(request(FeatureLevel::Expression, "ABS"), rng);
  const auto lines = text::split_lines(render_for_prompt(s));
  ASSERT_GE(lines.size(), 3u);
  EXPECT_TRUE(lines[0].starts_with("CREATE"));
  EXPECT_TRUE(lines[1].starts_with("INSERT"));
  EXPECT_TRUE(lines[2].starts_with("SELECT"));
}

// Universal fillings execute on the embedded engine.
TEST(Sketcher, UniversalFillingsExecute) {
  auto c = make_connector({});
  Rng rng(26);
  auto run = [&](const Sketch& s, std::vector<HoleFill> fills) {
    c->reset_database();
    for (const auto& stmt : fill_sketch(s, fills)) {
      auto r = c->execute(stmt);
      EXPECT_TRUE(r.ok()) << stmt << ": " << r.message.value_or("");
    }
  };
  for (int i = 0; i < 20; ++i) {
    auto st = make_statement_sketch(request(FeatureLevel::Statement, "X"), rng);
    std::vector<HoleFill> fills;
    for (const auto& h : st.holes)
      fills.push_back({h.index, "SELECT 1"});
    run(st, fills);
    auto cl = make_clause_sketch(request(FeatureLevel::Clause, "X"), rng);
    run(cl, {{0, ""}, {1, ""}, {2, ""}, {3, ""}, {4, ""}});
    auto ex = make_expression_sketch(request(FeatureLevel::Expression, "="), rng);
    run(ex, {{0, "="}});
    auto dt = make_datatype_sketch(request(FeatureLevel::DataType, "INT"), rng);
    run(dt, {{0, "INT"}, {1, "1"}});
  }
}
