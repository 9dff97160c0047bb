#include "sketchfuzz/gen/generator.hpp"

#include <algorithm>
#include <array>

#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

void GenConfig::check() const {
  if (max_tables < 1 || max_inserts < 1 || max_columns < 1)
    throw Error("max_tables, max_inserts and max_columns must be >= 1");
  if (fragment_probability < 0 || fragment_probability > 1)
    throw Error("fragment_probability must be within [0, 1]");
  if (boost_factor < 1)
    throw Error("boost factor must be >= 1");
}

// ---------------------------------------------------------------- literals

namespace {

constexpr std::array<std::int64_t, 7> kSpecialInts = {
    0,          1,          -1, 2147483647, -2147483648LL,
    INT64_MAX, INT64_MIN};

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30,
                                  31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

std::vector<const TableDef*> require_relations(const SchemaModel& schema) {
  auto rels = schema.relations();
  if (rels.empty())
    throw EmptySchemaError("fragment references a table but the schema is empty");
  return rels;
}

} // namespace

std::string random_int(Rng& rng) {
  if (rng.chance(0.5))
    return std::to_string(kSpecialInts[rng.below(kSpecialInts.size())]);
  return std::to_string(rng.range(-1000, 1000));
}

std::string random_varchar(Rng& rng) {
  static constexpr std::string_view kAlphabet =
      "abcdefghijklmnopqrstuvwxyz0123456789 ";
  const auto len = rng.below(11);
  std::string s;
  for (std::uint64_t i = 0; i < len; ++i)
    s.push_back(kAlphabet[rng.below(kAlphabet.size())]);
  return text::sql_quote(s);
}

std::string random_date(Rng& rng) {
  const int y = static_cast<int>(rng.range(1970, 2038));
  const int m = static_cast<int>(rng.range(1, 12));
  const int d = static_cast<int>(rng.range(1, days_in_month(y, m)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "'%04d-%02d-%02d'", y, m, d);
  return buf;
}

const LiteralRegistry& LiteralRegistry::standard() {
  static const LiteralRegistry registry = [] {
    LiteralRegistry r;
    r.add({"RANDOM_INT", "A random integer. e.g., 1",
           [](Rng& rng, const SchemaModel&) { return random_int(rng); }});
    r.add({"RANDOM_VARCHAR", "A random string literal. e.g., 'abc'",
           [](Rng& rng, const SchemaModel&) { return random_varchar(rng); }});
    r.add({"RANDOM_DATE", "A random date literal. e.g., '2020-01-31'",
           [](Rng& rng, const SchemaModel&) { return random_date(rng); }});
    r.add({"RANDOM_TABLE", "The name of an existing table. e.g., t0",
           [](Rng& rng, const SchemaModel& schema) {
             return rng.pick(require_relations(schema))->name;
           }});
    r.add({"RANDOM_COLUMN", "The name of an existing column. e.g., c0",
           [](Rng& rng, const SchemaModel& schema) {
             const TableDef* t = rng.pick(require_relations(schema));
             return rng.pick(t->columns).name;
           }});
    return r;
  }();
  return registry;
}

void LiteralRegistry::add(LiteralGenerator g) {
  if (find(g.keyword))
    throw Error("duplicate literal generator: " + g.keyword);
  generators_.push_back(std::move(g));
}

const LiteralGenerator* LiteralRegistry::find(std::string_view keyword) const {
  for (const auto& g : generators_)
    if (g.keyword == keyword)
      return &g;
  return nullptr;
}

namespace {

// Scans "<NAME>" tokens; calls f(begin, end, name) for each.
template <typename F>
void scan_keywords(std::string_view s, F&& f) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '<' || i + 1 >= s.size() || !(s[i + 1] >= 'A' && s[i + 1] <= 'Z'))
      continue;
    std::size_t j = i + 1;
    while (j < s.size() && ((s[j] >= 'A' && s[j] <= 'Z') ||
                            (s[j] >= '0' && s[j] <= '9') || s[j] == '_'))
      ++j;
    if (j < s.size() && s[j] == '>') {
      f(i, j + 1, s.substr(i + 1, j - i - 1));
      i = j;
    }
  }
}

} // namespace

std::vector<std::string> generator_keywords(std::string_view text) {
  std::vector<std::string> out;
  scan_keywords(text, [&](std::size_t, std::size_t, std::string_view name) {
    out.emplace_back(name);
  });
  return out;
}

bool keywords_registered(std::string_view text,
                         const LiteralRegistry& registry) {
  for (const auto& k : generator_keywords(text))
    if (!registry.find(k))
      return false;
  return true;
}

// ---------------------------------------------------------------- expansion

std::string expand_fragment(std::string_view frag, const SchemaModel& schema,
                            Rng& rng, const ExpansionContext& ctx) {
  const auto& registry = LiteralRegistry::standard();
  for (const auto& k : generator_keywords(frag))
    if (!registry.find(k))
      throw UnknownKeywordError("unknown generator keyword <" + k + ">");

  // Bind abstract identifiers.
  std::string s(frag);
  bool uses_tab = false, uses_col = false, uses_col2 = false;
  for (std::size_t i = 0; i < s.size();) {
    if (!text::is_ident_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && text::is_ident_char(s[j]))
      ++j;
    const std::string_view w(s.data() + i, j - i);
    uses_tab |= w == kAbstractTable;
    uses_col |= w == kAbstractColumn;
    uses_col2 |= w == kAbstractColumn2;
    i = j;
  }

  SchemaModel own;
  const SchemaModel* effective = &schema;
  if (schema.empty() && ctx.table) {
    own.tables.push_back(*ctx.table);
    effective = &own;
  }

  if (uses_tab || uses_col || uses_col2) {
    const TableDef* table = ctx.table;
    if (!table) {
      auto rels = require_relations(*effective);
      if (ctx.column_filter) {
        std::vector<const TableDef*> fitting;
        for (const TableDef* t : rels)
          if (std::any_of(t->columns.begin(), t->columns.end(),
                          ctx.column_filter))
            fitting.push_back(t);
        if (!fitting.empty())
          rels = std::move(fitting);
      }
      table = rng.pick(rels);
    }
    std::vector<const Column*> cols;
    for (const auto& c : table->columns)
      if (!ctx.column_filter || ctx.column_filter(c))
        cols.push_back(&c);
    const Column* col = ctx.column;
    const Column* col2 = nullptr;
    if ((uses_col || uses_col2) && !col) {
      if (cols.empty())
        throw EmptySchemaError("no column fits the fragment");
      col = rng.pick(cols);
    }
    if (uses_col2) {
      std::vector<const Column*> others;
      for (const auto& c : table->columns)
        if (&c != col)
          others.push_back(&c);
      col2 = others.empty() ? col : rng.pick(others);
    }

    std::string out;
    for (std::size_t i = 0; i < s.size();) {
      if (!text::is_ident_char(s[i])) {
        out.push_back(s[i++]);
        continue;
      }
      std::size_t j = i;
      while (j < s.size() && text::is_ident_char(s[j]))
        ++j;
      const std::string_view w(s.data() + i, j - i);
      const bool after_dot = i > 0 && s[i - 1] == '.';
      const Column* bound = w == kAbstractColumn    ? col
                            : w == kAbstractColumn2 ? col2
                                                    : nullptr;
      if (w == kAbstractTable) {
        out += table->name;
      } else if (bound) {
        if (ctx.qualify && !after_dot)
          out += table->name + ".";
        out += bound->name;
      } else {
        out += w;
      }
      i = j;
    }
    s = std::move(out);
  }

  std::string out;
  std::size_t last = 0;
  scan_keywords(s, [&](std::size_t b, std::size_t e, std::string_view name) {
    out.append(s, last, b - last);
    out += registry.find(name)->produce(rng, *effective);
    last = e;
  });
  out.append(s, last, std::string::npos);
  return out;
}

std::string render_from(const std::vector<std::string>& from) {
  std::string out;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (i)
      out += ", ";
    out += from[i];
  }
  return out;
}

// ---------------------------------------------------------------- generator

namespace {

enum class Ty { Int, Varchar, Boolean, Learned };

Ty type_of(const Column& c) {
  if (c.type == "INT")
    return Ty::Int;
  if (c.type == "VARCHAR")
    return Ty::Varchar;
  if (c.type == "BOOLEAN")
    return Ty::Boolean;
  return Ty::Learned;
}

ExpansionContext table_ctx(const TableDef& t) {
  ExpansionContext ctx;
  ctx.table = &t;
  return ctx;
}

struct ColRef {
  std::string table;
  const Column* column;
};

} // namespace

struct Generator::Impl {
  const GenConfig& cfg;
  const StoreSnapshot& store;
  Rng& rng;
  std::vector<FragmentId>& used;

  // Weighted choice among eligible learned fragments of the given kinds.
  const Fragment* pick(std::initializer_list<HoleKind> kinds,
                       const std::function<bool(const Fragment&)>& ok) const {
    std::vector<const Fragment*> pool;
    std::vector<double> weights;
    auto consider = [&](const std::vector<Fragment>& frags) {
      for (const auto& f : frags) {
        if (ok && !ok(f))
          continue;
        pool.push_back(&f);
        weights.push_back(cfg.boosted_feature && f.feature == *cfg.boosted_feature
                              ? cfg.boost_factor
                              : 1.0);
      }
    };
    for (HoleKind k : kinds) {
      consider(store.valid_of(k));
      if (cfg.use_candidates)
        consider(store.candidates_of(k));
    }
    if (pool.empty())
      return nullptr;
    return pool[rng.weighted(weights)];
  }

  // Like pick() but first rolls the fragment probability.
  const Fragment* maybe(std::initializer_list<HoleKind> kinds,
                        const std::function<bool(const Fragment&)>& ok = {}) {
    if (!rng.chance(cfg.fragment_probability))
      return nullptr;
    return pick(kinds, ok);
  }

  // Feature of a learned column type.
  std::optional<FeatureId> type_feature(const std::string& type) const {
    const std::string upper = text::to_upper(text::collapse_whitespace(type));
    for (HoleKind k : {HoleKind::DataTypeName}) {
      for (const auto& f : store.valid_of(k))
        if (text::to_upper(text::collapse_whitespace(f.text)) == upper)
          return f.feature;
      for (const auto& f : store.candidates_of(k))
        if (text::to_upper(text::collapse_whitespace(f.text)) == upper)
          return f.feature;
    }
    std::string head = upper.substr(0, upper.find_first_of(" ("));
    for (const auto& [id, feat] : store.features)
      if (feat.level == FeatureLevel::DataType && feat.name == head)
        return id;
    return std::nullopt;
  }

  std::string expand(const Fragment& f, const SchemaModel& schema,
                     const ExpansionContext& ctx = {}) {
    used.push_back(f.id);
    return expand_fragment(f.text, schema, rng, ctx);
  }

  // ----- literals and values

  std::string literal(Ty t) {
    switch (t) {
    case Ty::Int: {
      std::string v = random_int(rng);
      return v[0] == '-' ? "(" + v + ")" : v;
    }
    case Ty::Varchar:
      return random_varchar(rng);
    case Ty::Boolean:
      return rng.chance(0.5) ? "TRUE" : "FALSE";
    case Ty::Learned:
      return "NULL";
    }
    return "NULL";
  }

  std::string insert_value(const Column& c, const SchemaModel& schema,
                           const TableDef& table) {
    if (rng.chance(0.1))
      return "NULL";
    const Ty t = type_of(c);
    if (t != Ty::Learned)
      return literal(t);
    auto feat = type_feature(c.type);
    if (!feat)
      return "NULL";
    const Fragment* f = pick({HoleKind::TypedLiteral}, [&](const Fragment& fr) {
      return fr.feature == *feat;
    });
    if (!f)
      return "NULL";
    ExpansionContext ctx;
    ctx.table = &table;
    ctx.column = &c;
    try {
      return expand(*f, schema, ctx);
    } catch (const Error&) {
      used.pop_back();
      return "NULL";
    }
  }

  // ----- expressions

  std::vector<ColRef> columns_of(const std::vector<const TableDef*>& rels,
                                 Ty t) const {
    std::vector<ColRef> out;
    for (const TableDef* r : rels)
      for (const auto& c : r->columns)
        if (type_of(c) == t)
          out.push_back({r->name, &c});
    return out;
  }

  std::string expr(Ty t, int depth, const std::vector<const TableDef*>& rels,
                   const SchemaModel& schema) {
    if (t == Ty::Boolean)
      return boolean(depth, rels, schema);
    const auto cols = columns_of(rels, t);
    if (t == Ty::Int && depth > 0 && rng.chance(0.3)) {
      static constexpr std::string_view kOps[] = {"+", "-", "*"};
      const auto op = kOps[rng.below(3)];
      std::string a = expr(Ty::Int, depth - 1, rels, schema);
      std::string b = expr(Ty::Int, depth - 1, rels, schema);
      return "(" + a + " " + std::string(op) + " " + b + ")";
    }
    if (!cols.empty() && rng.chance(0.6)) {
      const ColRef& c = cols[rng.below(cols.size())];
      return c.table + "." + c.column->name;
    }
    return literal(t);
  }

  std::string learned_boolean(int depth,
                              const std::vector<const TableDef*>& rels,
                              const SchemaModel& schema) {
    const auto learned_ok = [&](const Fragment& f) {
      if (f.hole != HoleKind::LeafExpression)
        return true;
      return !leaf_columns(f, rels).empty();
    };
    const Fragment* f =
        maybe({HoleKind::BinaryOperator, HoleKind::FunctionName,
               HoleKind::UnaryPrefix, HoleKind::LeafExpression},
              learned_ok);
    if (!f)
      return {};
    const int sub = std::max(0, depth - 1);
    switch (f->hole) {
    case HoleKind::BinaryOperator: {
      std::string a = expr(Ty::Int, sub, rels, schema);
      std::string b = expr(Ty::Int, sub, rels, schema);
      return "(" + a + " " + expand(*f, schema) + " " + b + ")";
    }
    case HoleKind::FunctionName: {
      std::string name = expand(*f, schema);
      return name + "(" + expr(Ty::Int, sub, rels, schema) + ")";
    }
    case HoleKind::UnaryPrefix: {
      std::string op = expand(*f, schema);
      return "(" + op + " " + boolean(sub, rels, schema) + ")";
    }
    default: {
      const auto cands = leaf_columns(*f, rels);
      const ColRef& c = cands[rng.below(cands.size())];
      const TableDef* table = schema.find(c.table);
      ExpansionContext ctx;
      ctx.table = table;
      ctx.column = c.column;
      ctx.qualify = true;
      return "(" + expand(*f, schema, ctx) + ")";
    }
    }
  }

  // Columns a LeafExpression fragment may bind COL to: columns of the
  // fragment's learned type, otherwise integer columns.
  std::vector<ColRef> leaf_columns(const Fragment& f,
                                   const std::vector<const TableDef*>& rels) const {
    const Feature* feat = store.feature(f.feature);
    std::vector<ColRef> out;
    if (feat && feat->level == FeatureLevel::DataType) {
      for (const TableDef* r : rels)
        for (const auto& c : r->columns)
          if (type_of(c) == Ty::Learned && type_feature(c.type) == f.feature)
            out.push_back({r->name, &c});
      return out;
    }
    return columns_of(rels, Ty::Int);
  }

  std::string boolean(int depth, const std::vector<const TableDef*>& rels,
                      const SchemaModel& schema) {
    if (std::string l = learned_boolean(depth, rels, schema); !l.empty())
      return l;
    const auto choice = depth > 0 ? rng.below(7) : 3 + rng.below(4);
    switch (choice) {
    case 0:
      return "(" + boolean(depth - 1, rels, schema) + " AND " +
             boolean(depth - 1, rels, schema) + ")";
    case 1:
      return "(" + boolean(depth - 1, rels, schema) + " OR " +
             boolean(depth - 1, rels, schema) + ")";
    case 2:
      return "(NOT " + boolean(depth - 1, rels, schema) + ")";
    case 3:
    case 4: {
      static constexpr std::string_view kCmp[] = {"=", "<", ">",
                                                  "<=", ">=", "<>"};
      static constexpr Ty kTypes[] = {Ty::Int, Ty::Int, Ty::Varchar,
                                      Ty::Boolean};
      const Ty t = kTypes[rng.below(4)];
      const int sub = std::max(0, depth - 1);
      std::string a = t == Ty::Boolean ? boolean_leaf(rels) : expr(t, sub, rels, schema);
      std::string b = t == Ty::Boolean ? boolean_leaf(rels) : expr(t, sub, rels, schema);
      return "(" + a + " " + std::string(kCmp[rng.below(6)]) + " " + b + ")";
    }
    case 5: {
      static constexpr Ty kTypes[] = {Ty::Int, Ty::Varchar, Ty::Boolean};
      const Ty t = kTypes[rng.below(3)];
      std::string e = t == Ty::Boolean ? boolean_leaf(rels)
                                       : expr(t, std::max(0, depth - 1), rels, schema);
      return "(" + e + (rng.chance(0.5) ? " IS NULL)" : " IS NOT NULL)");
    }
    default:
      return boolean_leaf(rels);
    }
  }

  std::string boolean_leaf(const std::vector<const TableDef*>& rels) {
    const auto cols = columns_of(rels, Ty::Boolean);
    if (!cols.empty() && rng.chance(0.7)) {
      const ColRef& c = cols[rng.below(cols.size())];
      return c.table + "." + c.column->name;
    }
    return literal(Ty::Boolean);
  }

  // ----- statements

  TableDef create_table(std::size_t index, const SchemaModel& schema,
                        GeneratedStatement& st) {
    TableDef t;
    t.name = "t" + std::to_string(index);
    const auto ncols = 1 + rng.below(cfg.max_columns);
    std::vector<std::string> col_sql;
    for (std::size_t i = 0; i < ncols; ++i) {
      Column c;
      c.name = "c" + std::to_string(i);
      if (const Fragment* f = maybe({HoleKind::DataTypeName})) {
        c.type = expand(*f, schema, table_ctx(t));
      } else {
        c.type = std::string(kBuiltinTypes[rng.below(std::size(kBuiltinTypes))]);
      }
      t.columns.push_back(c);
    }
    std::string head = "CREATE TABLE ";
    if (const Fragment* f = maybe({HoleKind::TableOption}))
      head += expand(*f, schema, table_ctx(t)) + " ";
    std::string sql = head + t.name + " (";
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      const Column& c = t.columns[i];
      if (i)
        sql += ", ";
      sql += c.name + " " + c.type;
      if (const Fragment* f = maybe({HoleKind::ColumnConstraint})) {
        ExpansionContext ctx;
        ctx.table = &t;
        ctx.column = &c;
        sql += " " + expand(*f, schema, ctx);
      }
    }
    if (const Fragment* f = maybe({HoleKind::TableConstraint}))
      sql += ", " + expand(*f, schema, table_ctx(t));
    sql += ")";
    if (const Fragment* f = maybe({HoleKind::StatementSuffix}))
      sql += " " + expand(*f, schema, table_ctx(t));
    st.text = std::move(sql);
    return t;
  }
};

Generator::Generator(GenConfig cfg, std::shared_ptr<const StoreSnapshot> store)
    : cfg_(std::move(cfg)), store_(std::move(store)) {
  cfg_.check();
  if (!store_)
    store_ = std::make_shared<StoreSnapshot>();
}

GeneratedContext Generator::generate_context(Rng& rng) const {
  GeneratedContext out;
  SchemaModel& schema = out.schema;

  auto run = [&](auto&& body) {
    GeneratedStatement st;
    Impl impl{cfg_, *store_, rng, st.fragments};
    body(impl, st);
    out.statements.push_back(std::move(st));
  };

  const auto ntables = 1 + rng.below(cfg_.max_tables);
  for (std::size_t i = 0; i < ntables; ++i)
    run([&](Impl& impl, GeneratedStatement& st) {
      schema.tables.push_back(impl.create_table(i, schema, st));
    });

  const auto ninserts = 1 + rng.below(cfg_.max_inserts);
  for (std::size_t i = 0; i < ninserts; ++i)
    run([&](Impl& impl, GeneratedStatement& st) {
      const TableDef& t = schema.tables[rng.below(schema.tables.size())];
      std::string cols, vals;
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) {
          cols += ", ";
          vals += ", ";
        }
        cols += t.columns[c].name;
        vals += impl.insert_value(t.columns[c], schema, t);
      }
      st.text = "INSERT INTO " + t.name + " (" + cols + ") VALUES (" + vals + ")";
    });

  const auto nviews = cfg_.max_views ? rng.below(cfg_.max_views + 1) : 0;
  for (std::size_t i = 0; i < nviews; ++i)
    run([&](Impl& impl, GeneratedStatement& st) {
      const TableDef& base = schema.tables[rng.below(schema.tables.size())];
      TableDef v;
      v.name = "v" + std::to_string(i);
      v.is_view = true;
      std::vector<std::size_t> picks;
      for (std::size_t c = 0; c < base.columns.size(); ++c)
        if (rng.chance(0.6))
          picks.push_back(c);
      if (picks.empty())
        picks.push_back(rng.below(base.columns.size()));
      std::string names, exprs;
      for (std::size_t k = 0; k < picks.size(); ++k) {
        const Column& c = base.columns[picks[k]];
        v.columns.push_back({"c" + std::to_string(k), c.type});
        names += (k ? ", " : "") + v.columns.back().name;
        exprs += (k ? ", " : "") + base.name + "." + c.name;
      }
      std::string sql = "CREATE VIEW " + v.name + " (" + names + ") AS SELECT " +
                        exprs + " FROM " + base.name;
      if (rng.chance(0.5))
        sql += " WHERE " + impl.boolean(2, {&base}, schema);
      st.text = std::move(sql);
      schema.views.push_back(std::move(v));
    });

  GeneratedStatement extra;
  {
    Impl impl{cfg_, *store_, rng, extra.fragments};
    if (const Fragment* f = impl.maybe({HoleKind::WholeStatement})) {
      try {
        extra.text = impl.expand(*f, schema);
      } catch (const Error&) {
        extra.fragments.clear();
      }
    }
  }
  if (!extra.text.empty())
    out.statements.push_back(std::move(extra));
  return out;
}

GeneratedQuery Generator::generate_query(const SchemaModel& schema,
                                         Rng& rng) const {
  auto rels = schema.relations();
  if (rels.empty())
    throw EmptySchemaError("query generation needs at least one table");
  GeneratedQuery q;
  std::vector<const TableDef*> from;
  const TableDef* first = rels[rng.below(rels.size())];
  from.push_back(first);
  if (rels.size() > 1 && rng.chance(0.3)) {
    const TableDef* second = first;
    while (second == first)
      second = rels[rng.below(rels.size())];
    from.push_back(second);
  }
  for (const TableDef* t : from)
    q.from.push_back(t->name);
  Impl impl{cfg_, *store_, rng, q.fragments};
  q.predicate = impl.boolean(static_cast<int>(rng.below(4)), from, schema);
  q.text = "SELECT * FROM " + render_from(q.from) + " WHERE " + q.predicate;
  return q;
}

} // namespace sketchfuzz
