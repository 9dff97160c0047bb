#include "sketchfuzz/connector/mock_engine.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <climits>
#include <map>
#include <optional>
#include <thread>
#include <variant>

#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

std::string_view to_string(MockFault fault) {
  switch (fault) {
  case MockFault::NullDrop: return "null-drop";
  case MockFault::BoundaryInt: return "boundary-int";
  case MockFault::InCast: return "in-cast";
  case MockFault::WithCrash: return "with-crash";
  case MockFault::SlowHang: return "slow-hang";
  case MockFault::NotDrop: return "not-drop";
  }
  return "?";
}

std::vector<MockFault> all_mock_faults() {
  return {MockFault::NullDrop, MockFault::BoundaryInt, MockFault::InCast,
          MockFault::WithCrash, MockFault::SlowHang,   MockFault::NotDrop};
}

std::optional<MockFault> parse_mock_fault(std::string_view name) {
  for (MockFault f : all_mock_faults())
    if (to_string(f) == name)
      return f;
  return std::nullopt;
}

namespace {

// ---------------------------------------------------------------- values

struct Value {
  enum class Type { Null, Int, Text } type = Type::Null;
  std::int64_t i = 0;
  std::string s;

  static Value null() { return {}; }
  static Value integer(std::int64_t v) { return {Type::Int, v, {}}; }
  static Value str(std::string v) { return {Type::Text, 0, std::move(v)}; }
  bool is_null() const { return type == Type::Null; }
};

enum class ColType { Int, Text, Bool };

struct SqlFailure {
  std::string message;
};
struct CrashSignal {};
struct HangSignal {};

[[noreturn]] void fail(std::string msg) { throw SqlFailure{std::move(msg)}; }

std::optional<std::int64_t> parse_int_text(std::string_view s) {
  std::string t = text::trim(s);
  if (t.empty())
    return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (t[0] == '+' || t[0] == '-') {
    neg = t[0] == '-';
    i = 1;
  }
  if (i == t.size())
    return std::nullopt;
  unsigned long long v = 0;
  for (; i < t.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(t[i])))
      return std::nullopt;
    const unsigned long long d = static_cast<unsigned long long>(t[i] - '0');
    if (v > (ULLONG_MAX - d) / 10)
      return std::nullopt;
    v = v * 10 + d;
  }
  if (neg) {
    if (v > static_cast<unsigned long long>(INT64_MAX) + 1)
      return std::nullopt;
    return static_cast<std::int64_t>(0 - v);
  }
  if (v > static_cast<unsigned long long>(INT64_MAX))
    return std::nullopt;
  return static_cast<std::int64_t>(v);
}

std::int64_t as_int(const Value& v) {
  if (v.type == Value::Type::Int)
    return v.i;
  if (auto p = parse_int_text(v.s))
    return *p;
  fail("could not convert string '" + v.s + "' to INT");
}

// Ternary truth value: nullopt is UNKNOWN.
std::optional<bool> truth(const Value& v) {
  if (v.is_null())
    return std::nullopt;
  return as_int(v) != 0;
}

Value from_truth(std::optional<bool> t) {
  return t ? Value::integer(*t ? 1 : 0) : Value::null();
}

// Three-way comparison; both non-null.
int compare(const Value& a, const Value& b) {
  if (a.type == Value::Type::Text && b.type == Value::Type::Text)
    return a.s < b.s ? -1 : (a.s == b.s ? 0 : 1);
  const std::int64_t x = as_int(a), y = as_int(b);
  return x < y ? -1 : (x == y ? 0 : 1);
}

std::string render(const Value& v) {
  switch (v.type) {
  case Value::Type::Null: return std::string(kNullMarker);
  case Value::Type::Int: return std::to_string(v.i);
  case Value::Type::Text: return v.s;
  }
  return {};
}

std::optional<ColType> parse_type(std::string_view name) {
  const std::string t = text::to_upper(name);
  if (t == "INT" || t == "INTEGER" || t == "BIGINT")
    return ColType::Int;
  if (t == "VARCHAR" || t == "TEXT")
    return ColType::Text;
  if (t == "BOOLEAN" || t == "BOOL")
    return ColType::Bool;
  return std::nullopt;
}

Value coerce(const Value& v, ColType type, const std::string& column) {
  if (v.is_null())
    return v;
  switch (type) {
  case ColType::Int:
    return Value::integer(as_int(v));
  case ColType::Text:
    if (v.type != Value::Type::Text)
      fail("type mismatch: column " + column + " expects VARCHAR");
    return v;
  case ColType::Bool: {
    const std::int64_t x = as_int(v);
    if (x != 0 && x != 1)
      fail("type mismatch: column " + column + " expects BOOLEAN");
    return Value::integer(x);
  }
  }
  return v;
}

// ---------------------------------------------------------------- lexer

struct Token {
  enum class Kind { Ident, Int, Str, Sym, End } kind = Kind::End;
  std::string text;  // identifiers keep their spelling
  bool quoted = false;
};

std::vector<Token> lex(std::string_view sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < sql.size()) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n')
        ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < sql.size() && text::is_ident_char(sql[j]))
        ++j;
      out.push_back({Token::Kind::Ident, std::string(sql.substr(i, j - i))});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < sql.size() && std::isdigit(static_cast<unsigned char>(sql[j])))
        ++j;
      if (j < sql.size() && (text::is_ident_char(sql[j]) || sql[j] == '.'))
        fail("unsupported numeric literal near '" +
             std::string(sql.substr(i, j - i + 1)) + "'");
      out.push_back({Token::Kind::Int, std::string(sql.substr(i, j - i))});
      i = j;
      continue;
    }
    if (c == '\'') {
      std::string s;
      std::size_t j = i + 1;
      for (;;) {
        if (j >= sql.size())
          fail("unterminated string literal");
        if (sql[j] == '\'') {
          if (j + 1 < sql.size() && sql[j + 1] == '\'') {
            s.push_back('\'');
            j += 2;
            continue;
          }
          ++j;
          break;
        }
        s.push_back(sql[j++]);
      }
      out.push_back({Token::Kind::Str, std::move(s)});
      i = j;
      continue;
    }
    if (c == '"') {
      std::size_t j = sql.find('"', i + 1);
      if (j == std::string_view::npos)
        fail("unterminated quoted identifier");
      out.push_back(
          {Token::Kind::Ident, std::string(sql.substr(i + 1, j - i - 1)), true});
      i = j + 1;
      continue;
    }
    static const char* two[] = {"<=", ">=", "<>", "!=", "=="};
    bool matched = false;
    for (const char* op : two) {
      if (sql.substr(i, 2) == op) {
        out.push_back({Token::Kind::Sym, op});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched)
      continue;
    if (std::string_view("=<>+-*(),.;").find(c) != std::string_view::npos) {
      out.push_back({Token::Kind::Sym, std::string(1, c)});
      ++i;
      continue;
    }
    fail(std::string("unrecognized token near '") + c + "'");
  }
  out.push_back({Token::Kind::End, ""});
  return out;
}

// ---------------------------------------------------------------- AST

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
  enum class Kind {
    Literal, Column, Not, Neg, Binary, IsNull, In, Cast, Case, Func,
    CountStar, Sum
  } kind = Kind::Literal;
  Value literal;
  std::string qualifier, name;  // Column; Func name; Binary operator
  bool negated = false;         // IS NOT NULL, NOT IN
  ColType cast_type = ColType::Int;
  std::vector<ExprPtr> args;    // operands, IN list, CASE (when, then)*, else
  bool has_else = false;
};

struct SelectStmt {
  std::vector<ExprPtr> items;  // empty means *
  std::vector<std::string> from;
  ExprPtr where;
};

struct ColumnDef {
  std::string name;
  ColType type = ColType::Int;
  bool not_null = false;
  bool unique = false;
  std::optional<Value> default_value;
  ExprPtr check;
};

bool is_keyword(const Token& t, std::string_view kw) {
  return t.kind == Token::Kind::Ident && !t.quoted &&
         text::to_upper(t.text) == kw;
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

  const Token& peek(std::size_t k = 0) const {
    return t_[std::min(pos_ + k, t_.size() - 1)];
  }
  Token take() {
    Token t = peek();
    if (pos_ < t_.size() - 1)
      ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  bool accept_kw(std::string_view kw) {
    if (is_keyword(peek(), kw)) {
      take();
      return true;
    }
    return false;
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw))
      fail("syntax error: expected " + std::string(kw) + " near '" +
           peek().text + "'");
  }
  bool accept_sym(std::string_view s) {
    if (peek().kind == Token::Kind::Sym && peek().text == s) {
      take();
      return true;
    }
    return false;
  }
  void expect_sym(std::string_view s) {
    if (!accept_sym(s))
      fail("syntax error: expected '" + std::string(s) + "' near '" +
           peek().text + "'");
  }
  std::string ident() {
    if (peek().kind != Token::Kind::Ident)
      fail("syntax error: expected identifier near '" + peek().text + "'");
    return take().text;
  }

  ExprPtr expr() { return or_expr(); }

  SelectStmt select() {
    SelectStmt s;
    expect_kw("SELECT");
    if (!accept_sym("*")) {
      do
        s.items.push_back(expr());
      while (accept_sym(","));
    }
    if (accept_kw("FROM")) {
      do
        s.from.push_back(ident());
      while (accept_sym(","));
    } else if (s.items.empty()) {
      fail("syntax error: SELECT * needs a FROM clause");
    }
    if (accept_kw("WHERE"))
      s.where = expr();
    return s;
  }

private:
  static ExprPtr make(Expr::Kind k) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    return e;
  }
  static ExprPtr binary(std::string op, ExprPtr a, ExprPtr b) {
    auto e = make(Expr::Kind::Binary);
    e->name = std::move(op);
    e->args = {std::move(a), std::move(b)};
    return e;
  }

  ExprPtr or_expr() {
    ExprPtr l = and_expr();
    while (accept_kw("OR"))
      l = binary("OR", l, and_expr());
    return l;
  }
  ExprPtr and_expr() {
    ExprPtr l = not_expr();
    while (accept_kw("AND"))
      l = binary("AND", l, not_expr());
    return l;
  }
  ExprPtr not_expr() {
    if (accept_kw("NOT")) {
      auto e = make(Expr::Kind::Not);
      e->args = {not_expr()};
      return e;
    }
    return cmp_expr();
  }
  ExprPtr cmp_expr() {
    ExprPtr l = add_expr();
    for (;;) {
      const Token& t = peek();
      if (t.kind == Token::Kind::Sym &&
          (t.text == "=" || t.text == "==" || t.text == "<" || t.text == ">" ||
           t.text == "<=" || t.text == ">=" || t.text == "<>" ||
           t.text == "!=")) {
        std::string op = take().text;
        if (op == "==")
          op = "=";
        if (op == "!=")
          op = "<>";
        l = binary(op, l, add_expr());
        continue;
      }
      if (is_keyword(t, "IS")) {
        take();
        auto e = make(Expr::Kind::IsNull);
        e->negated = accept_kw("NOT");
        expect_kw("NULL");
        e->args = {l};
        l = e;
        continue;
      }
      if (is_keyword(t, "IN") ||
          (is_keyword(t, "NOT") && is_keyword(peek(1), "IN"))) {
        auto e = make(Expr::Kind::In);
        e->negated = accept_kw("NOT");
        expect_kw("IN");
        expect_sym("(");
        e->args.push_back(l);
        do
          e->args.push_back(expr());
        while (accept_sym(","));
        expect_sym(")");
        l = e;
        continue;
      }
      return l;
    }
  }
  ExprPtr add_expr() {
    ExprPtr l = mul_expr();
    for (;;) {
      if (accept_sym("+"))
        l = binary("+", l, mul_expr());
      else if (accept_sym("-"))
        l = binary("-", l, mul_expr());
      else
        return l;
    }
  }
  ExprPtr mul_expr() {
    ExprPtr l = unary_expr();
    while (accept_sym("*"))
      l = binary("*", l, unary_expr());
    return l;
  }
  ExprPtr unary_expr() {
    if (accept_sym("-")) {
      if (peek().kind == Token::Kind::Int) {
        const std::string digits = take().text;
        auto v = parse_int_text("-" + digits);
        if (!v)
          fail("integer literal out of range: -" + digits);
        auto e = make(Expr::Kind::Literal);
        e->literal = Value::integer(*v);
        return e;
      }
      auto e = make(Expr::Kind::Neg);
      e->args = {unary_expr()};
      return e;
    }
    if (accept_sym("+"))
      return unary_expr();
    return primary();
  }
  ExprPtr primary() {
    const Token t = peek();
    if (t.kind == Token::Kind::Int) {
      take();
      auto v = parse_int_text(t.text);
      if (!v)
        fail("integer literal out of range: " + t.text);
      auto e = make(Expr::Kind::Literal);
      e->literal = Value::integer(*v);
      return e;
    }
    if (t.kind == Token::Kind::Str) {
      take();
      auto e = make(Expr::Kind::Literal);
      e->literal = Value::str(t.text);
      return e;
    }
    if (accept_sym("(")) {
      ExprPtr e = expr();
      expect_sym(")");
      return e;
    }
    if (t.kind != Token::Kind::Ident)
      fail("syntax error near '" + t.text + "'");
    if (!t.quoted) {
      const std::string kw = text::to_upper(t.text);
      if (kw == "NULL" || kw == "TRUE" || kw == "FALSE") {
        take();
        auto e = make(Expr::Kind::Literal);
        if (kw != "NULL")
          e->literal = Value::integer(kw == "TRUE" ? 1 : 0);
        return e;
      }
      if (kw == "CAST") {
        take();
        expect_sym("(");
        auto e = make(Expr::Kind::Cast);
        e->args = {expr()};
        expect_kw("AS");
        const std::string type = ident();
        auto ct = parse_type(type);
        if (!ct)
          fail("unknown data type " + type);
        e->cast_type = *ct;
        expect_sym(")");
        return e;
      }
      if (kw == "CASE") {
        take();
        auto e = make(Expr::Kind::Case);
        while (accept_kw("WHEN")) {
          e->args.push_back(expr());
          expect_kw("THEN");
          e->args.push_back(expr());
        }
        if (e->args.empty())
          fail("syntax error: CASE without WHEN");
        if (accept_kw("ELSE")) {
          e->args.push_back(expr());
          e->has_else = true;
        }
        expect_kw("END");
        return e;
      }
    }
    take();
    if (accept_sym("(")) {
      const std::string fn = text::to_upper(t.text);
      if (fn == "COUNT") {
        expect_sym("*");
        expect_sym(")");
        return make(Expr::Kind::CountStar);
      }
      auto e = make(fn == "SUM" ? Expr::Kind::Sum : Expr::Kind::Func);
      e->name = fn;
      if (!accept_sym(")")) {
        do
          e->args.push_back(expr());
        while (accept_sym(","));
        expect_sym(")");
      }
      return e;
    }
    auto e = make(Expr::Kind::Column);
    if (accept_sym(".")) {
      e->qualifier = t.text;
      e->name = ident();
    } else {
      e->name = t.text;
    }
    return e;
  }

  std::vector<Token> t_;
  std::size_t pos_ = 0;
};

// Splits a token stream at top-level semicolons.
std::vector<std::vector<Token>> split_statements(const std::vector<Token>& all) {
  std::vector<std::vector<Token>> out;
  std::vector<Token> cur;
  for (const auto& t : all) {
    if (t.kind == Token::Kind::End ||
        (t.kind == Token::Kind::Sym && t.text == ";")) {
      if (!cur.empty()) {
        cur.push_back({Token::Kind::End, ""});
        out.push_back(std::move(cur));
        cur.clear();
      }
      continue;
    }
    cur.push_back(t);
  }
  return out;
}

bool contains(const ExprPtr& e, const auto& pred) {
  if (!e)
    return false;
  if (pred(*e))
    return true;
  for (const auto& a : e->args)
    if (contains(a, pred))
      return true;
  return false;
}

bool is_boundary(std::int64_t v) {
  return v == INT32_MAX || v == INT32_MIN || v == INT64_MAX || v == INT64_MIN;
}

} // namespace

// ---------------------------------------------------------------- database

struct MockConnector::Database {
  struct Table {
    std::string name;
    std::vector<ColumnDef> columns;
    std::vector<std::vector<Value>> rows;
    std::vector<std::vector<std::size_t>> unique_sets;
    std::vector<ExprPtr> checks;
  };
  struct View {
    std::string name;
    std::vector<std::string> columns;
    SelectStmt query;
  };
  struct Relation {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;
  };
  struct Binding {
    std::vector<const Relation*> rels;
    std::vector<std::size_t> offsets;
  };

  std::map<std::string, Table> tables;  // keyed by lower-case name
  std::map<std::string, View> views;
  const std::set<MockFault>* faults = nullptr;

  bool has(MockFault f) const { return faults->contains(f); }

  static std::string key(std::string_view name) { return text::to_lower(name); }

  // ----- expression evaluation

  struct Ctx {
    const Binding* binding = nullptr;
    const std::vector<Value>* row = nullptr;
    bool where_path = false;
  };

  Value column(const Expr& e, const Ctx& ctx) const {
    if (!ctx.binding)
      fail("no such column: " + e.name);
    std::optional<std::size_t> found;
    for (std::size_t r = 0; r < ctx.binding->rels.size(); ++r) {
      const Relation* rel = ctx.binding->rels[r];
      if (!e.qualifier.empty() && key(rel->name) != key(e.qualifier))
        continue;
      for (std::size_t c = 0; c < rel->columns.size(); ++c) {
        if (key(rel->columns[c]) == key(e.name)) {
          if (found)
            fail("ambiguous column name: " + e.name);
          found = ctx.binding->offsets[r] + c;
        }
      }
    }
    if (!found)
      fail("no such column: " +
           (e.qualifier.empty() ? e.name : e.qualifier + "." + e.name));
    return (*ctx.row)[*found];
  }

  Value eval(const Expr& e, const Ctx& ctx) const {
    using K = Expr::Kind;
    switch (e.kind) {
    case K::Literal:
      return e.literal;
    case K::Column:
      return column(e, ctx);
    case K::Not:
      return from_truth([](std::optional<bool> t) -> std::optional<bool> {
        if (!t)
          return std::nullopt;
        return !*t;
      }(truth(eval(*e.args[0], ctx))));
    case K::Neg: {
      Value v = eval(*e.args[0], ctx);
      if (v.is_null())
        return v;
      std::int64_t x = as_int(v);
      if (x == INT64_MIN)
        fail("integer overflow");
      return Value::integer(-x);
    }
    case K::Binary:
      return eval_binary(e, ctx);
    case K::IsNull: {
      if (ctx.where_path && has(MockFault::NullDrop) && !e.negated &&
          e.args[0]->kind != K::Column)
        return Value::integer(0);
      const bool n = eval(*e.args[0], ctx).is_null();
      return Value::integer(n != e.negated ? 1 : 0);
    }
    case K::In: {
      Value x = eval(*e.args[0], ctx);
      if (x.is_null())
        return Value::null();
      bool saw_null = false;
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        Value y = eval(*e.args[i], ctx);
        if (y.is_null()) {
          saw_null = true;
          continue;
        }
        if (compare(x, y) == 0)
          return Value::integer(e.negated ? 0 : 1);
      }
      if (saw_null)
        return Value::null();
      return Value::integer(e.negated ? 1 : 0);
    }
    case K::Cast: {
      Value v = eval(*e.args[0], ctx);
      if (v.is_null())
        return v;
      switch (e.cast_type) {
      case ColType::Int: return Value::integer(as_int(v));
      case ColType::Bool: return Value::integer(as_int(v) != 0 ? 1 : 0);
      case ColType::Text:
        return v.type == Value::Type::Text ? v
                                           : Value::str(std::to_string(v.i));
      }
      return v;
    }
    case K::Case: {
      const std::size_t pairs = (e.args.size() - (e.has_else ? 1 : 0)) / 2;
      for (std::size_t i = 0; i < pairs; ++i) {
        auto t = truth(eval(*e.args[2 * i], ctx));
        if (t && *t)
          return eval(*e.args[2 * i + 1], ctx);
      }
      return e.has_else ? eval(*e.args.back(), ctx) : Value::null();
    }
    case K::Func:
      return eval_func(e, ctx);
    case K::CountStar:
    case K::Sum:
      fail("misuse of aggregate function");
    }
    return Value::null();
  }

  Value eval_binary(const Expr& e, const Ctx& ctx) const {
    const std::string& op = e.name;
    if (op == "AND" || op == "OR") {
      auto a = truth(eval(*e.args[0], ctx));
      auto b = truth(eval(*e.args[1], ctx));
      if (op == "AND") {
        if ((a && !*a) || (b && !*b))
          return Value::integer(0);
        if (a && b)
          return Value::integer(1);
        return Value::null();
      }
      if ((a && *a) || (b && *b))
        return Value::integer(1);
      if (a && b)
        return Value::integer(0);
      return Value::null();
    }
    Value a = eval(*e.args[0], ctx);
    Value b = eval(*e.args[1], ctx);
    if (a.is_null() || b.is_null())
      return Value::null();
    if (op == "+" || op == "-" || op == "*") {
      const std::int64_t x = as_int(a), y = as_int(b);
      std::int64_t r;
      bool overflow = op == "+"   ? __builtin_add_overflow(x, y, &r)
                      : op == "-" ? __builtin_sub_overflow(x, y, &r)
                                  : __builtin_mul_overflow(x, y, &r);
      if (overflow)
        fail("integer overflow");
      return Value::integer(r);
    }
    const int c = compare(a, b);
    bool r = false;
    if (op == "=") r = c == 0;
    else if (op == "<>") r = c != 0;
    else if (op == "<") r = c < 0;
    else if (op == ">") r = c > 0;
    else if (op == "<=") r = c <= 0;
    else if (op == ">=") r = c >= 0;
    else fail("unsupported operator " + op);
    return Value::integer(r ? 1 : 0);
  }

  Value eval_func(const Expr& e, const Ctx& ctx) const {
    std::vector<Value> args;
    for (const auto& a : e.args)
      args.push_back(eval(*a, ctx));
    auto arity = [&](std::size_t n) {
      if (args.size() != n)
        fail("wrong number of arguments to function " + e.name);
    };
    if (e.name == "COALESCE") {
      for (auto& v : args)
        if (!v.is_null())
          return v;
      return Value::null();
    }
    if (e.name == "ABS" || e.name == "CEIL" || e.name == "FLOOR") {
      arity(1);
      if (args[0].is_null())
        return args[0];
      std::int64_t x = as_int(args[0]);
      if (e.name == "ABS") {
        if (x == INT64_MIN)
          fail("integer overflow");
        x = x < 0 ? -x : x;
      }
      return Value::integer(x);
    }
    if (e.name == "LENGTH") {
      arity(1);
      if (args[0].is_null())
        return args[0];
      if (args[0].type != Value::Type::Text)
        fail("LENGTH expects VARCHAR");
      return Value::integer(static_cast<std::int64_t>(args[0].s.size()));
    }
    if (e.name == "UPPER" || e.name == "LOWER") {
      arity(1);
      if (args[0].is_null())
        return args[0];
      if (args[0].type != Value::Type::Text)
        fail(e.name + " expects VARCHAR");
      return Value::str(e.name == "UPPER" ? text::to_upper(args[0].s)
                                          : text::to_lower(args[0].s));
    }
    fail("no such function: " + e.name);
  }

  // ----- relations

  Relation relation(std::string_view name, int depth = 0) const {
    if (depth > 16)
      fail("view nesting too deep");
    if (auto it = tables.find(key(name)); it != tables.end()) {
      Relation r;
      r.name = std::string(name);
      for (const auto& c : it->second.columns)
        r.columns.push_back(c.name);
      r.rows = it->second.rows;
      return r;
    }
    if (auto it = views.find(key(name)); it != views.end()) {
      Relation r = run_select(it->second.query, depth + 1);
      r.name = std::string(name);
      if (!it->second.columns.empty())
        r.columns = it->second.columns;
      return r;
    }
    fail("no such table: " + std::string(name));
  }

  Relation run_select(const SelectStmt& s, int depth = 0) const {
    std::vector<Relation> rels;
    for (const auto& name : s.from)
      rels.push_back(relation(name, depth));
    Binding binding;
    std::size_t offset = 0;
    for (const auto& r : rels) {
      binding.rels.push_back(&r);
      binding.offsets.push_back(offset);
      offset += r.columns.size();
    }

    if (s.where) {
      if (has(MockFault::SlowHang) &&
          contains(s.where, [](const Expr& e) {
            if (e.kind != Expr::Kind::Binary || e.name != "*")
              return false;
            for (const auto& a : e.args)
              if (a->kind == Expr::Kind::Literal &&
                  a->literal.type == Value::Type::Int && a->literal.i == -1)
                return true;
            return false;
          }))
        throw HangSignal{};
    }

    // Cross product in nested-loop order.
    std::vector<std::vector<Value>> product{{}};
    for (const auto& r : rels) {
      std::vector<std::vector<Value>> next;
      for (const auto& prefix : product)
        for (const auto& row : r.rows) {
          auto combined = prefix;
          combined.insert(combined.end(), row.begin(), row.end());
          next.push_back(std::move(combined));
        }
      product = std::move(next);
    }

    std::vector<std::vector<Value>> selected;
    if (!s.where) {
      selected = std::move(product);
    } else {
      const Expr* where = s.where.get();
      Expr patched;
      if (has(MockFault::BoundaryInt) && where->kind == Expr::Kind::Binary &&
          where->name != "AND" && where->name != "OR" &&
          where->name != "+" && where->name != "-" && where->name != "*") {
        patched = *where;
        bool changed = false;
        for (auto& a : patched.args) {
          if (a->kind == Expr::Kind::Literal &&
              a->literal.type == Value::Type::Int && is_boundary(a->literal.i)) {
            auto lit = std::make_shared<Expr>(*a);
            lit->literal.i = static_cast<std::int32_t>(
                static_cast<std::uint32_t>(a->literal.i) + 1u);
            a = lit;
            changed = true;
          }
        }
        if (changed)
          where = &patched;
      }
      const bool in_cast =
          has(MockFault::InCast) && contains(s.where, [](const Expr& e) {
            if (e.kind != Expr::Kind::In)
              return false;
            for (std::size_t i = 1; i < e.args.size(); ++i)
              if (e.args[i]->kind == Expr::Kind::Cast)
                return true;
            return false;
          });
      std::size_t limit = product.size();
      if (has(MockFault::NotDrop) && where->kind == Expr::Kind::Not &&
          limit > 0)
        --limit;
      Ctx ctx{&binding, nullptr, true};
      for (std::size_t i = 0; i < limit; ++i) {
        ctx.row = &product[i];
        auto t = truth(eval(*where, ctx));
        if (t && *t && !in_cast)
          selected.push_back(std::move(product[i]));
      }
    }

    Relation out;
    if (s.items.empty()) {
      for (const auto& r : rels)
        for (const auto& c : r.columns)
          out.columns.push_back(c);
      out.rows = std::move(selected);
      return out;
    }
    const bool aggregate = std::any_of(
        s.items.begin(), s.items.end(), [](const ExprPtr& e) {
          return e->kind == Expr::Kind::CountStar || e->kind == Expr::Kind::Sum;
        });
    Ctx ctx{&binding, nullptr, false};
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      const auto& it = s.items[i];
      out.columns.push_back(it->kind == Expr::Kind::Column
                                ? it->name
                                : "col" + std::to_string(i));
    }
    if (!aggregate) {
      for (const auto& row : selected) {
        ctx.row = &row;
        std::vector<Value> vals;
        for (const auto& it : s.items)
          vals.push_back(eval(*it, ctx));
        out.rows.push_back(std::move(vals));
      }
      return out;
    }
    std::vector<Value> vals;
    for (const auto& it : s.items) {
      if (it->kind == Expr::Kind::CountStar) {
        vals.push_back(Value::integer(static_cast<std::int64_t>(selected.size())));
      } else if (it->kind == Expr::Kind::Sum) {
        if (it->args.size() != 1)
          fail("wrong number of arguments to function SUM");
        std::optional<std::int64_t> sum;
        for (const auto& row : selected) {
          ctx.row = &row;
          Value v = eval(*it->args[0], ctx);
          if (v.is_null())
            continue;
          std::int64_t acc = sum.value_or(0);
          if (__builtin_add_overflow(acc, as_int(v), &acc))
            fail("integer overflow");
          sum = acc;
        }
        vals.push_back(sum ? Value::integer(*sum) : Value::null());
      } else {
        fail("mixing aggregate and non-aggregate select items");
      }
    }
    out.rows.push_back(std::move(vals));
    return out;
  }

  // ----- statements

  std::optional<Rows> run(Parser& p) {
    if (is_keyword(p.peek(), "SELECT")) {
      SelectStmt s = p.select();
      if (!p.at_end())
        fail("syntax error near '" + p.peek().text + "'");
      Relation r = run_select(s);
      Rows rows;
      for (const auto& row : r.rows) {
        Row out;
        for (const auto& v : row)
          out.push_back(render(v));
        rows.push_back(std::move(out));
      }
      return rows;
    }
    if (p.accept_kw("CREATE")) {
      if (p.accept_kw("TABLE"))
        create_table(p);
      else if (p.accept_kw("VIEW"))
        create_view(p);
      else {
        p.accept_kw("UNIQUE");
        p.expect_kw("INDEX");
        if (p.accept_kw("IF")) {
          p.expect_kw("NOT");
          p.expect_kw("EXISTS");
        }
        p.ident();
        p.expect_kw("ON");
        const std::string t = p.ident();
        if (!tables.contains(key(t)))
          fail("no such table: " + t);
        p.expect_sym("(");
        do
          p.ident();
        while (p.accept_sym(","));
        p.expect_sym(")");
      }
    } else if (p.accept_kw("DROP")) {
      const bool view = p.accept_kw("VIEW");
      if (!view)
        p.expect_kw("TABLE");
      bool if_exists = false;
      if (p.accept_kw("IF")) {
        p.expect_kw("EXISTS");
        if_exists = true;
      }
      const std::string name = p.ident();
      const std::size_t erased =
          view ? views.erase(key(name)) : tables.erase(key(name));
      if (!erased && !if_exists)
        fail("no such " + std::string(view ? "view" : "table") + ": " + name);
    } else if (p.accept_kw("INSERT")) {
      insert(p);
    } else if (p.accept_kw("ANALYZE") || p.accept_kw("VACUUM")) {
      if (!p.at_end()) {
        const std::string name = p.ident();
        if (!tables.contains(key(name)) && !views.contains(key(name)))
          fail("no such table: " + name);
      }
    } else {
      fail("syntax error near '" + p.peek().text + "'");
    }
    if (!p.at_end())
      fail("syntax error near '" + p.peek().text + "'");
    return std::nullopt;
  }

  void check_new_name(const std::string& name) const {
    if (tables.contains(key(name)) || views.contains(key(name)))
      fail("table " + name + " already exists");
  }

  void create_table(Parser& p) {
    bool if_not_exists = false;
    if (p.accept_kw("IF")) {
      p.expect_kw("NOT");
      p.expect_kw("EXISTS");
      if_not_exists = true;
    }
    Table t;
    t.name = p.ident();
    p.expect_sym("(");
    std::vector<std::vector<std::string>> unique_names;
    do {
      if (p.accept_kw("PRIMARY") || is_keyword(p.peek(), "UNIQUE")) {
        if (!p.accept_kw("UNIQUE"))
          p.expect_kw("KEY");
        p.expect_sym("(");
        std::vector<std::string> cols;
        do
          cols.push_back(p.ident());
        while (p.accept_sym(","));
        p.expect_sym(")");
        unique_names.push_back(cols);
        continue;
      }
      if (p.accept_kw("CHECK")) {
        p.expect_sym("(");
        t.checks.push_back(p.expr());
        p.expect_sym(")");
        continue;
      }
      ColumnDef c;
      c.name = p.ident();
      const std::string type = p.ident();
      auto ct = parse_type(type);
      if (!ct)
        fail("unknown data type " + type);
      c.type = *ct;
      for (;;) {
        if (p.accept_kw("NOT")) {
          p.expect_kw("NULL");
          c.not_null = true;
        } else if (p.accept_kw("NULL")) {
        } else if (p.accept_kw("PRIMARY")) {
          p.expect_kw("KEY");
          c.not_null = true;
          c.unique = true;
        } else if (p.accept_kw("UNIQUE")) {
          c.unique = true;
        } else if (p.accept_kw("DEFAULT")) {
          c.default_value = eval(*p.expr(), Ctx{});
        } else if (p.accept_kw("CHECK")) {
          p.expect_sym("(");
          c.check = p.expr();
          p.expect_sym(")");
        } else {
          break;
        }
      }
      for (const auto& existing : t.columns)
        if (key(existing.name) == key(c.name))
          fail("duplicate column name: " + c.name);
      t.columns.push_back(std::move(c));
    } while (p.accept_sym(","));
    p.expect_sym(")");
    if (p.accept_kw("WITH")) {
      p.expect_sym("(");
      do {
        const std::string opt = text::to_lower(p.ident());
        p.expect_sym("=");
        Value v = eval(*p.expr(), Ctx{});
        if (opt == "number_of_replicas" || opt == "number_of_shards") {
          const std::int64_t n = as_int(v);
          if (opt == "number_of_replicas" && has(MockFault::WithCrash) &&
              n >= INT32_MAX)
            throw CrashSignal{};
          if (n < 0)
            fail("table option " + opt + " must be >= 0");
        } else {
          fail("unknown table option " + opt);
        }
      } while (p.accept_sym(","));
      p.expect_sym(")");
    }
    if (t.columns.empty())
      fail("table must have at least one column");
    for (std::size_t i = 0; i < t.columns.size(); ++i)
      if (t.columns[i].unique)
        t.unique_sets.push_back({i});
    for (const auto& names : unique_names) {
      std::vector<std::size_t> idx;
      for (const auto& n : names) {
        auto it = std::find_if(t.columns.begin(), t.columns.end(),
                               [&](const ColumnDef& c) {
                                 return key(c.name) == key(n);
                               });
        if (it == t.columns.end())
          fail("no such column: " + n);
        idx.push_back(static_cast<std::size_t>(it - t.columns.begin()));
      }
      t.unique_sets.push_back(idx);
    }
    if (tables.contains(key(t.name)) || views.contains(key(t.name))) {
      if (if_not_exists)
        return;
      fail("table " + t.name + " already exists");
    }
    tables.emplace(key(t.name), std::move(t));
  }

  void create_view(Parser& p) {
    View v;
    v.name = p.ident();
    if (p.accept_sym("(")) {
      do
        v.columns.push_back(p.ident());
      while (p.accept_sym(","));
      p.expect_sym(")");
    }
    p.expect_kw("AS");
    v.query = p.select();
    check_new_name(v.name);
    Relation probe = run_select(v.query);
    if (!v.columns.empty() && v.columns.size() != probe.columns.size())
      fail("view " + v.name + " column count mismatch");
    views.emplace(key(v.name), std::move(v));
  }

  void insert(Parser& p) {
    p.expect_kw("INTO");
    const std::string name = p.ident();
    auto it = tables.find(key(name));
    if (it == tables.end())
      fail("no such table: " + name);
    Table& t = it->second;
    std::vector<std::size_t> targets;
    if (p.accept_sym("(")) {
      do {
        const std::string c = p.ident();
        auto col = std::find_if(t.columns.begin(), t.columns.end(),
                                [&](const ColumnDef& d) {
                                  return key(d.name) == key(c);
                                });
        if (col == t.columns.end())
          fail("table " + t.name + " has no column named " + c);
        targets.push_back(static_cast<std::size_t>(col - t.columns.begin()));
      } while (p.accept_sym(","));
      p.expect_sym(")");
    } else {
      for (std::size_t i = 0; i < t.columns.size(); ++i)
        targets.push_back(i);
    }
    p.expect_kw("VALUES");
    std::vector<std::vector<Value>> staged;
    do {
      p.expect_sym("(");
      std::vector<ExprPtr> exprs;
      do
        exprs.push_back(p.expr());
      while (p.accept_sym(","));
      p.expect_sym(")");
      if (exprs.size() != targets.size())
        fail(std::to_string(exprs.size()) + " values for " +
             std::to_string(targets.size()) + " columns");
      std::vector<Value> row(t.columns.size());
      std::vector<bool> assigned(t.columns.size(), false);
      for (std::size_t i = 0; i < exprs.size(); ++i) {
        const ColumnDef& c = t.columns[targets[i]];
        row[targets[i]] = coerce(eval(*exprs[i], Ctx{}), c.type, c.name);
        assigned[targets[i]] = true;
      }
      for (std::size_t i = 0; i < row.size(); ++i)
        if (!assigned[i] && t.columns[i].default_value)
          row[i] = coerce(*t.columns[i].default_value, t.columns[i].type,
                          t.columns[i].name);
      staged.push_back(std::move(row));
    } while (p.accept_sym(","));

    Relation self;
    self.name = t.name;
    for (const auto& c : t.columns)
      self.columns.push_back(c.name);
    Binding binding{{&self}, {0}};
    std::vector<std::vector<Value>> all = t.rows;
    for (auto& row : staged) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        const ColumnDef& c = t.columns[i];
        if (c.not_null && row[i].is_null())
          fail("NOT NULL constraint failed: " + t.name + "." + c.name);
        if (c.check) {
          auto r = truth(eval(*c.check, Ctx{&binding, &row, false}));
          if (r && !*r)
            fail("CHECK constraint failed: " + t.name);
        }
      }
      for (const auto& chk : t.checks) {
        auto r = truth(eval(*chk, Ctx{&binding, &row, false}));
        if (r && !*r)
          fail("CHECK constraint failed: " + t.name);
      }
      for (const auto& set : t.unique_sets) {
        for (const auto& other : all) {
          bool same = true;
          for (std::size_t i : set) {
            if (row[i].is_null() || other[i].is_null() ||
                compare(row[i], other[i]) != 0) {
              same = false;
              break;
            }
          }
          if (same)
            fail("UNIQUE constraint failed: " + t.name);
        }
      }
      all.push_back(row);
    }
    t.rows = std::move(all);
  }
};

// ---------------------------------------------------------------- connector

MockConnector::MockConnector(ConnectorConfig cfg, std::set<MockFault> faults)
    : Connector(std::move(cfg)), faults_(std::move(faults)),
      db_(std::make_unique<Database>()) {
  if (cfg_.statement_timeout.count() <= 0)
    throw Error("statement_timeout_ms must be > 0");
  db_->faults = &faults_;
}

MockConnector::~MockConnector() = default;

ExecOutcome MockConnector::hang() {
  hung_ = true;
  std::this_thread::sleep_for(cfg_.statement_timeout);
  ExecOutcome out;
  out.status = ExecStatus::Timeout;
  out.message = "statement timed out";
  out.elapsed = cfg_.statement_timeout;
  return out;
}

ExecOutcome MockConnector::execute(std::string_view statement) {
  std::lock_guard lock(mutex_);
  const auto start = std::chrono::steady_clock::now();
  ExecOutcome out;
  if (dead_) {
    out.status = ExecStatus::ConnectionLost;
    out.message = "server closed the connection unexpectedly";
    return out;
  }
  if (hung_)
    return hang();
  // Multi-statement text runs in autocommit: statements before a failing one
  // stay applied.
  try {
    std::optional<Rows> rows;
    for (auto& stmt : split_statements(lex(statement))) {
      Parser p(std::move(stmt));
      rows = db_->run(p);
    }
    out.rows = std::move(rows);
  } catch (const SqlFailure& f) {
    out.status = ExecStatus::SqlError;
    out.message = f.message;
    out.rows.reset();
  } catch (const CrashSignal&) {
    dead_ = true;
    out.status = ExecStatus::ConnectionLost;
    out.message = "server closed the connection unexpectedly";
    out.rows.reset();
  } catch (const HangSignal&) {
    return hang();
  }
  out.elapsed = std::chrono::steady_clock::now() - start;
  return out;
}

void MockConnector::reset_database() {
  std::lock_guard lock(mutex_);
  if (dead_)
    throw Error("mock engine is not running");
  db_->tables.clear();
  db_->views.clear();
}

Liveness MockConnector::probe_alive() {
  if (dead_)
    return Liveness::Dead;
  if (hung_) {
    std::this_thread::sleep_for(cfg_.statement_timeout);
    return Liveness::Unresponsive;
  }
  return Liveness::Alive;
}

void MockConnector::restart() {
  std::lock_guard lock(mutex_);
  db_ = std::make_unique<Database>();
  db_->faults = &faults_;
  dead_ = false;
  hung_ = false;
}

std::string MockConnector::engine_version() const {
  std::string v = "mock-engine 1.0";
  if (!faults_.empty()) {
    v += " (faults:";
    for (MockFault f : faults_)
      v += " " + std::string(to_string(f));
    v += ")";
  }
  return v;
}

std::vector<std::string> MockConnector::list_relations() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, t] : db_->tables)
    out.push_back(t.name);
  for (const auto& [k, v] : db_->views)
    out.push_back(v.name);
  std::sort(out.begin(), out.end());
  return out;
}

void MockConnector::kill() { dead_ = true; }

void MockConnector::stall() { hung_ = true; }

} // namespace sketchfuzz
