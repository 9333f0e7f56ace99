#include "bmca/spec_dsl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace bmca::dsl {

ExprPtr make_expr(NodeKind kind, std::string text, std::vector<ExprPtr> kids,
                  bool arrow) {
  auto e = std::make_shared<SpecExpr>();
  e->kind = kind;
  e->text = std::move(text);
  e->kids = std::move(kids);
  e->arrow = arrow;
  return e;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->text != b->text || a->arrow != b->arrow ||
      a->kids.size() != b->kids.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!equal(a->kids[i], b->kids[i])) return false;
  return true;
}

bool contains_old(const ExprPtr& e) {
  if (!e) return false;
  if (e->kind == NodeKind::Old) return true;
  for (const auto& k : e->kids)
    if (contains_old(k)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
  Ident, Int,
  AndAnd, OrOr, Not, Implies,
  Eq, Ne, Lt, Le, Gt, Ge,
  Plus, Minus, Star, Slash, Percent,
  LParen, RParen, Comma, Arrow, Dot,
  End, Bad,
};

struct Token {
  Tok kind;
  std::string text;
  size_t pos;
};

std::vector<Token> lex(const std::string& s, std::optional<ParseError>& err) {
  std::vector<Token> out;
  size_t i = 0;
  auto push = [&](Tok k, std::string t, size_t p) {
    out.push_back({k, std::move(t), p});
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
        ++i;
      std::string word = s.substr(start, i - start);
      if (word == "implies") push(Tok::Implies, word, start);
      else push(Tok::Ident, word, start);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      push(Tok::Int, s.substr(start, i - start), start);
      continue;
    }
    auto two = [&](char a, char b) {
      return i + 1 < s.size() && s[i] == a && s[i + 1] == b;
    };
    if (two('&', '&')) { push(Tok::AndAnd, "&&", start); i += 2; continue; }
    if (two('|', '|')) { push(Tok::OrOr, "||", start); i += 2; continue; }
    if (two('=', '=')) { push(Tok::Eq, "==", start); i += 2; continue; }
    if (two('!', '=')) { push(Tok::Ne, "!=", start); i += 2; continue; }
    if (two('<', '=')) { push(Tok::Le, "<=", start); i += 2; continue; }
    if (two('>', '=')) { push(Tok::Ge, ">=", start); i += 2; continue; }
    if (two('-', '>')) { push(Tok::Arrow, "->", start); i += 2; continue; }
    switch (c) {
      case '!': push(Tok::Not, "!", start); ++i; continue;
      case '<': push(Tok::Lt, "<", start); ++i; continue;
      case '>': push(Tok::Gt, ">", start); ++i; continue;
      case '+': push(Tok::Plus, "+", start); ++i; continue;
      case '-': push(Tok::Minus, "-", start); ++i; continue;
      case '*': push(Tok::Star, "*", start); ++i; continue;
      case '/': push(Tok::Slash, "/", start); ++i; continue;
      case '%': push(Tok::Percent, "%", start); ++i; continue;
      case '(': push(Tok::LParen, "(", start); ++i; continue;
      case ')': push(Tok::RParen, ")", start); ++i; continue;
      case ',': push(Tok::Comma, ",", start); ++i; continue;
      case '.': push(Tok::Dot, ".", start); ++i; continue;
      default:
        err = ParseError{start, std::string("unexpected character '") + c + "'"};
        return out;
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

const std::set<std::string> kNamedConsts = {"MAX_UNSIGNED", "true", "false"};

struct Parser {
  const std::vector<Token>& toks;
  const std::vector<std::string>* known;
  size_t i = 0;
  std::optional<ParseError> err;
  bool in_old = false;

  const Token& cur() const { return toks[i]; }
  void advance() { if (toks[i].kind != Tok::End) ++i; }

  ExprPtr fail(size_t pos, std::string reason) {
    if (!err) err = ParseError{pos, std::move(reason)};
    return nullptr;
  }

  ExprPtr parse_implies() {
    ExprPtr lhs = parse_or();
    if (!lhs) return nullptr;
    if (cur().kind == Tok::Implies) {
      advance();
      ExprPtr rhs = parse_implies();
      if (!rhs) return nullptr;
      return make_expr(NodeKind::Implies, "", {lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    if (!lhs) return nullptr;
    while (cur().kind == Tok::OrOr) {
      advance();
      ExprPtr rhs = parse_and();
      if (!rhs) return nullptr;
      lhs = make_expr(NodeKind::Or, "", {lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_cmp();
    if (!lhs) return nullptr;
    while (cur().kind == Tok::AndAnd) {
      advance();
      ExprPtr rhs = parse_cmp();
      if (!rhs) return nullptr;
      lhs = make_expr(NodeKind::And, "", {lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_sum();
    if (!lhs) return nullptr;
    switch (cur().kind) {
      case Tok::Eq: case Tok::Ne: case Tok::Lt:
      case Tok::Le: case Tok::Gt: case Tok::Ge: {
        std::string op = cur().text;
        advance();
        ExprPtr rhs = parse_sum();
        if (!rhs) return nullptr;
        return make_expr(NodeKind::Compare, op, {lhs, rhs});
      }
      default:
        return lhs;
    }
  }

  ExprPtr parse_sum() {
    ExprPtr lhs = parse_term();
    if (!lhs) return nullptr;
    while (cur().kind == Tok::Plus || cur().kind == Tok::Minus) {
      std::string op = cur().text;
      advance();
      ExprPtr rhs = parse_term();
      if (!rhs) return nullptr;
      lhs = make_expr(NodeKind::Arith, op, {lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_factor();
    if (!lhs) return nullptr;
    while (cur().kind == Tok::Star || cur().kind == Tok::Slash ||
           cur().kind == Tok::Percent) {
      std::string op = cur().text;
      advance();
      ExprPtr rhs = parse_factor();
      if (!rhs) return nullptr;
      lhs = make_expr(NodeKind::Arith, op, {lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_factor() {
    if (cur().kind == Tok::Not) {
      advance();
      ExprPtr e = parse_factor();
      if (!e) return nullptr;
      return make_expr(NodeKind::Not, "", {e});
    }
    if (cur().kind == Tok::Minus) {
      advance();
      ExprPtr e = parse_factor();
      if (!e) return nullptr;
      return make_expr(NodeKind::Neg, "", {e});
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    if (!e) return nullptr;
    while (cur().kind == Tok::Arrow || cur().kind == Tok::Dot) {
      bool arrow = cur().kind == Tok::Arrow;
      size_t pos = cur().pos;
      advance();
      if (cur().kind != Tok::Ident)
        return fail(pos, "expected field name after member access");
      std::string name = cur().text;
      advance();
      e = make_expr(NodeKind::Field, name, {e}, arrow);
    }
    return e;
  }

  ExprPtr parse_args(size_t pos, const std::string& pred, size_t arity,
                     std::vector<ExprPtr>& out) {
    advance();  // '('
    for (size_t n = 0;; ++n) {
      ExprPtr a = parse_implies();
      if (!a) return nullptr;
      out.push_back(a);
      if (cur().kind == Tok::Comma) { advance(); continue; }
      break;
    }
    if (cur().kind != Tok::RParen)
      return fail(cur().pos, "expected ')' in " + pred + " arguments");
    advance();
    if (out.size() != arity)
      return fail(pos, pred + " expects " + std::to_string(arity) +
                           " argument(s), got " + std::to_string(out.size()));
    return out.front();
  }

  ExprPtr parse_primary() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Int: {
        advance();
        return make_expr(NodeKind::IntConst, t.text);
      }
      case Tok::LParen: {
        advance();
        ExprPtr e = parse_implies();
        if (!e) return nullptr;
        if (cur().kind != Tok::RParen) return fail(cur().pos, "expected ')'");
        advance();
        return e;
      }
      case Tok::Ident: {
        std::string name = t.text;
        size_t pos = t.pos;
        if (toks[i + 1].kind == Tok::LParen) {
          advance();  // ident
          if (name == "old") {
            if (in_old) return fail(pos, "nested old");
            in_old = true;
            std::vector<ExprPtr> args;
            if (!parse_args(pos, name, 1, args)) return nullptr;
            in_old = false;
            return make_expr(NodeKind::Old, "", {args[0]});
          }
          if (name == "null" || name == "valid" || name == "valid_string") {
            std::vector<ExprPtr> args;
            if (!parse_args(pos, name, 1, args)) return nullptr;
            NodeKind k = name == "null"    ? NodeKind::Null
                         : name == "valid" ? NodeKind::Valid
                                           : NodeKind::ValidString;
            return make_expr(k, "", {args[0]});
          }
          if (name == "valid_range") {
            std::vector<ExprPtr> args;
            if (!parse_args(pos, name, 3, args)) return nullptr;
            return make_expr(NodeKind::ValidRange, "", std::move(args));
          }
          return fail(pos, "unknown predicate '" + name + "'");
        }
        advance();
        if (name == "result") return make_expr(NodeKind::Result);
        if (kNamedConsts.count(name)) return make_expr(NodeKind::NamedConst, name);
        if (known) {
          if (std::find(known->begin(), known->end(), name) == known->end())
            return fail(pos, "unresolved identifier '" + name + "'");
        }
        return make_expr(NodeKind::Ident, name);
      }
      default:
        return fail(t.pos, "expected expression");
    }
  }
};

}  // namespace

ParseResult parse_spec(const std::string& text,
                       const std::vector<std::string>* known_idents) {
  std::optional<ParseError> lex_err;
  std::vector<Token> toks = lex(text, lex_err);
  if (lex_err) return {nullptr, lex_err};
  Parser p{toks, known_idents};
  ExprPtr e = p.parse_implies();
  if (!e) return {nullptr, p.err};
  if (p.cur().kind != Tok::End)
    return {nullptr, ParseError{p.cur().pos,
                                "unexpected token '" + p.cur().text + "'"}};
  return {e, std::nullopt};
}

// ---------------------------------------------------------------------------
// Printing

namespace {

enum class Surface { dsl, c, rust };

int prec_of(const SpecExpr& e) {
  switch (e.kind) {
    case NodeKind::Implies: return 0;
    case NodeKind::Or: return 1;
    case NodeKind::And: return 2;
    case NodeKind::Compare: return 3;
    case NodeKind::Arith: return (e.text == "+" || e.text == "-") ? 4 : 5;
    case NodeKind::Not:
    case NodeKind::Neg: return 6;
    case NodeKind::Field: return 7;
    default: return 8;
  }
}

std::string emit(const ExprPtr& e, Surface s, int minprec);

std::string wrap(std::string body, int prec, int minprec) {
  if (prec < minprec) return "(" + std::move(body) + ")";
  return body;
}

std::string named_const(const std::string& name, Surface s) {
  if (s == Surface::dsl) return name;
  if (name == "MAX_UNSIGNED") return s == Surface::c ? "SIZE_MAX" : "usize::MAX";
  if (name == "true") return s == Surface::c ? "1" : "true";
  return s == Surface::c ? "0" : "false";
}

std::string emit(const ExprPtr& e, Surface s, int minprec) {
  switch (e->kind) {
    case NodeKind::Implies: {
      if (s == Surface::dsl)
        return wrap(emit(e->kids[0], s, 1) + " implies " + emit(e->kids[1], s, 0),
                    0, minprec);
      // backend surfaces lower implies to !a || b
      auto neg = make_expr(NodeKind::Not, "", {e->kids[0]});
      return wrap(emit(neg, s, 2) + " || " + emit(e->kids[1], s, 2), 1, minprec);
    }
    case NodeKind::Or:
      return wrap(emit(e->kids[0], s, 1) + " || " + emit(e->kids[1], s, 2), 1,
                  minprec);
    case NodeKind::And:
      return wrap(emit(e->kids[0], s, 2) + " && " + emit(e->kids[1], s, 3), 2,
                  minprec);
    case NodeKind::Compare:
      return wrap(emit(e->kids[0], s, 4) + " " + e->text + " " +
                      emit(e->kids[1], s, 4),
                  3, minprec);
    case NodeKind::Arith: {
      int p = prec_of(*e);
      return wrap(emit(e->kids[0], s, p) + " " + e->text + " " +
                      emit(e->kids[1], s, p + 1),
                  p, minprec);
    }
    case NodeKind::Not:
      return wrap("!" + emit(e->kids[0], s, 6), 6, minprec);
    case NodeKind::Neg:
      return wrap("-" + emit(e->kids[0], s, 6), 6, minprec);
    case NodeKind::IntConst:
      return e->text;
    case NodeKind::NamedConst:
      return named_const(e->text, s);
    case NodeKind::Ident:
      return e->text;
    case NodeKind::Result:
      return "result";
    case NodeKind::Field: {
      const char* sep = s == Surface::rust ? "." : (e->arrow ? "->" : ".");
      return wrap(emit(e->kids[0], s, 7) + sep + e->text, 7, minprec);
    }
    case NodeKind::Null:
      if (s == Surface::dsl) return "null(" + emit(e->kids[0], s, 0) + ")";
      if (s == Surface::rust)
        return wrap(emit(e->kids[0], s, 7) + ".is_null()", 7, minprec);
      return wrap(emit(e->kids[0], s, 4) + " == NULL", 3, minprec);
    case NodeKind::Valid:
      if (s == Surface::dsl) return "valid(" + emit(e->kids[0], s, 0) + ")";
      if (s == Surface::rust) return "true";  // validity is structural
      return "__CPROVER_r_ok(" + emit(e->kids[0], s, 0) + ", 1)";
    case NodeKind::ValidRange: {
      if (s == Surface::dsl)
        return "valid_range(" + emit(e->kids[0], s, 0) + ", " +
               emit(e->kids[1], s, 0) + ", " + emit(e->kids[2], s, 0) + ")";
      if (s == Surface::rust) return "true";
      const auto& lo = e->kids[1];
      if (lo->kind == NodeKind::IntConst && lo->text == "0")
        return "__CPROVER_r_ok(" + emit(e->kids[0], s, 0) + ", " +
               emit(e->kids[2], s, 0) + ")";
      return "__CPROVER_r_ok((const char *)(" + emit(e->kids[0], s, 0) +
             ") + (" + emit(e->kids[1], s, 0) + "), (" +
             emit(e->kids[2], s, 0) + ") - (" + emit(e->kids[1], s, 0) + "))";
    }
    case NodeKind::ValidString:
      if (s == Surface::dsl) return "valid_string(" + emit(e->kids[0], s, 0) + ")";
      if (s == Surface::rust) return "true";
      return "(" + emit(e->kids[0], s, 4) + " != NULL && __CPROVER_is_zero_string(" +
             emit(e->kids[0], s, 0) + "))";
    case NodeKind::Old:
      return "old(" + emit(e->kids[0], s, 0) + ")";
  }
  return "";
}

}  // namespace

std::string pretty(const ExprPtr& e) { return emit(e, Surface::dsl, 0); }

std::string emit_condition(const ExprPtr& expr, Dialect dialect) {
  return emit(expr, dialect == Dialect::c_backend ? Surface::c : Surface::rust, 0);
}

ExprPtr merge_functional(const ExprPtr& post, const ExprPtr& functional) {
  if (!functional) return post;
  return make_expr(NodeKind::And, "", {post, functional});
}

// ---------------------------------------------------------------------------
// old() lifting

namespace {

ExprPtr lift_rec(const ExprPtr& e,
                 std::vector<std::pair<std::string, ExprPtr>>& bindings,
                 std::map<std::string, std::string>& seen) {
  if (e->kind == NodeKind::Old) {
    std::string key = pretty(e->kids[0]);
    auto it = seen.find(key);
    std::string name;
    if (it == seen.end()) {
      name = "_pre_" + std::to_string(bindings.size());
      seen.emplace(key, name);
      bindings.emplace_back(name, e->kids[0]);
    } else {
      name = it->second;
    }
    return make_expr(NodeKind::Ident, name);
  }
  if (!contains_old(e)) return e;
  std::vector<ExprPtr> kids;
  kids.reserve(e->kids.size());
  for (const auto& k : e->kids) kids.push_back(lift_rec(k, bindings, seen));
  return make_expr(e->kind, e->text, std::move(kids), e->arrow);
}

}  // namespace

LiftResult lift_old(const ExprPtr& expr) {
  LiftResult r;
  if (!contains_old(expr)) {
    r.rewritten = expr;
    return r;
  }
  std::map<std::string, std::string> seen;
  r.rewritten = lift_rec(expr, r.bindings, seen);
  return r;
}

// ---------------------------------------------------------------------------
// Translation

namespace {

void flatten_and(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (e->kind == NodeKind::And) {
    flatten_and(e->kids[0], out);
    flatten_and(e->kids[1], out);
    return;
  }
  out.push_back(e);
}

void collect_divisors(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (e->kind == NodeKind::Arith && (e->text == "/" || e->text == "%")) {
    collect_divisors(e->kids[0], out);
    out.push_back(e->kids[1]);
    collect_divisors(e->kids[1], out);
    return;
  }
  for (const auto& k : e->kids) collect_divisors(k, out);
}

bool is_pure_memory_pred(const ExprPtr& e) {
  return e->kind == NodeKind::Valid || e->kind == NodeKind::ValidRange ||
         e->kind == NodeKind::ValidString;
}

}  // namespace

bool is_trivially_true(const ExprPtr& expr) {
  return expr && expr->kind == NodeKind::NamedConst && expr->text == "true";
}

TranslateResult translate(const ExprPtr& expr, Dialect dialect,
                          TranslateMode mode, const LabelScheme& labels) {
  TranslateResult out;
  if (contains_old(expr)) {
    out.error = TranslationError{"old() must be lifted before translation"};
    return out;
  }
  Surface surf = dialect == Dialect::c_backend ? Surface::c : Surface::rust;
  std::vector<ExprPtr> conjuncts;
  flatten_and(expr, conjuncts);
  size_t label_index = 0;
  for (const auto& c : conjuncts) {
    if (surf == Surface::rust && is_pure_memory_pred(c)) {
      // reference types already encode pointer validity
      std::string line = "// no-op: " + pretty(c) + " holds structurally in rust";
      if (mode == TranslateMode::assume) out.fragments.assume_lines.push_back(line);
      else out.fragments.assert_lines.push_back(line);
      continue;
    }
    std::string cond = emit(c, surf, 0);
    if (mode == TranslateMode::assume) {
      // a spec clause must not itself divide by zero
      std::vector<ExprPtr> divisors;
      collect_divisors(c, divisors);
      std::string guards;
      std::vector<std::string> seen_guards;
      for (const auto& d : divisors) {
        std::string g = emit(d, surf, 4) + " != 0";
        if (std::find(seen_guards.begin(), seen_guards.end(), g) !=
            seen_guards.end())
          continue;
        seen_guards.push_back(g);
        guards += g + " && ";
      }
      if (!guards.empty()) cond = guards + emit(c, surf, 3);
      if (surf == Surface::c)
        out.fragments.assume_lines.push_back("__CPROVER_assume(" + cond + ");");
      else
        out.fragments.assume_lines.push_back("kani::assume(" + cond + ");");
    } else {
      std::string label = labels.function + "." + labels.clause_kind + "." +
                          std::to_string(label_index++);
      if (surf == Surface::c)
        out.fragments.assert_lines.push_back("__CPROVER_assert(" + cond +
                                             ", \"" + label + "\");");
      else
        out.fragments.assert_lines.push_back("kani::assert(" + cond + ", \"" +
                                             label + "\");");
    }
  }
  return out;
}

}  // namespace bmca::dsl
