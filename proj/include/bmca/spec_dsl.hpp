#ifndef BMCA_SPEC_DSL_HPP
#define BMCA_SPEC_DSL_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bmca::dsl {

// Restricted specification language. Clauses are single boolean expressions
// over parameters, field paths, `result`, integer/named constants and a
// closed predicate set. Anything outside the grammar is a parse error.
enum class NodeKind {
  And,
  Or,
  Not,
  Implies,
  Compare,     // text = "==" "!=" "<" "<=" ">" ">="
  Arith,       // text = "+" "-" "*" "/" "%"
  Neg,         // unary minus
  IntConst,    // text = literal digits
  NamedConst,  // text = MAX_UNSIGNED | true | false
  Ident,       // parameter reference
  Field,       // kids[0] = base, text = field name, arrow = p->f vs p.f
  Result,
  Null,         // null(P)
  Valid,        // valid(P)
  ValidRange,   // valid_range(P, LO, HI)
  ValidString,  // valid_string(P)
  Old,          // old(E), pre-state snapshot
};

struct SpecExpr;
using ExprPtr = std::shared_ptr<const SpecExpr>;

struct SpecExpr {
  NodeKind kind;
  std::string text;
  std::vector<ExprPtr> kids;
  bool arrow = false;
};

ExprPtr make_expr(NodeKind kind, std::string text = {},
                  std::vector<ExprPtr> kids = {}, bool arrow = false);

bool equal(const ExprPtr& a, const ExprPtr& b);
bool contains_old(const ExprPtr& e);

// Deterministic, minimally parenthesized; parse(pretty(e)) == e structurally.
std::string pretty(const ExprPtr& e);

struct ParseError {
  size_t position = 0;
  std::string reason;
};

struct ParseResult {
  ExprPtr expr;                    // null on error
  std::optional<ParseError> error;
  bool ok() const { return expr != nullptr; }
};

// Parses one boolean clause. When `known_idents` is non-null every bare
// identifier leaf must name a member of the set (named constants and
// `result` are always allowed); unknown identifiers are rejected.
ParseResult parse_spec(const std::string& text,
                       const std::vector<std::string>* known_idents = nullptr);

ExprPtr merge_functional(const ExprPtr& post, const ExprPtr& functional);

// Rewrites old(E) into fresh _pre_N references, N assigned in left-to-right
// first-occurrence order; structurally identical snapshots share a binding.
struct LiftResult {
  std::vector<std::pair<std::string, ExprPtr>> bindings;
  ExprPtr rewritten;
};
LiftResult lift_old(const ExprPtr& expr);

enum class Dialect { c_backend, rust_backend };
enum class TranslateMode { assume, assert_ };

struct HarnessFragments {
  std::vector<std::string> prelude_bindings;
  std::vector<std::string> assume_lines;
  std::vector<std::string> assert_lines;
};

struct LabelScheme {
  std::string function = "main";
  std::string clause_kind = "assertion";
};

struct TranslationError {
  std::string reason;
};

struct TranslateResult {
  HarnessFragments fragments;
  std::optional<TranslationError> error;
  bool ok() const { return !error.has_value(); }
};

// Pure and byte-stable. Top-level conjuncts become one line each; assert
// labels follow "<fn>.<clause_kind>.<index>". Expressions containing old()
// must be lifted first.
TranslateResult translate(const ExprPtr& expr, Dialect dialect,
                          TranslateMode mode, const LabelScheme& labels = {});

// Raw condition text for one expression in a dialect (no assume/assert
// wrapper). Used by harness pinning and stub generation.
std::string emit_condition(const ExprPtr& expr, Dialect dialect);

bool is_trivially_true(const ExprPtr& expr);

}  // namespace bmca::dsl

#endif
