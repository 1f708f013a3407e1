#pragma once

// LTL formulas over named atomic propositions: parsing, printing, negation
// normal form, and evaluation on ultimately periodic words.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ltlfuzz {

enum class Op : std::uint8_t {
  AP,
  True,
  False,
  Not,
  And,
  Or,
  Implies,
  Next,
  Until,
  Release,
  Finally,
  Globally,
};

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Immutable LTL syntax tree node. Build with the free factory functions below.
class Formula {
 public:
  Formula(Op op, std::string name, FormulaPtr lhs, FormulaPtr rhs)
      : op_(op), name_(std::move(name)), lhs_(std::move(lhs)), rhs_(std::move(rhs)) {}

  Op op() const { return op_; }
  const std::string& name() const { return name_; }
  const FormulaPtr& lhs() const { return lhs_; }
  const FormulaPtr& rhs() const { return rhs_; }
  /// Operand of a unary node.
  const FormulaPtr& child() const { return lhs_; }

 private:
  Op op_;
  std::string name_;
  FormulaPtr lhs_;
  FormulaPtr rhs_;
};

inline FormulaPtr ap(std::string name) {
  return std::make_shared<Formula>(Op::AP, std::move(name), nullptr, nullptr);
}
inline FormulaPtr f_true() { return std::make_shared<Formula>(Op::True, "", nullptr, nullptr); }
inline FormulaPtr f_false() { return std::make_shared<Formula>(Op::False, "", nullptr, nullptr); }
inline FormulaPtr unary(Op op, FormulaPtr f) {
  return std::make_shared<Formula>(op, "", std::move(f), nullptr);
}
inline FormulaPtr binary(Op op, FormulaPtr l, FormulaPtr r) {
  return std::make_shared<Formula>(op, "", std::move(l), std::move(r));
}
inline FormulaPtr f_not(FormulaPtr f) { return unary(Op::Not, std::move(f)); }
inline FormulaPtr f_next(FormulaPtr f) { return unary(Op::Next, std::move(f)); }
inline FormulaPtr f_finally(FormulaPtr f) { return unary(Op::Finally, std::move(f)); }
inline FormulaPtr f_globally(FormulaPtr f) { return unary(Op::Globally, std::move(f)); }
inline FormulaPtr f_and(FormulaPtr l, FormulaPtr r) { return binary(Op::And, std::move(l), std::move(r)); }
inline FormulaPtr f_or(FormulaPtr l, FormulaPtr r) { return binary(Op::Or, std::move(l), std::move(r)); }
inline FormulaPtr f_implies(FormulaPtr l, FormulaPtr r) {
  return binary(Op::Implies, std::move(l), std::move(r));
}
inline FormulaPtr f_until(FormulaPtr l, FormulaPtr r) { return binary(Op::Until, std::move(l), std::move(r)); }
inline FormulaPtr f_release(FormulaPtr l, FormulaPtr r) {
  return binary(Op::Release, std::move(l), std::move(r));
}

inline bool is_unary(Op op) {
  return op == Op::Not || op == Op::Next || op == Op::Finally || op == Op::Globally;
}
inline bool is_binary(Op op) {
  return op == Op::And || op == Op::Or || op == Op::Implies || op == Op::Until || op == Op::Release;
}

inline bool equal(const Formula& a, const Formula& b) {
  if (&a == &b) return true;
  if (a.op() != b.op()) return false;
  if (a.op() == Op::AP) return a.name() == b.name();
  if (is_unary(a.op())) return equal(*a.child(), *b.child());
  if (is_binary(a.op())) return equal(*a.lhs(), *b.lhs()) && equal(*a.rhs(), *b.rhs());
  return true;
}
inline bool operator==(const Formula& a, const Formula& b) { return equal(a, b); }

/// Number of syntax tree nodes.
inline std::size_t size(const Formula& f) {
  if (is_unary(f.op())) return 1 + size(*f.child());
  if (is_binary(f.op())) return 1 + size(*f.lhs()) + size(*f.rhs());
  return 1;
}

inline void collect_aps(const Formula& f, std::set<std::string>& out) {
  if (f.op() == Op::AP) out.insert(f.name());
  if (f.lhs()) collect_aps(*f.lhs(), out);
  if (f.rhs()) collect_aps(*f.rhs(), out);
}

inline std::set<std::string> atomic_propositions(const Formula& f) {
  std::set<std::string> out;
  collect_aps(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Binding strength, higher binds tighter.
inline int precedence(Op op) {
  switch (op) {
    case Op::Implies: return 1;
    case Op::Or: return 2;
    case Op::And: return 3;
    case Op::Release: return 4;
    case Op::Until: return 5;
    case Op::Not:
    case Op::Next:
    case Op::Finally:
    case Op::Globally: return 6;
    default: return 7;
  }
}

inline bool right_assoc(Op op) { return op == Op::Until || op == Op::Release || op == Op::Implies; }

inline const char* op_symbol(Op op) {
  switch (op) {
    case Op::Not: return "!";
    case Op::Next: return "X ";
    case Op::Finally: return "F ";
    case Op::Globally: return "G ";
    case Op::And: return " & ";
    case Op::Or: return " | ";
    case Op::Implies: return " -> ";
    case Op::Until: return " U ";
    case Op::Release: return " R ";
    default: return "";
  }
}

inline void print(const Formula& f, std::string& out) {
  auto emit = [&out](const Formula& sub, bool parens) {
    if (parens) out += '(';
    print(sub, out);
    if (parens) out += ')';
  };
  const int prec = precedence(f.op());
  switch (f.op()) {
    case Op::AP: out += f.name(); return;
    case Op::True: out += "true"; return;
    case Op::False: out += "false"; return;
    default: break;
  }
  if (is_unary(f.op())) {
    out += op_symbol(f.op());
    emit(*f.child(), precedence(f.child()->op()) < prec);
    return;
  }
  const int lp = precedence(f.lhs()->op());
  const int rp = precedence(f.rhs()->op());
  const bool ra = right_assoc(f.op());
  emit(*f.lhs(), lp < prec || (ra && lp == prec));
  out += op_symbol(f.op());
  emit(*f.rhs(), rp < prec || (!ra && rp == prec));
}

}  // namespace detail

/// Prints with the minimal parentheses the parser needs to rebuild the same tree.
inline std::string to_string(const Formula& f) {
  std::string out;
  detail::print(f, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                           what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

namespace detail {

enum class Tok { Ident, True, False, Not, Next, Finally, Globally, Until, Release, And, Or, Implies, LParen, RParen, End };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", line_, col_});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        return;
      }
    }
  }

  bool starts(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  Token next() {
    const int line = line_, col = col_;
    auto make = [&](Tok k, std::size_t n) {
      Token t{k, std::string(src_.substr(pos_, n)), line, col};
      advance(n);
      return t;
    };
    struct Sym {
      std::string_view text;
      Tok kind;
    };
    static constexpr Sym symbols[] = {
        {"->", Tok::Implies}, {"→", Tok::Implies}, {"&&", Tok::And}, {"||", Tok::Or},   {"&", Tok::And},
        {"∧", Tok::And},      {"|", Tok::Or},      {"∨", Tok::Or},   {"!", Tok::Not},   {"¬", Tok::Not},
        {"~", Tok::Not},      {"(", Tok::LParen},  {")", Tok::RParen}, {"◇", Tok::Finally}, {"□", Tok::Globally},
    };
    for (const auto& s : symbols)
      if (starts(s.text)) return make(s.kind, s.text.size());

    char c = src_[pos_];
    if (c >= 'A' && c <= 'Z') {
      std::size_t n = word_length();
      if (n == 1) {
        switch (c) {
          case 'X': return make(Tok::Next, 1);
          case 'F': return make(Tok::Finally, 1);
          case 'G': return make(Tok::Globally, 1);
          case 'U': return make(Tok::Until, 1);
          case 'R': return make(Tok::Release, 1);
          default: break;
        }
      }
      throw ParseError("unknown operator '" + std::string(src_.substr(pos_, n)) + "'", line, col);
    }
    if ((c >= 'a' && c <= 'z') || c == '_') {
      std::size_t n = word_length();
      std::string word(src_.substr(pos_, n));
      if (word == "true") return make(Tok::True, n);
      if (word == "false") return make(Tok::False, n);
      return make(Tok::Ident, n);
    }
    std::size_t n = 1;
    while (pos_ + n < src_.size() && (static_cast<unsigned char>(src_[pos_ + n]) & 0xC0) == 0x80) ++n;
    throw ParseError("unknown operator '" + std::string(src_.substr(pos_, n)) + "'", line, col);
  }

  std::size_t word_length() const {
    std::size_t n = 0;
    while (pos_ + n < src_.size()) {
      char c = src_[pos_ + n];
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')
        ++n;
      else
        break;
    }
    return n;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// implies := or ('->' implies)?
// or      := and ('|' and)*
// and     := release ('&' release)*
// release := until ('R' release)?
// until   := unary ('U' until)?
// unary   := ('!'|'X'|'F'|'G') unary | atom
class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  FormulaPtr run() {
    if (peek().kind == Tok::End) throw ParseError("empty input", peek().line, peek().column);
    FormulaPtr f = implies();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().line, peek().column); }

  FormulaPtr implies() {
    FormulaPtr lhs = disjunction();
    if (peek().kind == Tok::Implies) {
      take();
      return f_implies(lhs, implies());
    }
    return lhs;
  }
  FormulaPtr disjunction() {
    FormulaPtr lhs = conjunction();
    while (peek().kind == Tok::Or) {
      take();
      lhs = f_or(lhs, conjunction());
    }
    return lhs;
  }
  FormulaPtr conjunction() {
    FormulaPtr lhs = release();
    while (peek().kind == Tok::And) {
      take();
      lhs = f_and(lhs, release());
    }
    return lhs;
  }
  FormulaPtr release() {
    FormulaPtr lhs = until();
    if (peek().kind == Tok::Release) {
      take();
      return f_release(lhs, release());
    }
    return lhs;
  }
  FormulaPtr until() {
    FormulaPtr lhs = prefix();
    if (peek().kind == Tok::Until) {
      take();
      return f_until(lhs, until());
    }
    return lhs;
  }
  FormulaPtr prefix() {
    switch (peek().kind) {
      case Tok::Not: take(); return f_not(prefix());
      case Tok::Next: take(); return f_next(prefix());
      case Tok::Finally: take(); return f_finally(prefix());
      case Tok::Globally: take(); return f_globally(prefix());
      default: return atom();
    }
  }
  FormulaPtr atom() {
    switch (peek().kind) {
      case Tok::Ident: return ap(take().text);
      case Tok::True: take(); return f_true();
      case Tok::False: take(); return f_false();
      case Tok::LParen: {
        take();
        FormulaPtr f = implies();
        if (peek().kind != Tok::RParen) fail("expected ')'");
        take();
        return f;
      }
      case Tok::End: fail("unexpected end of input");
      default: fail("unexpected '" + peek().text + "'");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the ASCII (or Unicode) concrete syntax. `#` starts a comment that runs to end of line.
inline FormulaPtr parse_ltl(std::string_view text) {
  return detail::Parser(detail::Lexer(text).run()).run();
}

// ---------------------------------------------------------------------------
// Negation normal form

inline FormulaPtr negate(const FormulaPtr& f) { return f_not(f); }

namespace detail {

inline FormulaPtr nnf(const FormulaPtr& f, bool negated) {
  switch (f->op()) {
    case Op::AP: return negated ? f_not(f) : f;
    case Op::True: return negated ? f_false() : f;
    case Op::False: return negated ? f_true() : f;
    case Op::Not: return nnf(f->child(), !negated);
    case Op::Next: return f_next(nnf(f->child(), negated));
    case Op::And: {
      auto l = nnf(f->lhs(), negated), r = nnf(f->rhs(), negated);
      return negated ? f_or(l, r) : f_and(l, r);
    }
    case Op::Or: {
      auto l = nnf(f->lhs(), negated), r = nnf(f->rhs(), negated);
      return negated ? f_and(l, r) : f_or(l, r);
    }
    case Op::Implies: {
      // a -> b == !a | b
      auto l = nnf(f->lhs(), !negated), r = nnf(f->rhs(), negated);
      return negated ? f_and(l, r) : f_or(l, r);
    }
    case Op::Until: {
      auto l = nnf(f->lhs(), negated), r = nnf(f->rhs(), negated);
      return negated ? f_release(l, r) : f_until(l, r);
    }
    case Op::Release: {
      auto l = nnf(f->lhs(), negated), r = nnf(f->rhs(), negated);
      return negated ? f_until(l, r) : f_release(l, r);
    }
    case Op::Finally: {
      auto body = nnf(f->child(), negated);
      return negated ? f_release(f_false(), body) : f_until(f_true(), body);
    }
    case Op::Globally: {
      auto body = nnf(f->child(), negated);
      return negated ? f_until(f_true(), body) : f_release(f_false(), body);
    }
  }
  return f;
}

}  // namespace detail

/// Pushes negations to the atoms and rewrites F, G and -> into U, R, | forms.
inline FormulaPtr to_nnf(const FormulaPtr& f) { return detail::nnf(f, false); }

inline bool is_nnf(const Formula& f) {
  switch (f.op()) {
    case Op::AP:
    case Op::True:
    case Op::False: return true;
    case Op::Not: return f.child()->op() == Op::AP;
    case Op::Implies:
    case Op::Finally:
    case Op::Globally: return false;
    case Op::Next: return is_nnf(*f.child());
    default: return is_nnf(*f.lhs()) && is_nnf(*f.rhs());
  }
}

// ---------------------------------------------------------------------------
// Lasso semantics

/// The infinite word prefix . loop^omega. Each position carries exactly one
/// proposition, which is true there; every other proposition is false.
struct LassoWord {
  std::vector<std::string> prefix;
  std::vector<std::string> loop;

  std::size_t length() const { return prefix.size() + loop.size(); }
  const std::string& at(std::size_t i) const {
    return i < prefix.size() ? prefix[i] : loop[i - prefix.size()];
  }
  /// Successor of position i on the lasso's finite graph.
  std::size_t succ(std::size_t i) const { return i + 1 < length() ? i + 1 : prefix.size(); }
};

namespace detail {

// Truth vector over the lasso's positions. Until is the least fixpoint of its
// expansion law and Release the greatest, iterated to stability around the loop.
inline std::vector<bool> eval_positions(const Formula& f, const LassoWord& w) {
  const std::size_t n = w.length();
  std::vector<bool> out(n);
  switch (f.op()) {
    case Op::AP:
      for (std::size_t i = 0; i < n; ++i) out[i] = w.at(i) == f.name();
      return out;
    case Op::True: out.assign(n, true); return out;
    case Op::False: return out;
    case Op::Not: {
      auto c = eval_positions(*f.child(), w);
      for (std::size_t i = 0; i < n; ++i) out[i] = !c[i];
      return out;
    }
    case Op::Next: {
      auto c = eval_positions(*f.child(), w);
      for (std::size_t i = 0; i < n; ++i) out[i] = c[w.succ(i)];
      return out;
    }
    case Op::And:
    case Op::Or:
    case Op::Implies: {
      auto l = eval_positions(*f.lhs(), w), r = eval_positions(*f.rhs(), w);
      for (std::size_t i = 0; i < n; ++i) {
        if (f.op() == Op::And) out[i] = l[i] && r[i];
        else if (f.op() == Op::Or) out[i] = l[i] || r[i];
        else out[i] = !l[i] || r[i];
      }
      return out;
    }
    case Op::Finally:
    case Op::Globally: {
      auto c = eval_positions(*f.child(), w);
      const bool until = f.op() == Op::Finally;
      std::vector<bool> hold(n, !until);
      for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t k = n; k-- > 0;) {
          bool v = until ? (c[k] || hold[w.succ(k)]) : (c[k] && hold[w.succ(k)]);
          if (v != hold[k]) hold[k] = v, changed = true;
        }
      }
      return hold;
    }
    case Op::Until:
    case Op::Release: {
      auto l = eval_positions(*f.lhs(), w), r = eval_positions(*f.rhs(), w);
      const bool until = f.op() == Op::Until;
      std::vector<bool> hold(n, !until);
      for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t k = n; k-- > 0;) {
          bool v = until ? (r[k] || (l[k] && hold[w.succ(k)])) : (r[k] && (l[k] || hold[w.succ(k)]));
          if (v != hold[k]) hold[k] = v, changed = true;
        }
      }
      return hold;
    }
  }
  return out;
}

}  // namespace detail

/// Whether prefix . loop^omega satisfies f. The loop must be non-empty.
inline bool eval_on_lasso(const Formula& f, const LassoWord& w) {
  if (w.loop.empty()) throw std::invalid_argument("lasso loop must be non-empty");
  return detail::eval_positions(f, w)[0];
}

}  // namespace ltlfuzz
