#include "psv/toy.hpp"

#include <cctype>
#include <regex>
#include <sstream>

#include "psv/specpipe.hpp"

namespace psv::toy {

struct Expr::Node {
  enum class Kind { Lit, Var, Neg, Add, Sub, Mul } kind;
  std::int64_t value = 0;
  NodePtr lhs;
  NodePtr rhs;
};

namespace {

using Node = Expr::Node;
using NodePtr = Expr::NodePtr;

class Parser {
 public:
  Parser(std::string_view text, std::string_view variable) : text_(text), var_(variable) {}

  NodePtr parse() {
    skip_ws();
    if (at_end()) fail("empty expression");
    auto e = expr();
    skip_ws();
    if (!at_end()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

  std::string shape() const { return shape_; }

 private:
  NodePtr expr() {
    auto lhs = term();
    while (true) {
      skip_ws();
      if (peek('+') || peek('-')) {
        const char op = text_[pos_++];
        shape_ += op;
        auto rhs = term();
        lhs = make(op == '+' ? Node::Kind::Add : Node::Kind::Sub, 0, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    while (true) {
      skip_ws();
      if (peek('*')) {
        ++pos_;
        shape_ += '*';
        auto rhs = unary();
        lhs = make(Node::Kind::Mul, 0, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    skip_ws();
    if (peek('-')) {
      ++pos_;
      shape_ += '-';
      return make(Node::Kind::Neg, 0, unary(), nullptr);
    }
    return primary();
  }

  NodePtr primary() {
    skip_ws();
    if (at_end()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      shape_ += '(';
      auto e = expr();
      skip_ws();
      if (!peek(')')) fail("expected ')'");
      ++pos_;
      shape_ += ')';
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::int64_t v = 0;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        const int d = text_[pos_++] - '0';
        if (__builtin_mul_overflow(v, 10, &v) || __builtin_add_overflow(v, d, &v)) {
          fail("integer literal out of range");
        }
      }
      shape_ += 'c';
      return make(Node::Kind::Lit, v, nullptr, nullptr);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const auto start = pos_;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                           text_[pos_] == '_')) {
        ++pos_;
      }
      const auto name = text_.substr(start, pos_ - start);
      if (name != var_) fail("undeclared variable '" + std::string(name) + "'");
      shape_ += 'x';
      return make(Node::Kind::Var, 0, nullptr, nullptr);
    }
    fail(std::string("unexpected '") + c + "'");
  }

  static NodePtr make(Node::Kind k, std::int64_t v, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = v;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("parse error at offset " + std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  bool peek(char c) const { return !at_end() && text_[pos_] == c; }

  std::string_view text_;
  std::string_view var_;
  std::size_t pos_ = 0;
  std::string shape_;
};

std::optional<std::int64_t> eval_node(const Node& n, std::int64_t x) {
  switch (n.kind) {
    case Node::Kind::Lit:
      return n.value;
    case Node::Kind::Var:
      return x;
    case Node::Kind::Neg: {
      auto a = eval_node(*n.lhs, x);
      std::int64_t r;
      if (!a || __builtin_sub_overflow(std::int64_t{0}, *a, &r)) return std::nullopt;
      return r;
    }
    default:
      break;
  }
  const auto a = eval_node(*n.lhs, x);
  const auto b = eval_node(*n.rhs, x);
  if (!a || !b) return std::nullopt;
  std::int64_t r;
  bool overflow = false;
  switch (n.kind) {
    case Node::Kind::Add:
      overflow = __builtin_add_overflow(*a, *b, &r);
      break;
    case Node::Kind::Sub:
      overflow = __builtin_sub_overflow(*a, *b, &r);
      break;
    default:
      overflow = __builtin_mul_overflow(*a, *b, &r);
      break;
  }
  if (overflow) return std::nullopt;
  return r;
}

std::vector<std::string> clauses(std::string_view section) {
  std::vector<std::string> out;
  for (auto& c : split(section, ',')) {
    auto t = trim(c);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

Expr Expr::parse(std::string_view text, std::string_view variable) {
  Parser p(text, variable);
  Expr e;
  e.root_ = p.parse();
  e.shape_ = p.shape();
  e.source_ = trim(text);
  return e;
}

std::optional<std::int64_t> Expr::eval(std::int64_t x) const { return eval_node(*root_, x); }

ToySpec ToySpec::parse(std::string_view spec_text) {
  specpipe::SpecParts parts;
  try {
    parts = specpipe::split_spec(spec_text);
  } catch (const specpipe::SpecError& e) {
    throw ParseError(e.what());
  }
  if (!parts.helpers.empty()) throw ParseError("helper items are not supported in the toy domain");

  const auto header = specpipe::normalize(parts.target_header);
  static const std::regex sig(
      R"(^(?:pub )?fn ([A-Za-z_]\w*) ?\( ?([A-Za-z_]\w*) ?: ?i64 ?\) ?-> ?\( ?([A-Za-z_]\w*) ?: ?i64 ?\)(.*)\{$)");
  std::smatch m;
  if (!std::regex_match(header, m, sig)) {
    throw ParseError("signature must be `fn NAME(x: i64) -> (result: i64)`");
  }
  ToySpec spec;
  spec.name = m[1];
  spec.param = m[2];
  spec.result = m[3];
  if (spec.param == spec.result) throw ParseError("parameter and result share a name");
  const std::string rest = m[4];

  static const std::regex kw(R"(\b(requires|ensures)\b)");
  std::vector<std::pair<std::string, std::size_t>> marks;
  for (auto it = std::sregex_iterator(rest.begin(), rest.end(), kw); it != std::sregex_iterator();
       ++it) {
    marks.emplace_back((*it)[1], static_cast<std::size_t>(it->position()));
  }
  if (!marks.empty() && trim(std::string_view(rest).substr(0, marks.front().second)) != "") {
    throw ParseError("unexpected text before clauses");
  }
  if (marks.empty() && !trim(rest).empty()) throw ParseError("unexpected text before clauses");

  std::vector<std::string> requires_clauses;
  std::vector<std::string> ensures_clauses;
  bool seen_requires = false;
  bool seen_ensures = false;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    const auto begin = marks[i].second + marks[i].first.size();
    const auto end = i + 1 < marks.size() ? marks[i + 1].second : rest.size();
    auto cs = clauses(std::string_view(rest).substr(begin, end - begin));
    if (marks[i].first == "requires") {
      if (seen_requires) throw ParseError("duplicate requires section");
      seen_requires = true;
      requires_clauses = std::move(cs);
    } else {
      if (seen_ensures) throw ParseError("duplicate ensures section");
      seen_ensures = true;
      ensures_clauses = std::move(cs);
    }
  }

  if (requires_clauses.size() != 1) {
    throw ParseError("expected exactly one requires clause `LO <= " + spec.param + " <= HI`");
  }
  const std::regex range(R"(^(-? ?\d+) ?<= ?)" + spec.param + R"( ?<= ?(-? ?\d+)$)");
  if (!std::regex_match(requires_clauses[0], m, range)) {
    throw ParseError("requires clause must be `LO <= " + spec.param + " <= HI`");
  }
  auto parse_int = [](std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    try {
      return std::stoll(s);
    } catch (const std::exception&) {
      throw ParseError("bound out of range: " + s);
    }
  };
  spec.lo = parse_int(m[1]);
  spec.hi = parse_int(m[2]);
  if (spec.lo > spec.hi) throw ParseError("empty domain");
  if (spec.hi - spec.lo >= kMaxDomainSize) throw ParseError("domain too large");

  if (ensures_clauses.size() > 1) throw ParseError("at most one ensures clause is supported");
  if (ensures_clauses.size() == 1) {
    const auto& c = ensures_clauses[0];
    const auto prefix = spec.result + " ==";
    if (c.rfind(prefix, 0) != 0) {
      throw ParseError("ensures clause must be `" + spec.result + " == EXPR`");
    }
    const auto rhs = trim(std::string_view(c).substr(prefix.size()));
    Expr::parse(rhs, spec.param);  // validates
    spec.ensures = rhs;
  }
  return spec;
}

std::string ToySpec::render() const {
  std::ostringstream out;
  out << "fn " << name << "(" << param << ": i64) -> (" << result << ": i64)\n"
      << "    requires\n"
      << "        " << lo << " <= " << param << " <= " << hi << ",\n";
  if (ensures) {
    out << "    ensures\n"
        << "        " << result << " == " << *ensures << ",\n";
  }
  out << "{";
  return out.str();
}

std::string ToySpec::family() const {
  if (!ensures) return "vacuous";
  return Expr::parse(*ensures, param).shape();
}

OracleResult check_expression(const ToySpec& spec, std::string_view solution_expr) {
  Expr solution;
  try {
    solution = Expr::parse(solution_expr, spec.param);
  } catch (const ParseError& e) {
    return {OracleOutcome::ParseFailure, e.what()};
  }
  std::optional<Expr> target;
  if (spec.ensures) target = Expr::parse(*spec.ensures, spec.param);
  for (std::int64_t x = spec.lo;; ++x) {
    const auto got = solution.eval(x);
    if (!got) {
      return {OracleOutcome::Disagree,
              "arithmetic overflow at " + spec.param + "=" + std::to_string(x)};
    }
    if (target) {
      const auto want = target->eval(x);
      if (!want) {
        return {OracleOutcome::Disagree,
                "specification overflows at " + spec.param + "=" + std::to_string(x)};
      }
      if (*want != *got) {
        return {OracleOutcome::Disagree, "postcondition fails at " + spec.param + "=" +
                                             std::to_string(x) + ": expected " +
                                             std::to_string(*want) + ", got " +
                                             std::to_string(*got)};
      }
    }
    if (x == spec.hi) break;
  }
  return {OracleOutcome::Agree, {}};
}

}  // namespace psv::toy
