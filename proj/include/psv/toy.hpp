#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "psv/common.hpp"

/// Desk-scale synthetic domain: integer functions of one variable on a
/// finite interval. Specs are written in the same surface syntax as real
/// specifications so the whole pipeline runs unchanged:
///
///     fn affine(x: i64) -> (result: i64)
///         requires
///             -8 <= x <= 8,
///         ensures
///             result == 2 * x + 2,
///     {
///
/// A solution is a program whose body is an expression in `x`.
namespace psv::toy {

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Expression over one integer variable: literals, the variable, unary
/// minus, + - * and parentheses.
class Expr {
 public:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  static Expr parse(std::string_view text, std::string_view variable);

  /// Evaluates at `x`; std::nullopt on 64-bit overflow.
  std::optional<std::int64_t> eval(std::int64_t x) const;

  /// Token shape with every integer literal replaced by `c`.
  const std::string& shape() const { return shape_; }
  const std::string& source() const { return source_; }

 private:
  NodePtr root_;
  std::string shape_;
  std::string source_;
};

struct ToySpec {
  std::string name;
  std::string param = "x";
  std::string result = "result";
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  /// Right-hand side of `result == ...`; absent means a vacuous contract.
  std::optional<std::string> ensures;

  /// Parses spec text. Throws ParseError with a diagnostic.
  static ToySpec parse(std::string_view spec_text);

  std::string render() const;

  /// Template family used by the trainable toy solver: the ensures shape
  /// with constants abstracted, or "vacuous".
  std::string family() const;
};

inline constexpr std::int64_t kMaxDomainSize = 1 << 20;

enum class OracleOutcome { Agree, Disagree, ParseFailure };

struct OracleResult {
  OracleOutcome outcome = OracleOutcome::Agree;
  std::string diagnostics;
};

/// Exhaustive pointwise comparison of `solution_expr` against the spec's
/// ensures expression over [lo, hi].
OracleResult check_expression(const ToySpec& spec, std::string_view solution_expr);

}  // namespace psv::toy
