#pragma once

#include "laghawkes/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace laghawkes {

/// Handle to a tape node.
struct Var {
  std::uint32_t idx = 0;
};

/// Minimal scalar reverse-mode tape. Nodes are appended in topological
/// order by construction; forward() evaluates every node, backward()
/// accumulates adjoints in one reverse sweep.
///
/// Single-writer: one tape per thread, tapes may be moved across threads.
class Tape {
 public:
  enum class Op : std::uint8_t {
    Input,
    Const,
    Add,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Softplus,
    Power,  // operand raised to a fixed real exponent
  };

  Var input(const std::string& name);
  Var constant(double value);
  Var add(Var a, Var b);
  Var sub(Var a, Var b) { return add(a, neg(b)); }
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sin(Var a);
  Var cos(Var a);
  Var softplus(Var a);
  Var power(Var a, double exponent);

  void mark_output(const std::string& name, Var v);

  /// Binds inputs by name, evaluates every node, returns the named outputs.
  /// Throws std::invalid_argument when an input is unbound, NumericError
  /// (with the node index) on log/div/power domain violations.
  std::map<std::string, double> forward(const std::map<std::string, double>& inputs);

  /// d(output)/d(input) for every named input. forward() must have run.
  std::map<std::string, double> backward(const std::string& output_name);

  /// Reverse sweep from externally supplied adjoint seeds; used when the
  /// objective is only partially on the tape (e.g. a likelihood term whose
  /// delay-partials are computed analytically).
  std::map<std::string, double> backward_seeded(const std::vector<std::pair<Var, double>>& seeds);

  double value(Var v) const { return nodes_[v.idx].value; }
  double adjoint(Var v) const { return nodes_[v.idx].adjoint; }
  std::size_t size() const { return nodes_.size(); }

  /// Overflow-safe softplus: max(x, 0) + log1p(exp(-|x|)).
  static double softplus_value(double x);

 private:
  struct Node {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double aux = 0.0;  // Const value / Power exponent
    double value = 0.0;
    double adjoint = 0.0;
  };

  Var push(Op op, std::uint32_t a, std::uint32_t b, double aux = 0.0);
  void check(Var v) const;
  void run_backward();

  std::vector<Node> nodes_;
  std::map<std::string, std::uint32_t> inputs_;
  std::map<std::string, std::uint32_t> outputs_;
  bool forward_done_ = false;
};

}  // namespace laghawkes
