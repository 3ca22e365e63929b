#include "laghawkes/autodiff.hpp"

#include <cmath>

namespace laghawkes {

double Tape::softplus_value(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Var Tape::push(Op op, std::uint32_t a, std::uint32_t b, double aux) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.aux = aux;
  nodes_.push_back(n);
  forward_done_ = false;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check(Var v) const {
  if (v.idx >= nodes_.size()) throw std::invalid_argument("Tape: operand index out of range");
}

Var Tape::input(const std::string& name) {
  if (inputs_.count(name)) throw std::invalid_argument("Tape: duplicate input name " + name);
  Var v = push(Op::Input, 0, 0);
  inputs_[name] = v.idx;
  return v;
}

Var Tape::constant(double value) { return push(Op::Const, 0, 0, value); }
Var Tape::add(Var a, Var b) { check(a); check(b); return push(Op::Add, a.idx, b.idx); }
Var Tape::mul(Var a, Var b) { check(a); check(b); return push(Op::Mul, a.idx, b.idx); }
Var Tape::div(Var a, Var b) { check(a); check(b); return push(Op::Div, a.idx, b.idx); }
Var Tape::neg(Var a) { check(a); return push(Op::Neg, a.idx, 0); }
Var Tape::exp(Var a) { check(a); return push(Op::Exp, a.idx, 0); }
Var Tape::log(Var a) { check(a); return push(Op::Log, a.idx, 0); }
Var Tape::sin(Var a) { check(a); return push(Op::Sin, a.idx, 0); }
Var Tape::cos(Var a) { check(a); return push(Op::Cos, a.idx, 0); }
Var Tape::softplus(Var a) { check(a); return push(Op::Softplus, a.idx, 0); }
Var Tape::power(Var a, double exponent) { check(a); return push(Op::Power, a.idx, 0, exponent); }

void Tape::mark_output(const std::string& name, Var v) {
  check(v);
  outputs_[name] = v.idx;
}

std::map<std::string, double> Tape::forward(const std::map<std::string, double>& inputs) {
  for (const auto& [name, idx] : inputs_) {
    auto it = inputs.find(name);
    if (it == inputs.end()) throw std::invalid_argument("Tape: input not bound: " + name);
    nodes_[idx].value = it->second;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    const auto at = [&](std::uint32_t j) { return nodes_[j].value; };
    switch (n.op) {
      case Op::Input: break;
      case Op::Const: n.value = n.aux; break;
      case Op::Add: n.value = at(n.a) + at(n.b); break;
      case Op::Mul: n.value = at(n.a) * at(n.b); break;
      case Op::Div:
        if (at(n.b) == 0.0)
          throw NumericError("Tape: division by zero at node " + std::to_string(i));
        n.value = at(n.a) / at(n.b);
        break;
      case Op::Neg: n.value = -at(n.a); break;
      case Op::Exp: n.value = std::exp(at(n.a)); break;
      case Op::Log:
        if (at(n.a) <= 0.0)
          throw NumericError("Tape: log of nonpositive operand at node " + std::to_string(i));
        n.value = std::log(at(n.a));
        break;
      case Op::Sin: n.value = std::sin(at(n.a)); break;
      case Op::Cos: n.value = std::cos(at(n.a)); break;
      case Op::Softplus: n.value = softplus_value(at(n.a)); break;
      case Op::Power:
        if (at(n.a) <= 0.0 && n.aux != std::round(n.aux))
          throw NumericError("Tape: fractional power of nonpositive operand at node " +
                             std::to_string(i));
        if (at(n.a) == 0.0 && n.aux < 0.0)
          throw NumericError("Tape: negative power of zero at node " + std::to_string(i));
        n.value = std::pow(at(n.a), n.aux);
        break;
    }
  }
  forward_done_ = true;
  std::map<std::string, double> out;
  for (const auto& [name, idx] : outputs_) out[name] = nodes_[idx].value;
  return out;
}

void Tape::run_backward() {
  for (std::size_t ri = nodes_.size(); ri-- > 0;) {
    const Node& n = nodes_[ri];
    const double g = n.adjoint;
    if (g == 0.0) continue;
    const auto at = [&](std::uint32_t j) { return nodes_[j].value; };
    const auto bump = [&](std::uint32_t j, double dg) { nodes_[j].adjoint += dg; };
    switch (n.op) {
      case Op::Input:
      case Op::Const: break;
      case Op::Add: bump(n.a, g); bump(n.b, g); break;
      case Op::Mul: bump(n.a, g * at(n.b)); bump(n.b, g * at(n.a)); break;
      case Op::Div:
        bump(n.a, g / at(n.b));
        bump(n.b, -g * at(n.a) / (at(n.b) * at(n.b)));
        break;
      case Op::Neg: bump(n.a, -g); break;
      case Op::Exp: bump(n.a, g * n.value); break;
      case Op::Log: bump(n.a, g / at(n.a)); break;
      case Op::Sin: bump(n.a, g * std::cos(at(n.a))); break;
      case Op::Cos: bump(n.a, -g * std::sin(at(n.a))); break;
      case Op::Softplus: bump(n.a, g / (1.0 + std::exp(-at(n.a)))); break;
      case Op::Power:
        bump(n.a, g * n.aux * std::pow(at(n.a), n.aux - 1.0));
        break;
    }
  }
}

std::map<std::string, double> Tape::backward(const std::string& output_name) {
  if (!forward_done_) throw std::invalid_argument("Tape: backward before forward");
  auto it = outputs_.find(output_name);
  if (it == outputs_.end()) throw std::invalid_argument("Tape: unknown output: " + output_name);
  for (Node& n : nodes_) n.adjoint = 0.0;
  nodes_[it->second].adjoint = 1.0;
  run_backward();
  std::map<std::string, double> grads;
  for (const auto& [name, idx] : inputs_) grads[name] = nodes_[idx].adjoint;
  return grads;
}

std::map<std::string, double> Tape::backward_seeded(
    const std::vector<std::pair<Var, double>>& seeds) {
  if (!forward_done_) throw std::invalid_argument("Tape: backward before forward");
  for (Node& n : nodes_) n.adjoint = 0.0;
  for (const auto& [v, g] : seeds) {
    check(v);
    nodes_[v.idx].adjoint += g;
  }
  run_backward();
  std::map<std::string, double> grads;
  for (const auto& [name, idx] : inputs_) grads[name] = nodes_[idx].adjoint;
  return grads;
}

}  // namespace laghawkes
