#include "laghawkes/autodiff.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <cmath>
#include <cstring>

using namespace laghawkes;

TEST_CASE("forward evaluates the basic graphs") {
  SUBCASE("identity") {
    Tape tape;
    Var x = tape.input("x");
    tape.mark_output("y", x);
    CHECK(tape.forward({{"x", 3.0}}).at("y") == 3.0);
  }
  SUBCASE("softplus at zero is log 2") {
    Tape tape;
    Var y = tape.softplus(tape.input("x"));
    tape.mark_output("y", y);
    CHECK(tape.forward({{"x", 0.0}}).at("y") == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("sin^2 + cos^2 == 1") {
    CounterRng rng(5);
    for (int i = 0; i < 50; ++i) {
      Tape tape;
      Var x = tape.input("x");
      Var s = tape.sin(x);
      Var c = tape.cos(x);
      tape.mark_output("y", tape.add(tape.mul(s, s), tape.mul(c, c)));
      const double v = tape.forward({{"x", -10.0 + 20.0 * rng.uniform()}}).at("y");
      CHECK(std::abs(v - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("backward on the basic graphs") {
  SUBCASE("identity gradient is 1") {
    Tape tape;
    Var x = tape.input("x");
    tape.mark_output("y", x);
    tape.forward({{"x", 3.0}});
    CHECK(tape.backward("y").at("x") == 1.0);
  }
  SUBCASE("d exp(2x)/dx at 0 is 2") {
    Tape tape;
    Var x = tape.input("x");
    tape.mark_output("y", tape.exp(tape.add(x, x)));
    tape.forward({{"x", 0.0}});
    CHECK(tape.backward("y").at("x") == doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("unknown output name") {
    Tape tape;
    Var x = tape.input("x");
    tape.mark_output("y", x);
    tape.forward({{"x", 1.0}});
    CHECK_THROWS_AS(tape.backward("z"), std::invalid_argument);
  }
  SUBCASE("backward before forward") {
    Tape tape;
    Var x = tape.input("x");
    tape.mark_output("y", x);
    CHECK_THROWS_AS(tape.backward("y"), std::invalid_argument);
  }
}

TEST_CASE("errors carry the node index and unbound inputs are rejected") {
  Tape tape;
  Var x = tape.input("x");
  tape.mark_output("y", tape.log(x));
  CHECK_THROWS_AS(tape.forward({}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(tape.forward({{"x", -1.0}}),
                       doctest::Contains("log of nonpositive operand at node"), NumericError);

  Tape tape2;
  Var a = tape2.input("a");
  tape2.mark_output("y", tape2.div(tape2.constant(1.0), a));
  CHECK_THROWS_AS(tape2.forward({{"a", 0.0}}), NumericError);
}

namespace {

/// Random graph builder used by the finite-difference sweep. Keeps a value
/// estimate per node so log/div/power only see safe operands.
struct RandomGraph {
  Tape tape;
  std::vector<Var> vars;
  std::vector<double> vals;
  std::vector<std::string> input_names;

  explicit RandomGraph(CounterRng& rng, int n_inputs, int n_nodes) {
    for (int i = 0; i < n_inputs; ++i) {
      const std::string name = "x" + std::to_string(i);
      input_names.push_back(name);
      vars.push_back(tape.input(name));
      vals.push_back(0.5 + 1.5 * rng.uniform());
    }
    for (int i = 0; i < n_nodes; ++i) add_node(rng);
    tape.mark_output("y", vars.back());
  }

  std::map<std::string, double> inputs() const {
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < input_names.size(); ++i) m[input_names[i]] = vals[i];
    return m;
  }

  void add_node(CounterRng& rng) {
    const auto pick = [&] { return rng.next_u64() % vars.size(); };
    const int op = static_cast<int>(rng.next_u64() % 10);
    std::size_t a = pick(), b = pick();
    Var v;
    double val;
    switch (op) {
      case 0: v = tape.add(vars[a], vars[b]); val = vals[a] + vals[b]; break;
      case 1: v = tape.sub(vars[a], vars[b]); val = vals[a] - vals[b]; break;
      case 2: v = tape.mul(vars[a], vars[b]); val = vals[a] * vals[b]; break;
      case 3:
        if (std::abs(vals[b]) < 0.1) { v = tape.add(vars[a], vars[b]); val = vals[a] + vals[b]; }
        else { v = tape.div(vars[a], vars[b]); val = vals[a] / vals[b]; }
        break;
      case 4: v = tape.neg(vars[a]); val = -vals[a]; break;
      case 5:
        if (std::abs(vals[a]) > 3.0) { v = tape.sin(vars[a]); val = std::sin(vals[a]); }
        else { v = tape.exp(vars[a]); val = std::exp(vals[a]); }
        break;
      case 6:
        if (vals[a] < 0.1) { v = tape.cos(vars[a]); val = std::cos(vals[a]); }
        else { v = tape.log(vars[a]); val = std::log(vals[a]); }
        break;
      case 7: v = tape.sin(vars[a]); val = std::sin(vals[a]); break;
      case 8: v = tape.softplus(vars[a]); val = Tape::softplus_value(vals[a]); break;
      default:
        if (vals[a] < 0.1) { v = tape.cos(vars[a]); val = std::cos(vals[a]); }
        else { v = tape.power(vars[a], 1.7); val = std::pow(vals[a], 1.7); }
        break;
    }
    if (!std::isfinite(val) || std::abs(val) > 1e6) {  // keep magnitudes tame
      v = tape.cos(vars[a]);
      val = std::cos(vals[a]);
    }
    vars.push_back(v);
    vals.push_back(val);
  }
};

}  // namespace

TEST_CASE("gradients of random 50-node graphs match central differences") {
  CounterRng rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    RandomGraph g(rng, 4, 50);
    auto inputs = g.inputs();
    g.tape.forward(inputs);
    const auto grads = g.tape.backward("y");
    for (const auto& name : g.input_names) {
      const double h = 1e-6 * std::max(1.0, std::abs(inputs.at(name)));
      const double fd = oracle::central_diff(
          [&](double x) {
            auto shifted = inputs;
            shifted[name] = x;
            return g.tape.forward(shifted).at("y");
          },
          inputs.at(name), h);
      CHECK(oracle::rel_err(grads.at(name), fd) <= 1e-6);
    }
  }
}

TEST_CASE("adjoint accumulation is linear: grad(f + g) = grad f + grad g") {
  Tape tape;
  Var x = tape.input("x");
  Var f = tape.mul(tape.sin(x), tape.constant(2.0));
  Var g = tape.exp(tape.neg(x));
  tape.mark_output("f", f);
  tape.mark_output("g", g);
  tape.mark_output("sum", tape.add(f, g));
  for (double v : {-1.3, 0.0, 0.8, 2.5}) {
    tape.forward({{"x", v}});
    const double gf = tape.backward("f").at("x");
    const double gg = tape.backward("g").at("x");
    const double gs = tape.backward("sum").at("x");
    CHECK(gs == doctest::Approx(gf + gg).epsilon(1e-14));
  }
}

TEST_CASE("softplus matches the naive form and is overflow-safe") {
  for (double x = -30.0; x <= 30.0; x += 0.37) {
    CHECK(std::abs(Tape::softplus_value(x) - std::log(1.0 + std::exp(x))) <= 1e-12);
  }
  CHECK(std::abs(Tape::softplus_value(50.0) - 50.0) <= 1e-12);
  CHECK(std::abs(Tape::softplus_value(800.0) - 800.0) <= 1e-12);  // exp(800) would overflow
  CHECK(Tape::softplus_value(-800.0) == 0.0);
}

TEST_CASE("identical tape and inputs give bit-identical gradients") {
  const auto run = [] {
    CounterRng rng(99);
    RandomGraph g(rng, 3, 40);
    g.tape.forward(g.inputs());
    return g.tape.backward("y");
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (const auto& [name, val] : a) {
    const double other = b.at(name);
    CHECK(std::memcmp(&val, &other, sizeof(double)) == 0);
  }
}
