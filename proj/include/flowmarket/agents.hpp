#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flowmarket/flownet.hpp"
#include "flowmarket/types.hpp"

namespace flowmarket {

// Concave utility over nonnegative consumption.
class UtilityFunction {
 public:
  virtual ~UtilityFunction() = default;
  virtual double value(double x) const = 0;
  virtual double derivative(double x) const = 0;
};

// f(x) = -0.5 * theta1 * x^2 + theta2 * x with theta1 > 0, theta2 >= 0.
class QuadraticUtility final : public UtilityFunction {
 public:
  QuadraticUtility(double theta1, double theta2) : theta1_(theta1), theta2_(theta2) {
    if (!(theta1 > 0.0) || !std::isfinite(theta1))
      throw std::invalid_argument("QuadraticUtility: theta1 must be strictly positive");
    if (!(theta2 >= 0.0) || !std::isfinite(theta2))
      throw std::invalid_argument("QuadraticUtility: theta2 must be nonnegative");
  }

  double theta1() const { return theta1_; }
  double theta2() const { return theta2_; }

  double value(double x) const override {
    if (x < 0.0) throw std::domain_error("QuadraticUtility: consumption must be nonnegative");
    return -0.5 * theta1_ * x * x + theta2_ * x;
  }

  double derivative(double x) const override {
    if (x < 0.0) throw std::domain_error("QuadraticUtility: consumption must be nonnegative");
    return -theta1_ * x + theta2_;
  }

 private:
  double theta1_;
  double theta2_;
};

inline double evaluate(const QuadraticUtility& u, double x) { return u.value(x); }

struct BestResponse {
  double x = 0.0;
  double e = 0.0;
};

// Maximizer of f(x) + lambda * e over x >= 0, e <= a - x. Negative prices
// make the payoff unbounded (sell arbitrarily much), hence the error. For
// lambda = 0 the budget is still taken binding, which keeps the output
// deterministic among the maximizers.
inline BestResponse best_response(const QuadraticUtility& u, double a, double lambda) {
  if (lambda < 0.0)
    throw std::domain_error("best_response: negative price makes the agent payoff unbounded");
  BestResponse r;
  r.x = std::max(0.0, (u.theta2() - lambda) / u.theta1());
  r.e = a - r.x;
  return r;
}

// Samples f on a sorted nonnegative grid and fails iff some second divided
// difference exceeds +tolerance (scaled by the local values).
inline bool concavity_check(const UtilityFunction& f, const std::vector<double>& grid,
                            double tolerance = 1e-9) {
  if (grid.size() < 3) throw std::invalid_argument("concavity_check: need at least 3 grid points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0) throw std::invalid_argument("concavity_check: grid must be nonnegative");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("concavity_check: grid must be strictly increasing");
  }
  for (std::size_t i = 0; i + 2 < grid.size(); ++i) {
    const double x0 = grid[i], x1 = grid[i + 1], x2 = grid[i + 2];
    const double f0 = f.value(x0), f1 = f.value(x1), f2 = f.value(x2);
    const double s01 = (f1 - f0) / (x1 - x0);
    const double s12 = (f2 - f1) / (x2 - x1);
    const double curve = (s12 - s01) / (x2 - x0);
    const double scale = 1.0 + std::abs(f0) + std::abs(f1) + std::abs(f2);
    if (curve > tolerance * scale) return false;
  }
  return true;
}

// Golden-section maximization of f(x) + lambda * (a - x) over [0, x_hi]; the
// numeric path for utilities without a closed-form response.
inline BestResponse numeric_best_response(const UtilityFunction& f, double a, double lambda,
                                          double x_hi, double x_tol = 1e-10) {
  if (lambda < 0.0)
    throw std::domain_error("numeric_best_response: negative price makes the payoff unbounded");
  if (!(x_hi > 0.0)) throw std::invalid_argument("numeric_best_response: x_hi must be positive");
  auto payoff = [&](double x) { return f.value(x) + lambda * (a - x); };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = x_hi;
  double c = hi - phi * (hi - lo);
  double d = lo + phi * (hi - lo);
  double fc = payoff(c), fd = payoff(d);
  while (hi - lo > x_tol) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = payoff(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = payoff(d);
    }
  }
  BestResponse r;
  r.x = 0.5 * (lo + hi);
  r.e = a - r.x;
  return r;
}

struct AgentProfile {
  double a = 0.0;
  QuadraticUtility utility;

  AgentProfile(double endowment, QuadraticUtility u) : a(endowment), utility(std::move(u)) {
    if (!(a >= 0.0) || !std::isfinite(a))
      throw std::invalid_argument("AgentProfile: endowment must be nonnegative");
  }
};

// One market: a network plus one agent per node.
struct MarketInstance {
  FlowNetwork network;
  std::vector<AgentProfile> agents;

  MarketInstance() = default;
  MarketInstance(FlowNetwork net, std::vector<AgentProfile> agent_list)
      : network(std::move(net)), agents(std::move(agent_list)) {
    if (static_cast<int>(agents.size()) != network.node_count())
      throw std::invalid_argument("MarketInstance: need exactly one agent per node");
  }

  int agent_count() const { return static_cast<int>(agents.size()); }

  // Total endowment, the system resource capacity.
  double capacity() const {
    double c = 0.0;
    for (const AgentProfile& ag : agents) c += ag.a;
    return c;
  }

  Vector endowments() const {
    Vector a(agent_count());
    for (int i = 0; i < agent_count(); ++i) a(i) = agents[static_cast<std::size_t>(i)].a;
    return a;
  }
  Vector theta1() const {
    Vector t(agent_count());
    for (int i = 0; i < agent_count(); ++i) t(i) = agents[static_cast<std::size_t>(i)].utility.theta1();
    return t;
  }
  Vector theta2() const {
    Vector t(agent_count());
    for (int i = 0; i < agent_count(); ++i) t(i) = agents[static_cast<std::size_t>(i)].utility.theta2();
    return t;
  }
};

}  // namespace flowmarket
