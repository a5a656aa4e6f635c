#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowmarket/agents.hpp"
#include "flowmarket/flownet.hpp"
#include "flowmarket/qpcore.hpp"
#include "flowmarket/types.hpp"

namespace flowmarket {

// Full market solution: primal allocation plus every dual of the welfare
// program. beta prices the market balance row, q the per-node flow
// conservation rows, xi the arc capacity rows, lambda the per-agent budget
// rows. lambda_i = -(beta + q_i) holds at optimality.
struct EquilibriumSolution {
  Vector x;
  Vector e;
  Vector y;
  double beta = 0.0;
  Vector q;
  Vector xi;
  Vector lambda;
};

class SolveFailure : public std::runtime_error {
 public:
  SolveFailure(const std::string& what, SolveStatus status)
      : std::runtime_error(what + " (solver status: " + to_string(status) + ")"),
        status_(status) {}
  SolveStatus status() const { return status_; }

 private:
  SolveStatus status_;
};

struct ConditionReport {
  bool pass = false;
  double residual = 0.0;
};

// Pass/fail with worst residual for each market-equilibrium condition:
// (1) every agent's (x, e) maximizes its payoff at the posted price,
// (2) lambda = -(beta + q),
// (3) trades balance to zero,
// (4) trades are realized by a feasible flow 0 <= y <= u with e = A y,
// (5) capacity duals are nonnegative and vanish off saturated arcs,
// (6) capacity duals equal the price differences A' q arc by arc.
struct CEVerificationReport {
  ConditionReport agent_optimality;
  ConditionReport price_identity;
  ConditionReport market_balance;
  ConditionReport flow_feasibility;
  ConditionReport capacity_complementarity;
  ConditionReport congestion_price_consistency;

  bool overall() const {
    return agent_optimality.pass && price_identity.pass && market_balance.pass &&
           flow_feasibility.pass && capacity_complementarity.pass &&
           congestion_price_consistency.pass;
  }

  double worst_residual() const {
    return std::max({agent_optimality.residual, price_identity.residual,
                     market_balance.residual, flow_feasibility.residual,
                     capacity_complementarity.residual,
                     congestion_price_consistency.residual});
  }
};

namespace detail {

inline void require_concave_utilities(const MarketInstance& inst) {
  for (const AgentProfile& ag : inst.agents) {
    const double span = std::max(1.0, 2.0 * ag.utility.theta2() / ag.utility.theta1());
    std::vector<double> grid;
    for (int k = 0; k <= 8; ++k) grid.push_back(span * static_cast<double>(k) / 8.0);
    if (!concavity_check(ag.utility, grid))
      throw std::invalid_argument("solve_swe: utilities must be concave");
  }
}

// Welfare program in minimization form over z = (x, e, y):
//   minimize sum_i 0.5*theta1_i x_i^2 - theta2_i x_i
//   s.t. sum_i e_i = 0                (dual: beta)
//        e - A y = 0                  (duals: q)
//        x + e <= a                   (duals: lambda)
//        y <= u                       (duals: xi)
//        x >= 0, y >= 0, e free.
inline ConvexProgram assemble_swe(const MarketInstance& inst) {
  const int n = inst.agent_count();
  const int m = inst.network.arc_count();
  const int nv = 2 * n + m;
  const double inf = std::numeric_limits<double>::infinity();

  ConvexProgram p = ConvexProgram::zeros(nv);
  p.curvature.head(n) = inst.theta1();
  p.linear.head(n) = -inst.theta2();

  p.eq_coeffs = Matrix::Zero(1 + n, nv);
  p.eq_rhs = Vector::Zero(1 + n);
  p.eq_coeffs.block(0, n, 1, n).setOnes();
  const IncidenceSet inc = build_incidence(inst.network);
  for (int i = 0; i < n; ++i) {
    p.eq_coeffs(1 + i, n + i) = 1.0;
    p.eq_coeffs.block(1 + i, 2 * n, 1, m) = -inc.A.row(i);
  }

  p.ineq_coeffs = Matrix::Zero(n + m, nv);
  p.ineq_rhs = Vector::Zero(n + m);
  for (int i = 0; i < n; ++i) {
    p.ineq_coeffs(i, i) = 1.0;
    p.ineq_coeffs(i, n + i) = 1.0;
    p.ineq_rhs(i) = inst.agents[static_cast<std::size_t>(i)].a;
  }
  for (int k = 0; k < m; ++k) {
    p.ineq_coeffs(n + k, 2 * n + k) = 1.0;
    p.ineq_rhs(n + k) = inst.network.capacities()(k);
  }

  p.var_lower = Vector::Constant(nv, -inf);
  p.var_upper = Vector::Constant(nv, inf);
  p.var_lower.head(n).setZero();
  p.var_lower.tail(m).setZero();
  return p;
}

}  // namespace detail

// Solves the welfare program and maps duals back to market quantities. The
// balance row is the sum of the conservation rows, so (beta, q) are only
// determined up to a constant shift; the representative with mean(q) = 0 is
// returned, which leaves lambda and xi untouched.
inline std::pair<EquilibriumSolution, SolveReport> solve_swe_report(
    const MarketInstance& inst, double tol = 1e-8, std::uint64_t start_jitter = 0) {
  detail::require_concave_utilities(inst);
  const int n = inst.agent_count();
  const int m = inst.network.arc_count();
  const ConvexProgram p = detail::assemble_swe(inst);

  SolveOptions opts;
  opts.tol = tol;
  opts.max_iter = 300;
  opts.start_jitter = start_jitter;
  const SolveReport rep = solve(p, opts);
  if (rep.status != SolveStatus::optimal)
    throw SolveFailure("solve_swe: welfare program did not reach optimality", rep.status);

  EquilibriumSolution sol;
  sol.x = rep.primal.head(n);
  sol.e = rep.primal.segment(n, n);
  sol.y = rep.primal.tail(m);
  sol.beta = rep.dual_eq(0);
  sol.q = rep.dual_eq.tail(n);
  sol.lambda = rep.dual_ineq.head(n);
  sol.xi = rep.dual_ineq.tail(m);

  const double shift = sol.q.mean();
  sol.q.array() -= shift;
  sol.beta += shift;

  const double identity_residual =
      (sol.lambda + Vector::Constant(n, sol.beta) + sol.q).cwiseAbs().maxCoeff();
  if (identity_residual > std::max(1e3 * tol, 1e-7))
    throw SolveFailure("solve_swe: price identity failed the consistency check",
                       rep.status);
  return {std::move(sol), rep};
}

inline EquilibriumSolution solve_swe(const MarketInstance& inst, double tol = 1e-8) {
  return solve_swe_report(inst, tol).first;
}

inline CEVerificationReport verify_ce(const MarketInstance& inst,
                                      const EquilibriumSolution& sol, double tol = 1e-6) {
  const int n = inst.agent_count();
  const int m = inst.network.arc_count();
  if (sol.x.size() != n || sol.e.size() != n || sol.q.size() != n || sol.lambda.size() != n)
    throw std::invalid_argument("verify_ce: agent-indexed vector length mismatch");
  if (sol.y.size() != m || sol.xi.size() != m)
    throw std::invalid_argument("verify_ce: arc-indexed vector length mismatch");

  CEVerificationReport report;

  double opt_gap = 0.0;
  for (int i = 0; i < n; ++i) {
    const AgentProfile& ag = inst.agents[static_cast<std::size_t>(i)];
    const double lam = sol.lambda(i);
    double residual;
    if (lam < -tol) {
      residual = -lam;
    } else {
      const BestResponse br = best_response(ag.utility, ag.a, std::max(lam, 0.0));
      const double best = ag.utility.value(br.x) + lam * br.e;
      const double actual = ag.utility.value(std::max(sol.x(i), 0.0)) + lam * sol.e(i);
      const double infeas = std::max(-sol.x(i), sol.e(i) - (ag.a - sol.x(i)));
      residual = std::max({best - actual, infeas, 0.0});
    }
    opt_gap = std::max(opt_gap, residual);
  }
  report.agent_optimality = {opt_gap <= tol, opt_gap};

  const double identity =
      (sol.lambda + Vector::Constant(n, sol.beta) + sol.q).cwiseAbs().maxCoeff();
  report.price_identity = {identity <= tol, identity};

  const double balance = std::abs(sol.e.sum());
  report.market_balance = {balance <= tol, balance};

  const Vector flow_mismatch = sol.e - net_flow(inst.network, sol.y);
  double flow_res = flow_mismatch.cwiseAbs().maxCoeff();
  flow_res = std::max(flow_res, (-sol.y).maxCoeff());
  flow_res = std::max(flow_res, (sol.y - inst.network.capacities()).maxCoeff());
  report.flow_feasibility = {flow_res <= tol, flow_res};

  double comp = (-sol.xi).maxCoeff();
  for (int k = 0; k < m; ++k)
    comp = std::max(comp, std::abs(sol.xi(k) * (inst.network.capacities()(k) - sol.y(k))));
  report.capacity_complementarity = {comp <= tol, comp};

  const IncidenceSet inc = build_incidence(inst.network);
  const double pricing = (sol.xi - inc.A.transpose() * sol.q).cwiseAbs().maxCoeff();
  report.congestion_price_consistency = {pricing <= tol, pricing};

  return report;
}

struct StandardEquilibrium {
  Vector x;
  Vector e;
  double lambda0 = 0.0;
};

// Welfare program without any network: trades only balance in aggregate.
// The single price is the (negated) dual of the balance row.
inline StandardEquilibrium solve_standard_swe(const std::vector<AgentProfile>& agents,
                                              double tol = 1e-8) {
  const int n = static_cast<int>(agents.size());
  if (n == 0) throw std::invalid_argument("solve_standard_swe: need at least one agent");
  const double inf = std::numeric_limits<double>::infinity();

  ConvexProgram p = ConvexProgram::zeros(2 * n);
  for (int i = 0; i < n; ++i) {
    p.curvature(i) = agents[static_cast<std::size_t>(i)].utility.theta1();
    p.linear(i) = -agents[static_cast<std::size_t>(i)].utility.theta2();
  }
  p.eq_coeffs = Matrix::Zero(1, 2 * n);
  p.eq_coeffs.block(0, n, 1, n).setOnes();
  p.eq_rhs = Vector::Zero(1);
  p.ineq_coeffs = Matrix::Zero(n, 2 * n);
  p.ineq_rhs = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    p.ineq_coeffs(i, i) = 1.0;
    p.ineq_coeffs(i, n + i) = 1.0;
    p.ineq_rhs(i) = agents[static_cast<std::size_t>(i)].a;
  }
  p.var_lower = Vector::Constant(2 * n, -inf);
  p.var_lower.head(n).setZero();

  const SolveReport rep = solve(p, tol, 300);
  if (rep.status != SolveStatus::optimal)
    throw SolveFailure("solve_standard_swe: program did not reach optimality", rep.status);

  StandardEquilibrium out;
  out.x = rep.primal.head(n);
  out.e = rep.primal.tail(n);
  out.lambda0 = -rep.dual_eq(0);
  return out;
}

inline StandardEquilibrium solve_standard_swe(const MarketInstance& inst, double tol = 1e-8) {
  return solve_standard_swe(inst.agents, tol);
}

// Closed-form single-price equilibrium for quadratic utilities:
//   lambda0 = (sum theta2/theta1 - C) / (sum 1/theta1),
//   x_i = max(0, (theta2_i - lambda0) / theta1_i), e_i = a_i - x_i.
// The aggregate trade balance is exact whenever every x_i > 0.
inline StandardEquilibrium standard_ce_closed_form(const std::vector<AgentProfile>& agents) {
  const int n = static_cast<int>(agents.size());
  if (n == 0) throw std::invalid_argument("standard_ce_closed_form: need at least one agent");
  double ratio_sum = 0.0, inv_sum = 0.0, capacity = 0.0;
  for (const AgentProfile& ag : agents) {
    if (!(ag.utility.theta1() > 0.0))
      throw std::invalid_argument("standard_ce_closed_form: theta1 must be positive");
    ratio_sum += ag.utility.theta2() / ag.utility.theta1();
    inv_sum += 1.0 / ag.utility.theta1();
    capacity += ag.a;
  }
  StandardEquilibrium out;
  out.lambda0 = (ratio_sum - capacity) / inv_sum;
  out.x = Vector(n);
  out.e = Vector(n);
  for (int i = 0; i < n; ++i) {
    const AgentProfile& ag = agents[static_cast<std::size_t>(i)];
    out.x(i) = std::max(0.0, (ag.utility.theta2() - out.lambda0) / ag.utility.theta1());
    out.e(i) = ag.a - out.x(i);
  }
  return out;
}

inline StandardEquilibrium standard_ce_closed_form(const MarketInstance& inst) {
  return standard_ce_closed_form(inst.agents);
}

struct DegenerateSolution {
  Vector x;
  Vector e;
};

// Allocation when the network never binds: consumption splits the total
// endowment directly and trades are whatever realizes it.
inline DegenerateSolution solve_degenerate_swe(const MarketInstance& inst, double tol = 1e-8,
                                               std::uint64_t start_jitter = 0) {
  const int n = inst.agent_count();
  ConvexProgram p = ConvexProgram::zeros(n);
  p.curvature = inst.theta1();
  p.linear = -inst.theta2();
  p.eq_coeffs = Matrix::Ones(1, n);
  p.eq_rhs = Vector::Constant(1, inst.capacity());
  p.var_lower = Vector::Zero(n);

  SolveOptions opts;
  opts.tol = tol;
  opts.max_iter = 300;
  opts.start_jitter = start_jitter;
  const SolveReport rep = solve(p, opts);
  if (rep.status != SolveStatus::optimal)
    throw SolveFailure("solve_degenerate_swe: program did not reach optimality", rep.status);

  DegenerateSolution out;
  out.x = rep.primal;
  out.e = inst.endowments() - out.x;
  return out;
}

struct InteriorCheck {
  bool is_interior = false;
  double slack = 0.0;
  Vector y;
};

// Tests whether the trade vector admits a flow strictly inside (0, u).
inline InteriorCheck interior_check(const FlowNetwork& net, const Vector& e,
                                    double tol = 1e-8) {
  if (e.size() != net.node_count())
    throw std::invalid_argument("interior_check: trade vector length mismatch");
  if (std::abs(e.sum()) > std::max(tol, 1e-9) * (1.0 + e.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("interior_check: trades must balance to zero");

  const IncidenceSet inc = build_incidence(net);
  const MaxSlackResult r = max_slack_lp(inc.A, e, net.capacities(), tol);
  InteriorCheck out;
  if (r.status != SolveStatus::optimal) {
    out.slack = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.slack = r.slack;
  out.is_interior = r.slack > tol;
  if (out.is_interior) out.y = r.flow;
  return out;
}

// Direct interior flow on a canonical star. Each antiparallel pair carries
// the leaf's trade as a difference; the pair value is the midpoint of its
// feasible interval, which keeps both arcs strictly inside (0, u) whenever
// the trade vector lies strictly inside the per-node capacity intervals.
inline Vector star_flow_construct(const FlowNetwork& net, const Vector& e) {
  if (!is_canonical_star(net))
    throw std::invalid_argument("star_flow_construct: network must be a canonical star");
  const int n = net.node_count();
  if (e.size() != n)
    throw std::invalid_argument("star_flow_construct: trade vector length mismatch");
  if (std::abs(e.sum()) > 1e-9 * (1.0 + e.cwiseAbs().maxCoeff()))
    throw std::domain_error("star_flow_construct: trades must balance to zero");

  const Vector& u = net.capacities();
  Vector y(2 * (n - 1));
  for (int k = 0; k < n - 1; ++k) {
    const double d = -e(k + 1);
    const double lo = std::max(0.0, d);
    const double hi = std::min(u(k), u(n - 1 + k) + d);
    if (!(lo < hi))
      throw std::domain_error(
          "star_flow_construct: trade outside the strict per-node capacity interval");
    y(k) = 0.5 * (lo + hi);
    y(n - 1 + k) = y(k) - d;
  }
  return y;
}

struct PriceSpread {
  double max_spread = 0.0;
  bool all_equal = false;
  bool all_positive = false;
  double min_price = 0.0;
};

inline PriceSpread equal_price_check(const Vector& lambda, double tol = 1e-6) {
  if (lambda.size() == 0) throw std::invalid_argument("equal_price_check: empty price vector");
  PriceSpread out;
  out.max_spread = lambda.maxCoeff() - lambda.minCoeff();
  out.min_price = lambda.minCoeff();
  out.all_equal = out.max_spread <= tol;
  out.all_positive = out.min_price >= tol;
  return out;
}

inline PriceSpread equal_price_check(const EquilibriumSolution& sol, double tol = 1e-6) {
  return equal_price_check(sol.lambda, tol);
}

}  // namespace flowmarket
