#include "subdiff/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "subdiff/errors.hpp"
#include "subdiff/parallel.hpp"
#include "subdiff/stats.hpp"

namespace subdiff {
namespace {

void check_operator(const HSOperator& m, Eigen::Index rows, Eigen::Index cols, double s) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << "integrand returned a " << m.rows() << "x" << m.cols() << " operator at s = " << s
        << ", expected " << rows << "x" << cols;
    throw ParameterError(msg.str());
  }
  if (!m.allFinite()) {
    std::ostringstream msg;
    msg << "integrand has non-finite entries at s = " << s;
    throw NumericError(msg.str());
  }
}

void check_width(const HSIntegrand& phi, const SpectralBasis& basis) {
  if (phi.cols() != static_cast<Eigen::Index>(basis.dim())) {
    throw ParameterError("integrand has " + std::to_string(phi.cols()) + " columns but the noise has " +
                         std::to_string(basis.dim()) + " modes");
  }
}

// Index of `value` among the nodes of `grid`; the value must be a node.
std::size_t node_index(std::span<const double> grid, double value) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), value);
  if (it == grid.end() || *it != value) {
    std::ostringstream msg;
    msg << "operational time " << value << " is not a node of the tau-grid";
    throw ParameterError(msg.str());
  }
  return static_cast<std::size_t>(it - grid.begin());
}

double max_row_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double g = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) g = std::max(g, (a.row(r) - b.row(r)).norm());
  return g;
}

}  // namespace

HSIntegrand HSIntegrand::elementary(std::vector<double> breakpoints, std::vector<HSOperator> values) {
  if (breakpoints.size() < 2 || values.size() + 1 != breakpoints.size()) {
    throw ParameterError("elementary integrand needs n+1 breakpoints for n values");
  }
  if (!(breakpoints[0] >= 0.0)) throw ParameterError("elementary breakpoints must be nonnegative");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) throw ParameterError("elementary breakpoints must increase");
  }
  for (const auto& v : values) {
    if (v.rows() != values[0].rows() || v.cols() != values[0].cols()) {
      throw ParameterError("elementary values must share one shape");
    }
    if (!v.allFinite()) throw NumericError("elementary integrand has non-finite entries");
  }
  HSIntegrand h;
  h.kind_ = Kind::elementary;
  h.rows_ = values[0].rows();
  h.cols_ = values[0].cols();
  h.breaks_ = std::move(breakpoints);
  h.values_ = std::move(values);
  return h;
}

HSIntegrand HSIntegrand::time_function(TimeRule rule, Eigen::Index rows, Eigen::Index cols) {
  if (!rule) throw ParameterError("time-function integrand needs a rule");
  HSIntegrand h;
  h.kind_ = Kind::time_function;
  h.rows_ = rows;
  h.cols_ = cols;
  h.rule_ = [r = std::move(rule)](double s, const HVector&) { return r(s); };
  return h;
}

HSIntegrand HSIntegrand::path_functional(StateRule rule, Eigen::Index rows, Eigen::Index cols) {
  if (!rule) throw ParameterError("path-functional integrand needs a rule");
  HSIntegrand h;
  h.kind_ = Kind::path_functional;
  h.rows_ = rows;
  h.cols_ = cols;
  h.rule_ = std::move(rule);
  return h;
}

HSOperator HSIntegrand::at(double s, const HVector& state) const {
  if (kind_ == Kind::elementary) {
    if (s < breaks_.front() || s >= breaks_.back()) return HSOperator::Zero(rows_, cols_);
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
    return values_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
  }
  HSOperator m = rule_(s, state);
  check_operator(m, rows_, cols_, s);
  return m;
}

HSIntegrand HSIntegrand::scaled(double a) const {
  HSIntegrand h = *this;
  if (kind_ == Kind::elementary) {
    for (auto& v : h.values_) v *= a;
  } else {
    h.rule_ = [r = rule_, a](double s, const HVector& x) { return HSOperator(a * r(s, x)); };
  }
  return h;
}

HSIntegrand HSIntegrand::combine(double a, const HSIntegrand& other, double b) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw ParameterError("cannot combine integrands of different shapes");
  if (kind_ == Kind::elementary && other.kind_ == Kind::elementary && breaks_ == other.breaks_) {
    std::vector<HSOperator> v(values_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * values_[i] + b * other.values_[i];
    return elementary(breaks_, std::move(v));
  }
  HSIntegrand x = *this, y = other;
  return path_functional(
      [x, y, a, b](double s, const HVector& st) { return HSOperator(a * x.at(s, st) + b * y.at(s, st)); },
      rows_, cols_);
}

IntegralPath integrate_tc(const HSIntegrand& phi, const TimeChangedQWienerPath& path, IntegrandClock clock) {
  check_width(phi, path.basis());
  const auto t = path.t();
  const auto e = path.inverse().values();
  const auto& w = path.w_at_E();
  const Eigen::VectorXd& sl = path.basis().sqrt_lambda();
  IntegralPath out{std::vector<double>(t.begin(), t.end()), Eigen::MatrixXd::Zero(w.rows(), phi.rows())};
  for (Eigen::Index m = 0; m + 1 < w.rows(); ++m) {
    const auto mu = static_cast<std::size_t>(m);
    const Eigen::VectorXd dw = (w.row(m + 1) - w.row(m)).transpose();
    if (dw.isZero(0.0)) {
      out.values.row(m + 1) = out.values.row(m);
      continue;
    }
    const double s = clock == IntegrandClock::physical ? t[mu] : e[mu];
    const HSOperator op = phi.at(s, path.value(mu));
    out.values.row(m + 1) = out.values.row(m) + (op * dw.cwiseProduct(sl)).transpose();
  }
  return out;
}

IntegralPath integrate_classical(const HSIntegrand& phi, const QWienerPath& qpath) {
  check_width(phi, qpath.basis());
  const auto tau = qpath.tau();
  const auto& w = qpath.w();
  const Eigen::VectorXd& sl = qpath.basis().sqrt_lambda();
  IntegralPath out{std::vector<double>(tau.begin(), tau.end()), Eigen::MatrixXd::Zero(w.rows(), phi.rows())};
  for (Eigen::Index k = 0; k + 1 < w.rows(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Eigen::VectorXd dw = (w.row(k + 1) - w.row(k)).transpose();
    const HSOperator op = phi.at(tau[ku], qpath.value(ku));
    out.values.row(k + 1) = out.values.row(k) + (op * dw.cwiseProduct(sl)).transpose();
  }
  return out;
}

std::vector<IsometryReport> ito_isometry_batch(std::span<const HSIntegrand> phis, const IsometrySetup& setup) {
  if (setup.mc < 2) throw ParameterError("isometry check needs mc >= 2");
  if (setup.t_grid.size() < 2 || setup.t_grid.front() != 0.0) {
    throw ParameterError("isometry grid must start at 0 and have at least two points");
  }
  for (const auto& phi : phis) check_width(phi, setup.basis);
  const BetaIndex beta(setup.beta);
  const std::size_t n_phi = phis.size();

  // per replication: lhs and rhs for each integrand
  const auto samples = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    RngStream rng(setup.seed, 0x150u, i);
    RngStream clock = rng.split(0);
    RngStream noise = rng.split(1);
    InversePath inv = beta.degenerate()
                          ? identity_inverse(setup.t_grid)
                          : invert_path(simulate_subordinator_until(beta, setup.t_grid.back(), setup.d_tau, clock),
                                        setup.t_grid);
    const auto path = sample_tc_qwiener_given(setup.basis, std::move(inv), noise);
    const auto e = path.inverse().values();
    std::vector<double> out(2 * n_phi);
    for (std::size_t p = 0; p < n_phi; ++p) {
      const auto integral = integrate_tc(phis[p], path);
      out[2 * p] = integral.values.row(integral.values.rows() - 1).squaredNorm();
      double rhs = 0.0;
      for (std::size_t m = 0; m + 1 < path.size(); ++m) {
        const double de = e[m + 1] - e[m];
        if (de == 0.0) continue;
        rhs += hs_norm_sq(phis[p].at(path.t()[m], path.value(m)), setup.basis) * de;
      }
      out[2 * p + 1] = rhs;
    }
    return out;
  });

  std::vector<IsometryReport> reports(n_phi);
  std::vector<double> l(setup.mc), r(setup.mc);
  for (std::size_t p = 0; p < n_phi; ++p) {
    for (std::size_t i = 0; i < setup.mc; ++i) {
      l[i] = samples[i][2 * p];
      r[i] = samples[i][2 * p + 1];
    }
    const Estimate el = summarize(l), er = summarize(r), d = paired_difference(l, r);
    IsometryReport& rep = reports[p];
    rep.lhs = el.mean;
    rep.lhs_se = el.se;
    rep.rhs = er.mean;
    rep.rhs_se = er.se;
    rep.diff = d.mean;
    rep.diff_se = d.se;
    rep.z = z_score(d, 0.0);
    rep.n = setup.mc;
  }
  return reports;
}

IsometryReport ito_isometry_report(const HSIntegrand& phi, const IsometrySetup& setup) {
  return ito_isometry_batch(std::span<const HSIntegrand>(&phi, 1), setup).front();
}

ChangeOfVariableResult change_of_variable_1(const HSIntegrand& phi, const QWienerPath& qpath,
                                            const InversePath& inverse) {
  const auto classical = integrate_classical(phi, qpath);
  const auto composed = compose_time_change(qpath, inverse);
  ChangeOfVariableResult res;
  res.right = integrate_tc(phi, composed, IntegrandClock::operational);
  res.left.grid = res.right.grid;
  res.left.values.resize(res.right.values.rows(), res.right.values.cols());
  const auto e = inverse.values();
  for (std::size_t m = 0; m < e.size(); ++m) {
    res.left.values.row(static_cast<Eigen::Index>(m)) =
        classical.values.row(static_cast<Eigen::Index>(node_index(qpath.tau(), e[m])));
  }
  res.max_gap = max_row_gap(res.left.values, res.right.values);
  return res;
}

ChangeOfVariableResult change_of_variable_2(const HSIntegrand& phi, const QWienerPath& qpath,
                                            const SubordinatorPath& subordinator, const InversePath& inverse) {
  check_width(phi, qpath.basis());
  if (subordinator.size() < qpath.size()) {
    throw HorizonError("subordinator path is shorter than the Q-Wiener path");
  }
  for (std::size_t k = 0; k < qpath.size(); ++k) {
    if (subordinator.tau()[k] != qpath.tau()[k]) {
      throw ParameterError("subordinator and Q-Wiener paths must share the tau-grid");
    }
  }
  const auto composed = compose_time_change(qpath, inverse);
  ChangeOfVariableResult res;
  res.left = integrate_tc(phi, composed, IntegrandClock::physical);

  // int_0^tau Phi(U(s-)) dW_s on the tau-grid
  const auto& w = qpath.w();
  const Eigen::VectorXd& sl = qpath.basis().sqrt_lambda();
  Eigen::MatrixXd cum = Eigen::MatrixXd::Zero(w.rows(), phi.rows());
  for (Eigen::Index k = 0; k + 1 < w.rows(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Eigen::VectorXd dw = (w.row(k + 1) - w.row(k)).transpose();
    const HSOperator op = phi.at(subordinator.values()[ku], qpath.value(ku));
    cum.row(k + 1) = cum.row(k) + (op * dw.cwiseProduct(sl)).transpose();
  }
  res.right.grid = res.left.grid;
  res.right.values.resize(res.left.values.rows(), res.left.values.cols());
  const auto e = inverse.values();
  for (std::size_t m = 0; m < e.size(); ++m) {
    res.right.values.row(static_cast<Eigen::Index>(m)) = cum.row(static_cast<Eigen::Index>(node_index(qpath.tau(), e[m])));
  }
  res.max_gap = max_row_gap(res.left.values, res.right.values);
  return res;
}

std::vector<std::size_t> refinement_t_steps(const RefinementSetup& setup) {
  std::vector<std::size_t> n(setup.levels);
  for (std::size_t l = 0; l < setup.levels; ++l) {
    n[l] = static_cast<std::size_t>(
        std::llround(static_cast<double>(setup.n0) * std::pow(2.0, static_cast<double>(l) / setup.beta)));
  }
  return n;
}

std::vector<CoupledLevel> coupled_levels(const RefinementSetup& setup, std::size_t replication) {
  if (setup.levels < 1 || setup.n0 < 1 || !(setup.h0 > 0.0) || !(setup.horizon > 0.0)) {
    throw ParameterError("refinement needs levels >= 1, n0 >= 1, h0 > 0 and a positive horizon");
  }
  const BetaIndex beta(setup.beta);
  const std::size_t top = std::size_t{1} << (setup.levels - 1);
  const double h = setup.h0 / static_cast<double>(top);
  RngStream rng(setup.seed, 0xC0Fu, replication);
  RngStream clock = rng.split(0);
  RngStream noise = rng.split(1);

  // Fine path, extended until it passes the horizon at a coarsest-level node.
  std::vector<double> tau{0.0}, u{0.0};
  for (std::size_t k = 1; u.back() <= setup.horizon || (k - 1) % top != 0; ++k) {
    tau.push_back(static_cast<double>(k) * h);
    u.push_back(u.back() + sample_stable_increment(beta, h, clock));
  }
  const SubordinatorPath fine_sub(tau, u);
  const QWienerPath fine_q = simulate_qwiener(setup.basis, tau, noise);
  const auto steps = refinement_t_steps(setup);

  std::vector<CoupledLevel> out;
  out.reserve(setup.levels);
  for (std::size_t l = 0; l < setup.levels; ++l) {
    const std::size_t factor = top >> l;
    SubordinatorPath sub = coarsen(fine_sub, factor);
    QWienerPath q = coarsen(fine_q, factor);
    InversePath inv = invert_path(sub, uniform_grid(setup.horizon, steps[l]));
    out.push_back(CoupledLevel{std::move(sub), std::move(q), std::move(inv)});
  }
  return out;
}

namespace {

RefinementReport summarize_refinement(const RefinementSetup& setup, const std::vector<std::vector<double>>& gaps) {
  RefinementReport rep;
  const auto steps = refinement_t_steps(setup);
  std::vector<double> h, rms;
  for (std::size_t l = 0; l < setup.levels; ++l) {
    std::vector<double> g(setup.mc), g2(setup.mc);
    for (std::size_t i = 0; i < setup.mc; ++i) {
      g[i] = gaps[i][l];
      g2[i] = g[i] * g[i];
    }
    RefinementRow row;
    row.level = l;
    row.tau_step = setup.h0 / std::pow(2.0, static_cast<double>(l));
    row.t_steps = steps[l];
    row.rms_gap = std::sqrt(summarize(g2).mean);
    row.mean_gap = summarize(g).mean;
    rep.rows.push_back(row);
    h.push_back(row.tau_step);
    rms.push_back(row.rms_gap);
  }
  bool positive = setup.levels >= 2;
  for (double r : rms) positive = positive && r > 0.0;
  rep.fitted_order = positive ? fitted_order(h, rms) : 0.0;
  return rep;
}

}  // namespace

RefinementReport change_of_variable_refinement(int which, const HSIntegrand& phi, const RefinementSetup& setup) {
  if (which != 1 && which != 2) throw ParameterError("change of variable formula must be 1 or 2");
  if (setup.mc < 1) throw ParameterError("refinement needs mc >= 1");
  const auto gaps = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    const auto levels = coupled_levels(setup, i);
    std::vector<double> g;
    for (const auto& lv : levels) {
      g.push_back(which == 1 ? change_of_variable_1(phi, lv.qpath, lv.inverse).max_gap
                             : change_of_variable_2(phi, lv.qpath, lv.subordinator, lv.inverse).max_gap);
    }
    return g;
  });
  return summarize_refinement(setup, gaps);
}

ItoFunctional ItoFunctional::norm_sq() { return ItoFunctional{}; }

ItoFunctional ItoFunctional::coordinate_poly(Eigen::VectorXd a, Eigen::VectorXd b, Eigen::VectorXd c) {
  if (a.size() != b.size() || a.size() != c.size()) throw ParameterError("polynomial coefficient vectors must match");
  ItoFunctional f;
  f.kind = Kind::coordinate_poly;
  f.a = std::move(a);
  f.b = std::move(b);
  f.c = std::move(c);
  return f;
}

namespace {
void check_dim(const ItoFunctional& f, const HVector& x) {
  if (f.kind == ItoFunctional::Kind::coordinate_poly && f.a.size() != x.size()) {
    throw ParameterError("polynomial functional dimension does not match the state");
  }
}
}  // namespace

double ItoFunctional::value(const HVector& x) const {
  check_dim(*this, x);
  if (kind == Kind::norm_sq) return x.squaredNorm();
  return (a.array() * x.array() + b.array() * x.array().square() + c.array() * x.array().cube()).sum();
}

HVector ItoFunctional::gradient(const HVector& x) const {
  check_dim(*this, x);
  if (kind == Kind::norm_sq) return 2.0 * x;
  return (a.array() + 2.0 * b.array() * x.array() + 3.0 * c.array() * x.array().square()).matrix();
}

HVector ItoFunctional::hessian_diag(const HVector& x) const {
  check_dim(*this, x);
  if (kind == Kind::norm_sq) return HVector::Constant(x.size(), 2.0);
  return (2.0 * b.array() + 6.0 * c.array() * x.array()).matrix();
}

ItoResidualPath ito_formula_residual(const ItoFunctional& F, const ItoProcess& X,
                                     const TimeChangedQWienerPath& path, const SubordinatorPath& subordinator) {
  const auto& basis = path.basis();
  check_width(X.phi, basis);
  if (X.phi.rows() != X.x0.size()) throw ParameterError("diffusion rows must match the state dimension");
  const auto t = path.t();
  const auto e = path.inverse().values();
  const auto tau = subordinator.tau();
  const auto u = subordinator.values();
  const auto& w = path.w_at_E();
  const Eigen::VectorXd& sl = basis.sqrt_lambda();
  const Eigen::VectorXd lam = sl.array().square();
  const std::size_t n = path.size();

  // tr(F_xx (phi Q^{1/2})(phi Q^{1/2})^*) with diagonal F_xx
  auto trace_term = [&](const HSOperator& op, const HVector& x) {
    return (F.hessian_diag(x).asDiagonal() * (op * lam.asDiagonal() * op.transpose())).trace();
  };

  ItoResidualPath out;
  out.t.assign(t.begin(), t.end());
  out.residual.assign(n, 0.0);
  HVector x = X.x0;
  const double f0 = F.value(x);
  double sum_t = 0.0, sum_tau = 0.0;
  std::size_t k = node_index(tau, e[0]);
  for (std::size_t m = 0; m + 1 < n; ++m) {
    const auto r = static_cast<Eigen::Index>(m);
    const double dt = t[m + 1] - t[m];
    const double de = e[m + 1] - e[m];
    const Eigen::VectorXd dW = (w.row(r + 1) - w.row(r)).transpose().cwiseProduct(sl);
    const HSOperator op = X.phi.at(t[m], x);
    HVector dx = op * dW;
    if (X.psi) dx += X.psi(t[m], x) * dt;
    if (X.gamma && de != 0.0) dx += X.gamma(t[m], x) * de;
    const HVector grad = F.gradient(x);
    sum_t += grad.dot(op * dW);
    if (X.psi) sum_t += grad.dot(X.psi(t[m], x)) * dt;

    // operational-time sum over tau nodes in [E(t_m), E(t_{m+1})); every such
    // node has U(tau_k) in [t_m, t_{m+1}), so the state there is x
    const std::size_t k_next = node_index(tau, e[m + 1]);
    for (; k < k_next; ++k) {
      const double ds = tau[k + 1] - tau[k];
      const double s = u[k];
      double g = 0.0;
      if (X.gamma) g += grad.dot(X.gamma(s, x));
      g += 0.5 * trace_term(X.phi.at(s, x), x);
      sum_tau += g * ds;
    }
    x += dx;
    if (!x.allFinite()) throw NumericError("Ito process became non-finite at t = " + std::to_string(t[m + 1]));
    out.residual[m + 1] = F.value(x) - f0 - sum_t - sum_tau;
    out.max_abs = std::max(out.max_abs, std::abs(out.residual[m + 1]));
  }
  return out;
}

RefinementReport ito_formula_refinement(const ItoFunctional& F, const ItoProcess& X, const RefinementSetup& setup) {
  if (setup.mc < 1) throw ParameterError("refinement needs mc >= 1");
  const auto gaps = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    const auto levels = coupled_levels(setup, i);
    std::vector<double> g;
    for (const auto& lv : levels) {
      const auto path = compose_time_change(lv.qpath, lv.inverse);
      g.push_back(ito_formula_residual(F, X, path, lv.subordinator).max_abs);
    }
    return g;
  });
  return summarize_refinement(setup, gaps);
}

HSIntegrand random_elementary_integrand(RngStream& rng, Eigen::Index d, double horizon, std::size_t pieces) {
  if (pieces < 1 || d < 1 || !(horizon > 0.0)) throw ParameterError("random integrand needs d, pieces >= 1, horizon > 0");
  std::vector<double> w(pieces);
  double total = 0.0;
  for (auto& x : w) total += (x = 0.2 + rng.uniform());
  std::vector<double> br{0.0};
  for (std::size_t i = 0; i + 1 < pieces; ++i) br.push_back(br.back() + w[i] / total * horizon);
  br.push_back(horizon);
  std::vector<HSOperator> v;
  for (std::size_t i = 0; i < pieces; ++i) {
    HSOperator m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.normal();
    v.push_back(m);
  }
  return HSIntegrand::elementary(br, v);
}

}  // namespace subdiff
