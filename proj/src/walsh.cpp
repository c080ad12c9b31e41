#include "subdiff/walsh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "subdiff/errors.hpp"
#include "subdiff/parallel.hpp"

namespace subdiff {

SpatialGrid::SpatialGrid(Eigen::MatrixXd points, double cell_weight) : points_(std::move(points)), dx_(cell_weight) {
  if (points_.rows() < 1) throw ParameterError("spatial grid needs at least one point");
  if (points_.cols() < 1 || points_.cols() > 2) throw ParameterError("spatial grid dimension must be 1 or 2");
  if (!(dx_ > 0.0) || !std::isfinite(dx_)) throw ParameterError("cell weight must be positive");
  for (Eigen::Index a = 0; a < points_.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < points_.rows(); ++b) {
      if ((points_.row(a) - points_.row(b)).norm() == 0.0) throw ParameterError("grid points must be distinct");
    }
  }
}

SpatialGrid SpatialGrid::uniform(std::size_t P, double dx, double x0) {
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(P), 1);
  for (std::size_t a = 0; a < P; ++a) pts(static_cast<Eigen::Index>(a), 0) = x0 + static_cast<double>(a) * dx;
  return SpatialGrid(std::move(pts), dx);
}

SpatialGrid SpatialGrid::shifted(const Eigen::VectorXd& offset) const {
  if (offset.size() != points_.cols()) throw ParameterError("shift dimension does not match the grid");
  Eigen::MatrixXd pts = points_.rowwise() + offset.transpose();
  return SpatialGrid(std::move(pts), dx_);
}

Kernel Kernel::gaussian(double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian kernel width must be positive");
  return Kernel{Kind::gaussian, sigma};
}

Kernel Kernel::exponential(double length) {
  if (!(length > 0.0)) throw ParameterError("exponential kernel length must be positive");
  return Kernel{Kind::exponential, length};
}

double Kernel::operator()(double r) const {
  switch (kind) {
    case Kind::gaussian: return std::exp(-r * r / (2.0 * scale * scale));
    case Kind::exponential: return std::exp(-std::abs(r) / scale);
  }
  return 0.0;
}

KernelSpace::KernelSpace(const SpatialGrid& grid, const Kernel& kernel) {
  const auto P = static_cast<Eigen::Index>(grid.size());
  const double w2 = grid.cell_weight() * grid.cell_weight();
  G_.resize(P, P);
  for (Eigen::Index a = 0; a < P; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = kernel((grid.points().row(a) - grid.points().row(b)).norm()) * w2;
      G_(a, b) = v;
      G_(b, a) = v;
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G_);
  if (es.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed");
  // descending order
  Eigen::VectorXd nu = es.eigenvalues().reverse();
  Eigen::MatrixXd vec = es.eigenvectors().rowwise().reverse();
  const double scale = nu.cwiseAbs().maxCoeff();
  if (nu.minCoeff() < -kPsdTolerance * scale) {
    std::ostringstream msg;
    msg << "kernel Gram matrix is not non-negative definite: eigenvalue " << nu.minCoeff();
    throw KernelError(msg.str());
  }
  if (nu.minCoeff() < 0.0) {
    warnings_.emplace_back("clipped slightly negative Gram eigenvalues to 0");
    nu = nu.cwiseMax(0.0);
  }
  nu_ = nu;
  Eigen::Index r = 0;
  while (r < P && nu(r) > kRankTolerance * nu(0)) ++r;
  if (r == 0) throw KernelError("kernel Gram matrix is zero");
  if (r < P) {
    std::ostringstream msg;
    msg << "Gram matrix has numerical rank " << r << " of " << P << "; dropped null directions";
    warnings_.push_back(msg.str());
  }
  basis_ = vec.leftCols(r);
  for (Eigen::Index k = 0; k < r; ++k) basis_.col(k) /= std::sqrt(nu(k));
}

double KernelSpace::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != G_.rows() || b.size() != G_.rows()) throw ParameterError("vector size does not match the grid");
  return a.dot(G_ * b);
}

Eigen::VectorXd KernelSpace::coordinates(const Eigen::VectorXd& phi) const {
  if (phi.size() != G_.rows()) throw ParameterError("vector size does not match the grid");
  return basis_.transpose() * (G_ * phi);
}

Eigen::VectorXd KernelSpace::indicator(std::span<const std::size_t> cells) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(G_.rows());
  for (auto c : cells) {
    if (c >= points()) throw ParameterError("cell index outside the grid");
    v(static_cast<Eigen::Index>(c)) = 1.0;
  }
  return v;
}

JOperator::JOperator(const KernelSpace& space, std::vector<double> lambda) : lambda_(std::move(lambda)) {
  if (lambda_.size() != space.dim()) throw ParameterError("J needs one eigenvalue per K-basis vector");
  const auto r = static_cast<Eigen::Index>(lambda_.size());
  Eigen::VectorXd s(r), sinv(r);
  std::size_t zeros = 0;
  for (Eigen::Index j = 0; j < r; ++j) {
    const double l = lambda_[static_cast<std::size_t>(j)];
    if (!(l >= 0.0) || !std::isfinite(l)) throw ParameterError("J eigenvalues must be finite and non-negative");
    s(j) = std::sqrt(l);
    sinv(j) = l > 0.0 ? 1.0 / s(j) : 0.0;
    if (l == 0.0) ++zeros;
  }
  if (zeros > 0) {
    std::ostringstream msg;
    msg << zeros << " zero J eigenvalue(s): J^{-1} is the pseudo-inverse on the remaining directions";
    warnings_.push_back(msg.str());
  }
  const Eigen::MatrixXd& F = space.basis();
  const Eigen::MatrixXd FtG = F.transpose() * space.gram();
  J_ = F * s.asDiagonal() * FtG;
  Jinv_ = F * sinv.asDiagonal() * FtG;
}

JOperator JOperator::dyadic(const KernelSpace& space) {
  std::vector<double> l(space.dim());
  for (std::size_t j = 0; j < l.size(); ++j) l[j] = std::ldexp(1.0, -static_cast<int>(j + 1));
  return JOperator(space, std::move(l));
}

Eigen::MatrixXd JOperator::q() const { return J_ * J_; }

double JOperator::trace() const noexcept {
  double t = 0.0;
  for (double l : lambda_) t += l;
  return t;
}

std::size_t FieldNoise::node(double t) const {
  const auto grid = inverse.t();
  const double tol = 1e-12 * std::max(1.0, std::abs(grid.back()));
  if (t > grid.back() + tol) throw HorizonError("integrand time lies beyond the noise horizon");
  const auto it = std::lower_bound(grid.begin(), grid.end(), t - tol);
  if (it == grid.end() || std::abs(*it - t) > tol) throw ParameterError("integrand time is not a grid node");
  return static_cast<std::size_t>(it - grid.begin());
}

FieldNoise sample_field_noise(const KernelSpace& space, InversePath inverse, RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(inverse.size());
  const auto r = static_cast<Eigen::Index>(space.dim());
  const auto e = inverse.values();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, r);
  for (Eigen::Index m = 1; m < n; ++m) {
    const double sd = std::sqrt(e[static_cast<std::size_t>(m)] - e[static_cast<std::size_t>(m - 1)]);
    for (Eigen::Index k = 0; k < r; ++k) w(m, k) = w(m - 1, k) + sd * rng.normal();
  }
  return FieldNoise{std::move(inverse), std::move(w)};
}

FieldNoise simulate_field_noise(const KernelSpace& space, double beta, std::span<const double> t_grid, double d_tau,
                                const RngStream& rng) {
  const BetaIndex b(beta);
  RngStream clock = rng.split(0);
  RngStream coords = rng.split(1);
  InversePath inv = b.degenerate() ? identity_inverse(t_grid)
                                   : invert_path(simulate_subordinator_until(b, t_grid.back(), d_tau, clock), t_grid);
  return sample_field_noise(space, std::move(inv), coords);
}

double cylindrical_value(const KernelSpace& space, const FieldNoise& noise, const Eigen::VectorXd& phi,
                         std::size_t m) {
  return space.coordinates(phi).dot(noise.w.row(static_cast<Eigen::Index>(m)).transpose());
}

double martingale_measure(const KernelSpace& space, const FieldNoise& noise, std::span<const std::size_t> cells,
                          std::size_t m) {
  return cylindrical_value(space, noise, space.indicator(cells), m);
}

FieldElementary FieldElementary::constant(double a, double b, std::vector<std::size_t> cells, double x) {
  FieldElementary e;
  e.a = a;
  e.b = b;
  e.cells = std::move(cells);
  e.x = [x](const FieldNoise&) { return x; };
  e.measurable_at = 0.0;
  return e;
}

bool adapted(const FieldIntegrand& g) noexcept {
  return std::all_of(g.begin(), g.end(), [](const FieldElementary& e) { return e.adapted(); });
}

namespace {

struct ResolvedTerm {
  std::size_t ia, ib;
  double x;
  Eigen::VectorXd indicator;
};

std::vector<ResolvedTerm> resolve(const KernelSpace& space, const FieldIntegrand& g, const FieldNoise& noise) {
  std::vector<ResolvedTerm> out;
  out.reserve(g.size());
  for (const auto& e : g) {
    if (!(e.a < e.b)) throw ParameterError("elementary integrand needs a < b");
    if (!e.adapted()) throw PreconditionError("integrand coefficient is not measurable at the left endpoint");
    if (!e.x) throw ParameterError("elementary integrand has no coefficient");
    out.push_back(ResolvedTerm{noise.node(e.a), noise.node(e.b), e.x(noise), space.indicator(e.cells)});
  }
  return out;
}

// K-valued step function value on grid interval (t_m, t_{m+1}].
Eigen::VectorXd step_value(const std::vector<ResolvedTerm>& terms, std::size_t m, Eigen::Index P) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(P);
  for (const auto& t : terms) {
    if (t.ia <= m && m < t.ib) g += t.x * t.indicator;
  }
  return g;
}

}  // namespace

std::vector<double> cylindrical_integral(const KernelSpace& space, const FieldIntegrand& g, const FieldNoise& noise) {
  const auto terms = resolve(space, g, noise);
  const auto P = static_cast<Eigen::Index>(space.points());
  std::vector<double> out(noise.size(), 0.0);
  for (std::size_t m = 0; m + 1 < noise.size(); ++m) {
    const Eigen::VectorXd gm = step_value(terms, m, P);
    double inc = 0.0;
    for (std::size_t k = 0; k < space.dim(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      inc += space.inner(gm, space.f(k)) * (noise.w(static_cast<Eigen::Index>(m + 1), kk) -
                                            noise.w(static_cast<Eigen::Index>(m), kk));
    }
    out[m + 1] = out[m] + inc;
  }
  return out;
}

double martingale_measure_integral(const KernelSpace& space, const FieldElementary& e, const FieldNoise& noise) {
  const auto terms = resolve(space, FieldIntegrand{e}, noise);
  const auto& t = terms.front();
  return t.x * (martingale_measure(space, noise, e.cells, t.ib) - martingale_measure(space, noise, e.cells, t.ia));
}

std::vector<double> martingale_measure_integral(const KernelSpace& space, const FieldIntegrand& g,
                                                const FieldNoise& noise) {
  const auto terms = resolve(space, g, noise);
  std::vector<double> out(noise.size(), 0.0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    const double m_a = martingale_measure(space, noise, g[i].cells, t.ia);
    for (std::size_t m = t.ia + 1; m < noise.size(); ++m) {
      out[m] += t.x * (martingale_measure(space, noise, g[i].cells, std::min(m, t.ib)) - m_a);
    }
  }
  return out;
}

std::vector<double> qwiener_integral_via_J(const KernelSpace& space, const JOperator& J, const FieldIntegrand& g,
                                           const FieldNoise& noise) {
  const auto terms = resolve(space, g, noise);
  const auto P = static_cast<Eigen::Index>(space.points());
  // Column j: J^{-1}(J f_j), the preimage of the W-direction of mode j.
  const Eigen::MatrixXd U = J.pseudo_inverse() * (J.matrix() * space.basis());
  std::vector<double> out(noise.size(), 0.0);
  for (std::size_t m = 0; m + 1 < noise.size(); ++m) {
    const Eigen::VectorXd gm = step_value(terms, m, P);
    const Eigen::VectorXd phi = U.transpose() * (space.gram() * gm);
    const Eigen::VectorXd dw =
        (noise.w.row(static_cast<Eigen::Index>(m + 1)) - noise.w.row(static_cast<Eigen::Index>(m))).transpose();
    out[m + 1] = out[m] + phi.dot(dw);
  }
  return out;
}

FieldIntegrand random_field_integrand(const KernelSpace& space, const FieldNoise& noise, std::size_t terms,
                                      RngStream& rng) {
  const std::size_t n = noise.size();
  if (n < 2) throw ParameterError("noise grid needs at least two nodes");
  const auto t = noise.t();
  const std::size_t P = space.points();
  auto random_cells = [&] {
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < P; ++c) {
      if (rng.uniform() < 0.5) cells.push_back(c);
    }
    return cells;
  };
  FieldIntegrand g;
  for (std::size_t i = 0; i < terms; ++i) {
    const auto ia = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - 1));
    const auto ib = ia + 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - 1 - ia));
    FieldElementary e;
    e.a = t[ia];
    e.b = t[std::min(ib, n - 1)];
    e.cells = random_cells();
    const double c0 = rng.normal(), c1 = rng.normal();
    const Eigen::VectorXd ind = space.indicator(random_cells());
    e.x = [&space, ind, c0, c1, ia](const FieldNoise& nz) { return c0 + c1 * cylindrical_value(space, nz, ind, ia); };
    e.measurable_at = e.a;
    g.push_back(std::move(e));
  }
  return g;
}

TripleReport triple_equality_report(
    const TripleSetup& setup,
    const std::function<FieldIntegrand(const KernelSpace&, const FieldNoise&, RngStream&)>& make_g) {
  const KernelSpace space(SpatialGrid::uniform(setup.points, setup.dx), setup.kernel);
  const JOperator J = JOperator::dyadic(space);
  const auto grid = uniform_grid(setup.horizon, setup.t_steps);

  struct Trial {
    bool ok = false;
    TripleRow row;
  };
  const auto trials = run_replications(setup.trials, setup.workers, [&](std::size_t i) {
    RngStream rng(setup.seed, 0x3A1u, i);
    const FieldNoise noise = simulate_field_noise(space, setup.beta, grid, setup.d_tau, rng.split(0));
    RngStream gen = rng.split(1);
    const FieldIntegrand g = make_g(space, noise, gen);
    Trial out;
    out.row.trial = i;
    if (!adapted(g)) return out;
    const auto i1 = martingale_measure_integral(space, g, noise);
    const auto i2 = cylindrical_integral(space, g, noise);
    const auto i3 = qwiener_integral_via_J(space, J, g, noise);
    for (std::size_t m = 0; m < grid.size(); ++m) {
      out.row.gap12 = std::max(out.row.gap12, std::abs(i1[m] - i2[m]));
      out.row.gap13 = std::max(out.row.gap13, std::abs(i1[m] - i3[m]));
      out.row.gap23 = std::max(out.row.gap23, std::abs(i2[m] - i3[m]));
    }
    out.ok = true;
    return out;
  });

  TripleReport rep;
  for (const auto& t : trials) {
    if (!t.ok) {
      ++rep.out_of_class;
      continue;
    }
    rep.rows.push_back(t.row);
    rep.max_gap = std::max({rep.max_gap, t.row.gap12, t.row.gap13, t.row.gap23});
  }
  return rep;
}

TripleReport triple_equality_report(const TripleSetup& setup) {
  const std::size_t terms = setup.terms;
  return triple_equality_report(setup, [terms](const KernelSpace& space, const FieldNoise& noise, RngStream& rng) {
    return random_field_integrand(space, noise, terms, rng);
  });
}

}  // namespace subdiff
