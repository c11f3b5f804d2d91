#include <algorithm>
#include <cmath>
#include <string>

#include "locgibbs/errors.hpp"
#include "locgibbs/solvers.hpp"

namespace locgibbs {

MultiplierFields MultiplierFields::zeros(std::size_t m) {
  const auto n = static_cast<Eigen::Index>(m);
  return {RealVector::Zero(n), RealVector::Zero(n - 1), RealVector::Zero(n)};
}

MultiplierFields MultiplierFields::uniform(std::size_t m, double alpha, double beta) {
  MultiplierFields out = zeros(m);
  out.lam_n.setConstant(alpha);
  out.lam_e.setConstant(beta);
  return out;
}

RealVector MultiplierFields::flatten() const {
  RealVector flat(lam_n.size() + lam_u.size() + lam_e.size());
  flat << lam_n, lam_u, lam_e;
  return flat;
}

MultiplierFields MultiplierFields::unflatten(std::size_t m, const RealVector& flat) {
  const auto n = static_cast<Eigen::Index>(m);
  if (flat.size() != 3 * n - 1) throw InvalidArgument("multipliers: expected 3m - 1 entries");
  return {flat.segment(0, n), flat.segment(n, n - 1), flat.segment(2 * n - 1, n)};
}

RealVector ConstraintOperators::flatten(const MomentFields& fields) {
  RealVector flat(fields.n.size() + fields.u.size() + fields.e.size());
  flat << fields.n, fields.u, fields.e;
  return flat;
}

ConstraintOperators::ConstraintOperators(const LatticeSpec& spec, BasisPtr basis)
    : spec_(spec), basis_(std::move(basis)) {
  spec_.validate();
  if (!basis_ || basis_->modes() != spec_.m) {
    throw InvalidArgument("constraints: basis does not match the lattice");
  }
  const auto m = static_cast<Eigen::Index>(spec_.m);
  const double h = spec_.h;
  const double inv_h2 = 1.0 / (h * h);
  const Complex i_unit(0.0, 1.0);
  ops_.reserve(static_cast<std::size_t>(3 * m - 1));

  // density: dGamma(E_ii)
  for (Eigen::Index i = 0; i < m; ++i) {
    OneBodyOperator a{ComplexMatrix::Zero(m, m), OperatorKind::multiplication};
    a.matrix(i, i) = 1.0;
    ops_.push_back(second_quantize_onebody(a, basis_));
  }
  // current on edge (i, i+1): h u = Im(rho1_{i+1,i}) / h
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    OneBodyOperator a{ComplexMatrix::Zero(m, m), OperatorKind::gradient};
    a.matrix(i, i + 1) = -i_unit / (2.0 * h);
    a.matrix(i + 1, i) = i_unit / (2.0 * h);
    ops_.push_back(second_quantize_onebody(a, basis_));
  }
  // kinetic density of each edge, boundary terms folded into the end edges
  std::vector<ComplexMatrix> edge_kinetic;
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    ComplexMatrix t = ComplexMatrix::Zero(m, m);
    t(i, i) = inv_h2;
    t(i + 1, i + 1) = inv_h2;
    t(i, i + 1) = -inv_h2;
    t(i + 1, i) = -inv_h2;
    if (i == 0) t(0, 0) += inv_h2;
    if (i + 2 == m) t(m - 1, m - 1) += inv_h2;
    edge_kinetic.push_back(std::move(t));
  }
  // energy at site i: half of each adjacent edge, (V_i + r0) n_i, and the
  // pair terms sum_j w_ij P(i, j) / 2
  const RealVector potential = spec_.potential();
  for (Eigen::Index i = 0; i < m; ++i) {
    OneBodyOperator a{ComplexMatrix::Zero(m, m), OperatorKind::general};
    if (i > 0) a.matrix += 0.5 * edge_kinetic[static_cast<std::size_t>(i - 1)];
    if (i + 1 < m) a.matrix += 0.5 * edge_kinetic[static_cast<std::size_t>(i)];
    a.matrix(i, i) += potential[i] + spec_.r0;
    FockOperator op = second_quantize_onebody(a, basis_);
    const auto site = static_cast<std::size_t>(i);
    const RealVector pairs = pair_interaction_diagonal(*basis_, [&](std::size_t p, std::size_t q) {
      if (p == q) return p == site ? spec_.pair(p, q) : 0.0;
      return (p == site || q == site) ? 0.5 * spec_.pair(p, q) : 0.0;
    });
    op.matrix.diagonal() += pairs.cast<Complex>();
    ops_.push_back(std::move(op));
  }
}

FockOperator ConstraintOperators::dual_hamiltonian(const MultiplierFields& lambda) const {
  const RealVector flat = lambda.flatten();
  if (flat.size() != count()) throw InvalidArgument("constraints: multiplier size mismatch");
  FockOperator out{basis_, ComplexMatrix::Zero(basis_->size(), basis_->size()), true};
  for (Eigen::Index k = 0; k < count(); ++k) {
    if (flat[k] != 0.0) out.matrix += flat[k] * ops_[static_cast<std::size_t>(k)].matrix;
  }
  return out;
}

namespace {

struct Evaluation {
  Spectrum spectrum;
  RealVector weights;
  double log_z = 0.0;
  double dual = 0.0;
};

Evaluation evaluate(const ConstraintOperators& ops, const MultiplierFields& lambda,
                    const RealVector& target_flat) {
  Evaluation ev;
  ev.spectrum = diagonalize(ops.dual_hamiltonian(lambda));
  const RealVector& eps = ev.spectrum.energies;
  const double shift = eps.minCoeff();
  ev.weights = (-(eps.array() - shift)).exp();
  const double sum = ev.weights.sum();
  ev.weights /= sum;
  ev.log_z = -shift + std::log(sum);
  ev.dual = -ev.log_z - ops.spec().h * lambda.flatten().dot(target_flat);
  return ev;
}

// Kubo-Mori covariance of the constraint operators: the Hessian of log Z.
RealMatrix kubo_mori_hessian(const ConstraintOperators& ops, const Evaluation& ev) {
  const auto k = ops.count();
  const auto d = ev.weights.size();
  const ComplexMatrix& v = ev.spectrum.vectors;
  const RealVector& eps = ev.spectrum.energies;
  const RealVector& p = ev.weights;

  RealMatrix phi(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      const double delta = eps[b] - eps[a];
      phi(a, b) = std::abs(delta) < 1e-12 ? 0.5 * (p[a] + p[b]) : p[a] * (-std::expm1(-delta)) / delta;
    }
  }
  std::vector<ComplexMatrix> rotated;
  rotated.reserve(static_cast<std::size_t>(k));
  RealVector mean(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    rotated.push_back(v.adjoint() * ops.operators()[static_cast<std::size_t>(i)].matrix * v);
    mean[i] = (rotated.back().diagonal().real().array() * p.array()).sum();
  }
  RealMatrix hess(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const ComplexMatrix weighted = rotated[static_cast<std::size_t>(i)].cwiseProduct(phi.cast<Complex>());
    for (Eigen::Index j = i; j < k; ++j) {
      const double value =
          (weighted.conjugate().cwiseProduct(rotated[static_cast<std::size_t>(j)])).sum().real() -
          mean[i] * mean[j];
      hess(i, j) = value;
      hess(j, i) = value;
    }
  }
  return hess;
}

void validate_targets(const MomentFields& targets, std::size_t m) {
  const auto n = static_cast<Eigen::Index>(m);
  if (targets.n.size() != n || targets.u.size() != n - 1 || targets.e.size() != n) {
    throw InvalidArgument("reconstruct: targets need n and e per site and u per edge");
  }
  if (!targets.n.allFinite() || !targets.u.allFinite() || !targets.e.allFinite()) {
    throw InvalidArgument("reconstruct: targets must be finite");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (targets.n[i] < 0.0) {
      throw InvalidArgument("reconstruct: negative target density at site " + std::to_string(i));
    }
  }
}

double log_sum_exp_neg(const RealVector& x) {
  const double shift = x.minCoeff();
  return -shift + std::log((-(x.array() - shift)).exp().sum());
}

}  // namespace

std::optional<std::pair<double, double>> global_presolve(const ConstraintOperators& ops,
                                                         const MomentFields& targets) {
  const auto m = static_cast<Eigen::Index>(ops.spec().m);
  FockOperator total_n{ops.basis(), ComplexMatrix::Zero(ops.basis()->size(), ops.basis()->size()), true};
  FockOperator total_e = total_n;
  for (Eigen::Index i = 0; i < m; ++i) {
    total_n.matrix += ops.operators()[static_cast<std::size_t>(i)].matrix;
    total_e.matrix += ops.operators()[static_cast<std::size_t>(2 * m - 1 + i)].matrix;
  }
  const Spectrum s = diagonalize(total_e, &total_n);
  const double h = ops.spec().h;
  const double n_target = h * targets.n.sum();
  const double e_target = h * targets.e.sum();

  auto dual = [&](double alpha, double beta) {
    return -log_sum_exp_neg(beta * s.energies + alpha * s.particles) - alpha * n_target -
           beta * e_target;
  };
  double alpha = 0.0;
  double beta = 1.0;
  for (int it = 0; it < 200; ++it) {
    const RealVector x = beta * s.energies + alpha * s.particles;
    RealVector p = (-(x.array() - x.minCoeff())).exp();
    p /= p.sum();
    const double mean_n = p.dot(s.particles);
    const double mean_e = p.dot(s.energies);
    const Eigen::Vector2d grad(mean_n - n_target, mean_e - e_target);
    if (std::abs(grad[0]) <= 1e-13 * std::max(1.0, n_target) &&
        std::abs(grad[1]) <= 1e-13 * std::max(1.0, std::abs(e_target))) {
      return std::make_pair(alpha, beta);
    }
    const RealVector dn = s.particles.array() - mean_n;
    const RealVector de = s.energies.array() - mean_e;
    Eigen::Matrix2d cov;
    cov << p.dot(dn.cwiseProduct(dn)), p.dot(dn.cwiseProduct(de)), p.dot(dn.cwiseProduct(de)),
        p.dot(de.cwiseProduct(de));
    Eigen::Vector2d step = cov.ldlt().solve(grad);
    if (!step.allFinite()) step = grad;
    const double current = dual(alpha, beta);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-14) {
      const double na = alpha + t * step[0];
      const double nb = beta + t * step[1];
      if (nb > 0.0 && dual(na, nb) >= current + 1e-4 * t * grad.dot(step) - 1e-14 * std::abs(current)) {
        alpha = na;
        beta = nb;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return std::nullopt;
}

DualState local_gibbs_reconstruct(const LatticeSpec& spec, const BasisPtr& basis,
                                  const MomentFields& targets, const ReconstructOptions& opts) {
  validate_targets(targets, spec.m);
  return local_gibbs_reconstruct(ConstraintOperators(spec, basis), targets, opts);
}

DualState local_gibbs_reconstruct(const ConstraintOperators& ops, const MomentFields& targets,
                                  const ReconstructOptions& opts) {
  const std::size_t m = ops.spec().m;
  validate_targets(targets, m);
  const double h = ops.spec().h;
  const RealVector target_flat = ConstraintOperators::flatten(targets);

  MultiplierFields lambda = MultiplierFields::zeros(m);
  switch (opts.init) {
    case InitPolicy::zero:
      break;
    case InitPolicy::custom:
      if (!opts.initial) throw InvalidArgument("reconstruct: custom init without multipliers");
      lambda = *opts.initial;
      break;
    case InitPolicy::global_presolve:
      if (auto ab = global_presolve(ops, targets)) lambda = MultiplierFields::uniform(m, ab->first, ab->second);
      break;
  }
  if (lambda.flatten().size() != ops.count()) throw InvalidArgument("reconstruct: bad initial multipliers");

  Evaluation ev = evaluate(ops, lambda, target_flat);
  std::vector<TraceRow> trace;
  double gradient_step = 1.0;
  double previous_norm = std::numeric_limits<double>::infinity();

  for (int iteration = 0;; ++iteration) {
    DensityMatrix rho = DensityMatrix::from_spectral(ops.basis(), ev.spectrum.vectors, ev.weights);
    MomentFields achieved = moment_fields(rho, ops.spec());
    const RealVector residual_flat = ConstraintOperators::flatten(achieved) - target_flat;
    const double norm = residual_flat.cwiseAbs().maxCoeff();
    trace.push_back({iteration, ev.dual, norm, 0.0, false});

    if (norm <= opts.tolerance) {
      MomentFields residual = achieved - targets;
      return DualState{lambda,     std::move(rho), std::move(achieved), std::move(residual), norm,
                       ev.dual,    ev.log_z,       iteration,           std::move(trace)};
    }
    if (iteration >= opts.max_iterations) {
      throw ConvergenceError("reconstruct: iteration cap " + std::to_string(opts.max_iterations) +
                                 " reached with residual " + std::to_string(norm),
                             norm, iteration);
    }
    if (lambda.max_norm() > opts.lambda_cap && norm >= previous_norm) {
      throw ConvergenceError("reconstruct: multipliers exceed " + std::to_string(opts.lambda_cap) +
                                 " without progress; targets look inadmissible",
                             norm, iteration);
    }
    previous_norm = norm;

    const RealVector grad = h * residual_flat;
    const RealVector current = lambda.flatten();

    RealVector direction;
    bool newton = false;
    if (opts.newton) {
      const RealMatrix hess = kubo_mori_hessian(ops, ev);
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(hess);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      if (es.info() == Eigen::Success && lo > 0.0 && hi / lo < opts.newton_condition_limit) {
        direction = es.eigenvectors() *
                    (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * grad));
        newton = true;
      }
    }

    auto try_direction = [&](const RealVector& dir, double step, bool is_newton) -> bool {
      const double slope = grad.dot(dir);
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        MultiplierFields trial = MultiplierFields::unflatten(m, current + step * dir);
        Evaluation next = evaluate(ops, trial, target_flat);
        const bool armijo = next.dual >= ev.dual + opts.armijo * step * slope;
        // Near the optimum the dual gain drops below round-off; accept a full
        // Newton step that keeps the dual level.
        const bool flat_newton = is_newton && halving == 0 &&
                                 next.dual >= ev.dual - 1e-13 * std::max(1.0, std::abs(ev.dual));
        if (armijo || flat_newton) {
          lambda = std::move(trial);
          ev = std::move(next);
          trace.back().step = step;
          trace.back().newton = is_newton;
          if (!is_newton) gradient_step = std::min(1e6, 2.0 * step);
          return true;
        }
      }
      return false;
    };

    bool moved = newton && try_direction(direction, 1.0, true);
    if (!moved) moved = try_direction(grad, gradient_step, false);
    if (!moved) {
      throw ConvergenceError("reconstruct: line search failed with residual " + std::to_string(norm),
                             norm, iteration);
    }
  }
}

}  // namespace locgibbs
