#include "locgibbs/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "locgibbs/errors.hpp"
#include "locgibbs/fock.hpp"
#include "locgibbs/gibbs.hpp"
#include "locgibbs/moments.hpp"
#include "locgibbs/solvers.hpp"

namespace locgibbs {

namespace {

struct Instance {
  std::string label;
  LatticeSpec spec;
  BasisPtr basis;
  FockOperator hamiltonian;
  FockOperator number;
};

Instance make_instance(std::string label, const LatticeSpec& spec, Statistics stats, std::size_t n_max) {
  auto basis = FockBasis::enumerate(stats, spec.m, n_max);
  return {std::move(label), spec, basis, build_hamiltonian(spec, basis), number_operator(basis)};
}

std::vector<Instance> default_instances() {
  std::vector<Instance> out;
  out.push_back(make_instance("fermions m=4", LatticeSpec::harmonic(4, 1.0, 0.5, 1.0, 1.0),
                              Statistics::fermionic, 4));
  out.push_back(make_instance("bosons m=3 n_max=4", LatticeSpec::harmonic(3, 1.0, 0.5, 1.0, 1.0),
                              Statistics::bosonic, 4));
  return out;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
  return out;
}

double rel(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

double op_norm(const ComplexMatrix& a) {
  return Eigen::SelfAdjointEigenSolver<ComplexMatrix>(a, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

double min_eig(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<ComplexMatrix>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

ComplexMatrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  return 0.5 * (a + a.adjoint());
}

// Keeps the worst value seen per named check.
class Tracker {
 public:
  // Upper bound: pass when value <= tol.
  void at_most(const std::string& name, double value, double tol, const std::string& where = {}) {
    auto& e = entry(name, tol);
    if (e.count == 0 || std::isnan(value) || value > e.measured) {
      e.measured = value;
      e.where = where;
    }
    e.pass = e.pass && !std::isnan(value) && value <= tol;
    ++e.count;
  }
  void holds(const std::string& name, bool ok, const std::string& where = {}) {
    auto& e = entry(name, 0.0);
    if (!ok && e.pass) {
      e.where = where;
      e.measured = 1.0;
    }
    e.pass = e.pass && ok;
    ++e.count;
  }
  void fail(const std::string& name, const std::string& why) {
    auto& e = entry(name, 0.0);
    e.pass = false;
    e.where = why;
    ++e.count;
  }
  std::vector<CheckResult> results() const {
    std::vector<CheckResult> out;
    for (const auto& key : order_) {
      const auto& e = entries_.at(key);
      std::string detail = std::to_string(e.count) + " samples";
      if (!e.where.empty()) detail += "; worst at " + e.where;
      out.push_back({key, e.pass, e.measured, e.tol, detail});
    }
    return out;
  }

 private:
  struct Entry {
    double measured = 0.0;
    double tol = 0.0;
    bool pass = true;
    int count = 0;
    std::string where;
  };
  Entry& entry(const std::string& name, double tol) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      order_.push_back(name);
      it = entries_.emplace(name, Entry{}).first;
      it->second.tol = tol;
    }
    return it->second;
  }
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

std::string at(const std::string& label, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s (%.4g, %.4g)", label.c_str(), a, b);
  return buf;
}

// States for the sum-rule style suites: random states plus Gibbs states on
// the monotonicity grid.
std::vector<DensityMatrix> state_population(const Instance& inst, std::mt19937_64& rng) {
  std::vector<DensityMatrix> out;
  for (int i = 0; i < 20; ++i) out.push_back(random_state(inst.basis, rng, i % 2 == 0 ? 0 : 1 + i % 5));
  const ThermoModel model(inst.hamiltonian, inst.number);
  for (double alpha : linspace(0.0, 2.0, 9))
    for (double beta : linspace(0.25, 3.0, 9)) out.push_back(model.state(alpha, beta));
  return out;
}

// ---------------------------------------------------------------------------

void suite_free_fermion(Tracker& t, const ValidationOptions&) {
  const std::vector<double> alphas = {0.0, 0.25, 0.5, 1.0, 2.0};
  const std::vector<double> betas = {0.2, 0.5, 1.0, 2.0, 4.0};
  for (std::size_t m = 2; m <= 8; ++m) {
    const auto inst = make_instance("free fermions m=" + std::to_string(m),
                                    LatticeSpec::harmonic(m, 1.0, 0.5, 0.0, 1.0), Statistics::fermionic, m);
    const ThermoModel model(inst.hamiltonian, inst.number);
    const RealVector eps = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(
                               build_one_particle_hamiltonian(inst.spec).matrix)
                               .eigenvalues();
    for (double alpha : alphas) {
      for (double beta : betas) {
        double lz = 0.0, n = 0.0, e = 0.0;
        for (double x : eps) {
          lz += std::log1p(std::exp(-beta * x - alpha));
          const double occ = 1.0 / (1.0 + std::exp(beta * x + alpha));
          n += occ;
          e += x * occ;
        }
        const auto s = model.summary(alpha, beta);
        const auto where = at(inst.label, alpha, beta);
        t.at_most("logZ relative error", rel(s.log_z, lz), 1e-10, where);
        t.at_most("N relative error", rel(s.particles, n), 1e-10, where);
        t.at_most("E relative error", rel(s.energy, e), 1e-10, where);
      }
    }
  }
}

void suite_monotonicity(Tracker& t, const ValidationOptions&) {
  const auto alphas = linspace(0.0, 2.0, 9);
  const auto betas = linspace(0.25, 3.0, 9);
  const double step = 1e-3;
  for (const auto& inst : default_instances()) {
    const ThermoModel model(inst.hamiltonian, inst.number);
    for (std::size_t ia = 1; ia + 1 < alphas.size(); ++ia) {
      for (std::size_t ib = 1; ib + 1 < betas.size(); ++ib) {
        const double a = alphas[ia], b = betas[ib];
        const auto where = at(inst.label, a, b);
        const auto local = thermo_scan(model, {a - step, a, a + step}, {b - step, b, b + step});
        const auto& mid = local.at(1, 1);
        const double dn = (local.at(2, 1).summary.particles - local.at(0, 1).summary.particles) / (2 * step);
        const double de = (local.at(1, 2).summary.energy - local.at(1, 0).summary.energy) / (2 * step);
        t.holds("dN/dalpha < 0", dn < 0.0, where);
        t.holds("dE/dbeta < 0", de < 0.0, where);
        t.at_most("N vs -dlogZ/dalpha (rel)", rel(*mid.fd_particles, mid.summary.particles), 1e-4, where);
        t.at_most("E vs -dlogZ/dbeta (rel)", rel(*mid.fd_energy, mid.summary.energy), 1e-4, where);
      }
    }
    // strict decrease along the coarse grid itself
    const auto scan = thermo_scan(model, alphas, betas);
    for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
      for (std::size_t ib = 0; ib < betas.size(); ++ib) {
        if (ia > 0)
          t.holds("N decreasing along alpha",
                  scan.at(ia, ib).summary.particles < scan.at(ia - 1, ib).summary.particles,
                  at(inst.label, alphas[ia], betas[ib]));
        if (ib > 0)
          t.holds("E decreasing along beta",
                  scan.at(ia, ib).summary.energy < scan.at(ia, ib - 1).summary.energy,
                  at(inst.label, alphas[ia], betas[ib]));
      }
    }
  }
}

void suite_derivatives(Tracker& t, const ValidationOptions&) {
  for (const auto& inst : default_instances()) {
    const ThermoModel model(inst.hamiltonian, inst.number);
    const auto a_grid = linspace(model.energy(0.0, 3.0), model.energy(0.0, 0.3), 20);
    const auto rows = entropy_curve(model, a_grid, 1e-3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto where = at(inst.label, rows[i].a, rows[i].beta0);
      if (!rows[i].fd_slope) {
        t.fail("df/da vs -beta0 (rel)", "missing slope at " + where);
        continue;
      }
      t.at_most("df/da vs -beta0 (rel)", rel(*rows[i].fd_slope, -rows[i].beta0), 1e-4, where);
      t.at_most("f vs S(rho) (abs)", std::abs(rows[i].f - rows[i].s_check), 1e-8, where);
      if (i > 0) t.holds("f strictly decreasing", rows[i].f < rows[i - 1].f, where);
    }

    const double beta = 1.0;
    const double n0 = model.particles(0.0, beta);
    const auto n_grid = linspace(0.05 * n0, 0.95 * n0, 20);
    const auto grows = free_energy_curve(model, beta, n_grid, 1e-3);
    for (std::size_t i = 0; i < grows.size(); ++i) {
      const auto where = at(inst.label, grows[i].a, grows[i].alpha0);
      if (!grows[i].fd_slope) {
        t.fail("d(beta g)/da vs -alpha0 (rel)", "missing slope at " + where);
        continue;
      }
      t.at_most("d(beta g)/da vs -alpha0 (rel)", rel(*grows[i].fd_slope, -grows[i].alpha0), 1e-4, where);
      t.at_most("g vs S/beta + E (abs)", std::abs(grows[i].g - grows[i].f_check), 1e-8, where);
      if (i > 0) t.holds("g strictly decreasing", grows[i].g < grows[i - 1].g, where);
    }
  }
}

void suite_kinetic(Tracker& t, const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  for (const auto& inst : default_instances()) {
    const ComplexMatrix h0 = build_laplacian(inst.spec).matrix;
    int index = 0;
    for (const auto& rho : state_population(inst, rng)) {
      const auto rho1 = one_particle_dm(rho);
      const auto f = moment_fields(rho1, pair_density(rho), inst.spec);
      const double tr = (h0 * rho1.matrix).trace().real();
      t.at_most("h sum k vs Tr(h0 rho1) (rel)", rel(inst.spec.h * f.k.sum(), tr), 1e-10,
                inst.label + " state " + std::to_string(index++));
    }
  }
}

void suite_sum_rules(Tracker& t, const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed + 1);
  for (const auto& inst : default_instances()) {
    int index = 0;
    for (const auto& rho : state_population(inst, rng)) {
      const auto f = moment_fields(rho, inst.spec);
      const auto where = inst.label + " state " + std::to_string(index++);
      t.at_most("h sum n vs Tr(N rho) (rel)", rel(inst.spec.h * f.n.sum(), rho.expectation(inst.number)), 1e-10, where);
      t.at_most("h sum e vs Tr(H rho) (rel)", rel(inst.spec.h * f.e.sum(), rho.expectation(inst.hamiltonian)), 1e-10, where);
    }
  }
}

void suite_entropy_bound(Tracker& t, const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed + 2);
  for (const auto& inst : default_instances()) {
    const auto confined = build_confined_hamiltonian(inst.spec, inst.basis);
    for (double beta : {0.5, 1.0, 2.0}) {
      for (int i = 0; i < 100; ++i) {
        const auto rho = random_state(inst.basis, rng, i % 3 == 0 ? 0 : 1 + i % 7);
        const auto b = entropy_lower_bound_check(rho, confined, beta);
        // slack >= -1e-9 written as deficit <= 1e-9
        t.at_most("bound deficit rhs - S", b.rhs - b.lhs, 1e-9, at(inst.label, beta, i));
      }
      const auto rho_c = gibbs_state(confined, inst.number, 0.0, beta).first;
      const auto b = entropy_lower_bound_check(rho_c, confined, beta);
      t.at_most("equality at rho_c", std::abs(b.lhs - b.rhs), 1e-8, at(inst.label, beta, 0));
    }
  }
}

void reconstruction_case(Tracker& t, const std::string& label, const LatticeSpec& spec,
                         const BasisPtr& basis, const DensityMatrix& ref) {
  const auto targets = moment_fields(ref, spec);
  const ConstraintOperators ops(spec, basis);
  std::vector<DualState> runs;
  for (int k = 0; k < 3; ++k) {
    ReconstructOptions o;
    o.tolerance = 1e-10;
    if (k == 1) o.init = InitPolicy::zero;
    if (k == 2) {
      o.init = InitPolicy::custom;
      auto start = MultiplierFields::uniform(spec.m, 1.0, 0.3);
      start.lam_u.setConstant(0.2);
      o.initial = start;
    }
    runs.push_back(local_gibbs_reconstruct(ops, targets, o));
  }
  const auto& best = runs[0];
  const double s_star = entropy(best.rho);
  const double s_ref = entropy(ref);
  for (const auto& r : runs) t.at_most("residual max-norm", r.residual_norm, 1e-6, label);
  t.at_most("S(rho*) - S(rho_ref)", s_star - s_ref, 1e-8, label);
  t.at_most("trace distance across 3 inits", std::max(trace_distance(runs[0].rho, runs[1].rho),
                                                      trace_distance(runs[0].rho, runs[2].rho)),
            1e-6, label);
  t.at_most("Pythagorean |F(ref, rho*) - (S_ref - S*)|",
            std::abs(relative_entropy(ref, best.rho) - (s_ref - s_star)), 1e-6, label);
}

void suite_reconstruction(Tracker& t, const ValidationOptions&) {
  for (std::size_t m : {4u, 6u}) {
    const auto spec = LatticeSpec::harmonic(m, 1.0, 0.5, 1.0, 1.0);
    auto basis = FockBasis::enumerate(Statistics::fermionic, m, m);
    const auto tilted = build_hamiltonian(spec.tilted(0.6), basis);
    const auto ref = gibbs_state(tilted, number_operator(basis), 0.2, 1.0).first;
    reconstruction_case(t, "tilted fermions m=" + std::to_string(m), spec, basis, ref);
  }
  // a reference outside the exponential family, so the Pythagorean gap is nonzero
  const auto spec = LatticeSpec::harmonic(4, 1.0, 0.5, 1.0, 1.0);
  auto basis = FockBasis::enumerate(Statistics::fermionic, 4, 4);
  ComplexMatrix nnn = ComplexMatrix::Zero(4, 4);
  nnn(0, 2) = nnn(2, 0) = nnn(1, 3) = nnn(3, 1) = -0.6;
  const auto h = build_hamiltonian(spec, basis) + second_quantize_onebody({nnn, OperatorKind::general}, basis);
  const auto ref = gibbs_state(h, number_operator(basis), 0.2, 1.0).first;
  reconstruction_case(t, "next-nearest hopping fermions m=4", spec, basis, ref);
}

void suite_global_local(Tracker& t, const ValidationOptions&) {
  for (const auto& inst : default_instances()) {
    const ThermoModel model(inst.hamiltonian, inst.number);
    const auto grid = linspace(model.energy(0.0, 2.5), model.energy(0.0, 0.4), 5);
    const auto rows = entropy_curve(model, grid);
    const ConstraintOperators ops(inst.spec, inst.basis);
    for (const auto& row : rows) {
      const auto targets = moment_fields(model.state(0.0, row.beta0), inst.spec);
      ReconstructOptions o;
      o.tolerance = 1e-10;
      const auto out = local_gibbs_reconstruct(ops, targets, o);
      t.at_most("|S(rho*) - f(a)|", std::abs(entropy(out.rho) - row.f), 1e-8, at(inst.label, row.a, row.beta0));
      t.at_most("residual max-norm", out.residual_norm, 1e-6, at(inst.label, row.a, row.beta0));
    }
  }
}

void suite_rdm_duality(Tracker& t, const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed + 3);
  for (const auto& inst : default_instances()) {
    std::vector<DensityMatrix> states;
    for (int i = 0; i < 6; ++i) states.push_back(random_state(inst.basis, rng, i < 3 ? 0 : i - 2));
    const ThermoModel model(inst.hamiltonian, inst.number);
    states.push_back(model.state(0.2, 0.7));
    states.push_back(model.state(1.0, 2.0));
    const auto m = static_cast<Eigen::Index>(inst.spec.m);
    for (std::size_t s = 0; s < states.size(); ++s) {
      const auto& rho = states[s];
      const auto where = inst.label + " state " + std::to_string(s);
      const auto rho1 = one_particle_dm(rho).matrix;
      for (int k = 0; k < 50; ++k) {
        const ComplexMatrix a = random_hermitian(m, rng);
        const auto big = second_quantize_onebody({a, OperatorKind::general}, inst.basis);
        const double mismatch = std::abs((a * rho1).trace().real() - rho.expectation(big));
        t.at_most("|Tr(A rho1) - Tr(dGamma(A) rho)| / |A|", mismatch / op_norm(a), 1e-10, where);
      }
      t.at_most("-min eig rho1", -min_eig(rho1), 1e-10, where);
      t.at_most("-min eig rho2", -min_eig(two_particle_dm(rho).matrix), 1e-10, where);
    }
  }
}

void suite_stability(Tracker& t, const ValidationOptions&) {
  std::vector<Instance> cases = default_instances();
  cases.push_back(make_instance("attractive bosons m=3 n_max=4", LatticeSpec::harmonic(3, 1.0, 0.5, -0.6, 2.0),
                                Statistics::bosonic, 4));
  cases.push_back(make_instance("attractive fermions m=5", LatticeSpec::harmonic(5, 1.0, 0.5, -1.0, 1.5),
                                Statistics::fermionic, 5));
  for (const auto& inst : cases) {
    const auto cert = certify_stability(inst.spec, inst.basis);
    const auto& basis = *inst.basis;
    // every occupation vector of the truncation is a configuration
    double tightest = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < basis.dimension(); ++s) {
      const Occupation& occ = basis.state(s);
      const int n = basis.particles(s);
      if (n < 2) continue;
      double w = 0.0;
      for (std::size_t i = 0; i < occ.size(); ++i) {
        w += inst.spec.pair(i, i) * occ[i] * (occ[i] - 1) / 2.0;
        for (std::size_t j = i + 1; j < occ.size(); ++j) w += inst.spec.pair(i, j) * occ[i] * occ[j];
      }
      const double slack = w + cert.c0 * n;
      tightest = std::min(tightest, slack / n);
      t.at_most("configuration deficit -(sum w + C0 n)", -slack, 1e-12, inst.label);
    }
    // C0 is the smallest such constant when positive
    if (cert.c0 > 0.0) t.at_most("C0 tightness", tightest, 1e-12, inst.label);
    t.holds("r0 > C0", inst.spec.r0 > cert.c0, inst.label);
    t.holds("gamma in (0, 1)", cert.gamma > 0.0 && cert.gamma < 1.0, inst.label);

    const auto hc = build_confined_hamiltonian(inst.spec, inst.basis) + inst.number;
    for (const auto& sector : basis.sectors()) {
      if (sector.particles == 0) continue;
      const ComplexMatrix gap = inst.hamiltonian.sector_block(sector) - cert.gamma * hc.sector_block(sector);
      t.at_most("-min eig(H_n - gamma (Hc_n + n))", -min_eig(gap), 1e-10,
                inst.label + " n=" + std::to_string(sector.particles));
    }
  }
}

struct SuiteDef {
  const char* name;
  int index;
  const char* title;
  double time_limit;  // seconds, 0 = none
  void (*body)(Tracker&, const ValidationOptions&);
};

const std::vector<SuiteDef>& registry() {
  static const std::vector<SuiteDef> defs = {
      {"free_fermion", 1, "free-fermion partition function oracle", 5.0, suite_free_fermion},
      {"monotonicity", 2, "monotone N and E, derivative identities", 30.0, suite_monotonicity},
      {"derivatives", 3, "slopes of f and beta g", 60.0, suite_derivatives},
      {"kinetic", 4, "kinetic trace identity", 0.0, suite_kinetic},
      {"sum_rules", 5, "density and energy sum rules", 0.0, suite_sum_rules},
      {"entropy_bound", 6, "entropy lower bound", 0.0, suite_entropy_bound},
      {"reconstruction", 7, "local Gibbs reconstruction", 300.0, suite_reconstruction},
      {"global_local", 8, "global/local entropy consistency", 0.0, suite_global_local},
      {"rdm_duality", 9, "reduced density matrix duality", 0.0, suite_rdm_duality},
      {"stability", 10, "stability gate", 0.0, suite_stability},
  };
  return defs;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& d : registry()) out.emplace_back(d.name);
    return out;
  }();
  return names;
}

SuiteResult run_suite(const std::string& name, const ValidationOptions& options) {
  const auto& defs = registry();
  auto it = std::find_if(defs.begin(), defs.end(), [&](const SuiteDef& d) { return name == d.name; });
  if (it == defs.end()) throw InvalidArgument("validate: unknown suite '" + name + "'");

  Tracker tracker;
  const auto start = std::chrono::steady_clock::now();
  try {
    it->body(tracker, options);
  } catch (const std::exception& e) {
    tracker.fail("exception", e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (it->time_limit > 0.0) tracker.at_most("runtime seconds", seconds, it->time_limit);

  SuiteResult result{it->name, it->index, it->title, true, seconds, tracker.results()};
  for (const auto& c : result.checks) result.pass = result.pass && c.pass;
  if (result.checks.empty()) result.pass = false;
  return result;
}

}  // namespace locgibbs
