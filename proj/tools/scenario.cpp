#include "scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "locgibbs/fock.hpp"
#include "locgibbs/gibbs.hpp"
#include "locgibbs/moments.hpp"
#include "locgibbs/validation.hpp"

namespace locgibbs::cli {

using nlohmann::json;

std::string format17(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

LatticeSpec LatticeConfig::spec() const {
  LatticeSpec s = LatticeSpec::harmonic(m, h, kappa, w0, r0);
  return tilt != 0.0 ? s.tilted(tilt) : s;
}

// ---------------------------------------------------------------------------
// schema

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw SchemaError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw SchemaError(join(path, key), "unknown key");
    }
  }
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& need(const json& obj, const std::string& path, const std::string& key) {
  const json* v = find(obj, key);
  if (!v) throw SchemaError(join(path, key), "required key missing");
  return *v;
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw SchemaError(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(key, "must be finite");
  return x;
}

double number(const json& obj, const std::string& path, const std::string& key, std::optional<double> fallback = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw SchemaError(join(path, key), "required key missing");
  }
  return as_number(*v, join(path, key));
}

std::size_t count(const json& obj, const std::string& path, const std::string& key, std::optional<std::size_t> fallback = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw SchemaError(join(path, key), "required key missing");
  }
  if (!v->is_number_integer() || v->get<long long>() < 0) {
    throw SchemaError(join(path, key), "expected a nonnegative integer");
  }
  return v->get<std::size_t>();
}

bool boolean(const json& obj, const std::string& path, const std::string& key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw SchemaError(join(path, key), "expected true or false");
  return v->get<bool>();
}

std::string string_of(const json& obj, const std::string& path, const std::string& key, std::optional<std::string> fallback = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw SchemaError(join(path, key), "required key missing");
  }
  if (!v->is_string()) throw SchemaError(join(path, key), "expected a string");
  return v->get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& key) {
  if (!v.is_array()) throw SchemaError(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

void require_increasing(const std::vector<double>& grid, const std::string& key) {
  if (grid.empty()) throw SchemaError(key, "grid must not be empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw SchemaError(key, "grid must be strictly increasing");
  }
}

// Either an explicit array under `key` or {"min", "max", "points"} under `key`_range.
std::vector<double> grid(const json& obj, const std::string& path, const std::string& key) {
  const json* explicit_grid = find(obj, key);
  const json* range = find(obj, key + "_range");
  if (explicit_grid && range) throw SchemaError(join(path, key), "give either " + key + " or " + key + "_range");
  std::vector<double> out;
  if (explicit_grid) {
    out = numbers(*explicit_grid, join(path, key));
  } else if (range) {
    const std::string rp = join(path, key + "_range");
    only_keys(*range, rp, {"min", "max", "points"});
    const double lo = number(*range, rp, "min");
    const double hi = number(*range, rp, "max");
    const std::size_t n = count(*range, rp, "points");
    if (n < 1) throw SchemaError(join(rp, "points"), "must be >= 1");
    if (n > 1 && !(hi > lo)) throw SchemaError(join(rp, "max"), "must exceed min");
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
  } else {
    throw SchemaError(join(path, key), "required key missing (or " + key + "_range)");
  }
  require_increasing(out, join(path, key));
  return out;
}

RealVector vector_of(const json& obj, const std::string& path, const std::string& key) {
  const auto v = numbers(need(obj, path, key), join(path, key));
  return Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ReconstructOptions parse_solver(const json* s, const std::string& path) {
  ReconstructOptions o;
  if (!s) return o;
  only_keys(*s, path, {"tolerance", "max_iterations", "lambda_cap", "newton", "init"});
  o.tolerance = number(*s, path, "tolerance", o.tolerance);
  if (!(o.tolerance > 0.0)) throw SchemaError(join(path, "tolerance"), "must be > 0");
  o.max_iterations = static_cast<int>(count(*s, path, "max_iterations", static_cast<std::size_t>(o.max_iterations)));
  o.lambda_cap = number(*s, path, "lambda_cap", o.lambda_cap);
  if (!(o.lambda_cap > 0.0)) throw SchemaError(join(path, "lambda_cap"), "must be > 0");
  o.newton = boolean(*s, path, "newton", o.newton);
  const std::string init = string_of(*s, path, "init", std::string("global_presolve"));
  if (init == "global_presolve") {
    o.init = InitPolicy::global_presolve;
  } else if (init == "zero") {
    o.init = InitPolicy::zero;
  } else {
    throw SchemaError(join(path, "init"), "expected \"global_presolve\" or \"zero\"");
  }
  return o;
}

Reference parse_reference(const json& r, const std::string& path) {
  Reference ref;
  const std::string type = string_of(r, path, "type");
  if (type == "gibbs") {
    only_keys(r, path, {"type", "alpha", "beta", "tilt", "hopping2"});
    ref.kind = Reference::Kind::gibbs;
    ref.alpha = number(r, path, "alpha");
    ref.beta = number(r, path, "beta");
    ref.tilt = number(r, path, "tilt", 0.0);
    ref.hopping2 = number(r, path, "hopping2", 0.0);
  } else if (type == "random_multipliers") {
    only_keys(r, path, {"type", "alpha", "beta", "amplitude"});
    ref.kind = Reference::Kind::random_multipliers;
    ref.alpha = number(r, path, "alpha");
    ref.beta = number(r, path, "beta");
    ref.amplitude = number(r, path, "amplitude", 0.5);
    if (ref.amplitude < 0.0) throw SchemaError(join(path, "amplitude"), "must be >= 0");
  } else if (type == "fields") {
    only_keys(r, path, {"type", "n", "u", "e"});
    ref.kind = Reference::Kind::fields;
    ref.n = vector_of(r, path, "n");
    ref.u = vector_of(r, path, "u");
    ref.e = vector_of(r, path, "e");
    return ref;
  } else {
    throw SchemaError(join(path, "type"), "expected \"gibbs\", \"random_multipliers\" or \"fields\"");
  }
  if (!(ref.beta > 0.0)) throw SchemaError(join(path, "beta"), "must be > 0");
  if (ref.alpha < 0.0) throw SchemaError(join(path, "alpha"), "must be >= 0");
  return ref;
}

}  // namespace

ScenarioConfig parse_config(const json& config) {
  ScenarioConfig c;
  only_keys(config, "", {"lattice", "fock", "task", "output", "seed"});
  c.echo = config;

  const json& lat = need(config, "", "lattice");
  only_keys(lat, "lattice", {"m", "h", "kappa", "w0", "r0", "tilt"});
  c.lattice.m = count(lat, "lattice", "m");
  if (c.lattice.m < 2) throw SchemaError("lattice.m", "need at least 2 sites");
  c.lattice.h = number(lat, "lattice", "h");
  if (!(c.lattice.h > 0.0)) throw SchemaError("lattice.h", "must be > 0");
  c.lattice.kappa = number(lat, "lattice", "kappa", 0.5);
  if (c.lattice.kappa < 0.0) throw SchemaError("lattice.kappa", "must be >= 0");
  c.lattice.w0 = number(lat, "lattice", "w0", 1.0);
  c.lattice.r0 = number(lat, "lattice", "r0");
  if (c.lattice.r0 < 0.0) throw SchemaError("lattice.r0", "must be >= 0");
  c.lattice.tilt = number(lat, "lattice", "tilt", 0.0);

  const json& fock = need(config, "", "fock");
  only_keys(fock, "fock", {"statistics", "n_max", "dimension_cap"});
  const std::string stats = string_of(fock, "fock", "statistics");
  if (stats == "fermionic") {
    c.fock.statistics = Statistics::fermionic;
  } else if (stats == "bosonic") {
    c.fock.statistics = Statistics::bosonic;
  } else {
    throw SchemaError("fock.statistics", "expected \"fermionic\" or \"bosonic\"");
  }
  c.fock.n_max = count(fock, "fock", "n_max", c.lattice.m);
  if (c.fock.n_max < 1) throw SchemaError("fock.n_max", "must be >= 1");
  c.fock.dimension_cap = count(fock, "fock", "dimension_cap", FockBasis::default_dimension_cap);

  const json& task = need(config, "", "task");
  c.task_name = string_of(task, "task", "type");
  if (c.task_name == "thermo_scan") {
    only_keys(task, "task", {"type", "alphas", "alphas_range", "betas", "betas_range", "allow_negative_alpha"});
    ThermoScanTask t;
    t.allow_negative_alpha = boolean(task, "task", "allow_negative_alpha", false);
    t.alphas = grid(task, "task", "alphas");
    t.betas = grid(task, "task", "betas");
    if (!t.allow_negative_alpha && t.alphas.front() < 0.0) {
      throw SchemaError("task.alphas", "alpha must be >= 0 (set allow_negative_alpha to opt in)");
    }
    if (!(t.betas.front() > 0.0)) throw SchemaError("task.betas", "beta must be > 0");
    c.task = t;
  } else if (c.task_name == "entropy_curve") {
    only_keys(task, "task", {"type", "a", "a_range", "fd_step"});
    EntropyCurveTask t;
    t.a_grid = grid(task, "task", "a");
    if (!(t.a_grid.front() > 0.0)) throw SchemaError("task.a", "energies must be > 0");
    t.fd_step = number(task, "task", "fd_step", t.fd_step);
    if (!(t.fd_step > 0.0 && t.fd_step < 0.5)) throw SchemaError("task.fd_step", "must lie in (0, 0.5)");
    c.task = t;
  } else if (c.task_name == "free_energy_curve") {
    only_keys(task, "task", {"type", "beta", "a", "a_range", "fd_step"});
    FreeEnergyCurveTask t;
    t.beta = number(task, "task", "beta");
    if (!(t.beta > 0.0)) throw SchemaError("task.beta", "must be > 0");
    t.a_grid = grid(task, "task", "a");
    if (!(t.a_grid.front() > 0.0)) throw SchemaError("task.a", "particle numbers must be > 0");
    t.fd_step = number(task, "task", "fd_step", t.fd_step);
    if (!(t.fd_step > 0.0 && t.fd_step < 0.5)) throw SchemaError("task.fd_step", "must lie in (0, 0.5)");
    c.task = t;
  } else if (c.task_name == "reconstruct") {
    only_keys(task, "task", {"type", "reference", "solver"});
    ReconstructTask t;
    t.reference = parse_reference(need(task, "task", "reference"), "task.reference");
    t.options = parse_solver(find(task, "solver"), "task.solver");
    c.task = t;
  } else if (c.task_name == "validate") {
    only_keys(task, "task", {"type", "suites", "random_states"});
    ValidateTask t;
    if (const json* s = find(task, "suites")) {
      if (!s->is_array()) throw SchemaError("task.suites", "expected an array of suite names");
      for (const auto& name : *s) {
        if (!name.is_string()) throw SchemaError("task.suites", "expected suite names");
        const auto& known = suite_names();
        if (std::find(known.begin(), known.end(), name.get<std::string>()) == known.end()) {
          throw SchemaError("task.suites", "unknown suite '" + name.get<std::string>() + "'");
        }
        t.suites.push_back(name.get<std::string>());
      }
    } else {
      t.suites = suite_names();
    }
    t.random_states = static_cast<int>(count(task, "task", "random_states", 20));
    c.task = t;
  } else {
    throw SchemaError("task.type",
                      "expected thermo_scan, entropy_curve, free_energy_curve, reconstruct or validate");
  }

  if (const json* out = find(config, "output")) {
    only_keys(*out, "output", {"directory", "plot_data"});
    c.out_dir = string_of(*out, "output", "directory", c.out_dir);
    c.plot_data = boolean(*out, "output", "plot_data", true);
  }
  if (const json* seed = find(config, "seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0)) {
      throw SchemaError("seed", "expected a nonnegative integer");
    }
    c.seed = seed->get<std::uint64_t>();
  }
  return c;
}

// ---------------------------------------------------------------------------
// execution

namespace {

class Checks {
 public:
  void at_most(const std::string& name, double measured, double tol) {
    add(name, !std::isnan(measured) && measured <= tol, measured, tol);
  }
  void holds(const std::string& name, bool ok) { add(name, ok, ok ? 0.0 : 1.0, 0.0); }
  void add(const std::string& name, bool pass, double measured, double tol) {
    list_.push_back({{"name", name}, {"pass", pass}, {"measured", measured}, {"tolerance", tol}});
    all_ = all_ && pass;
  }
  bool all_pass() const { return all_; }
  const json& list() const { return list_; }

 private:
  json list_ = json::array();
  bool all_ = true;
};

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<std::optional<double>>& values) {
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) line += ',';
      if (values[i]) line += format17(*values[i]);
    }
    rows_.push_back(std::move(line));
  }
  bool empty() const { return rows_.empty(); }
  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += '\n';
    for (const auto& r : rows_) out += r + '\n';
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

struct Output {
  std::string name;
  std::string text;
  bool empty = false;
};

struct Prepared {
  LatticeSpec spec;
  BasisPtr basis;
  FockOperator hamiltonian;
  FockOperator number;
  std::optional<ThermoModel> model;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

std::string plot_text(const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::string out = "# " + header + '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? " " : "") + format17(r[i]);
    out += '\n';
  }
  return out;
}

// ---- thermo_scan

void run_thermo_scan(const ThermoScanTask& t, const ScenarioConfig& cfg, Prepared& p,
                     std::vector<Output>& outputs, Checks& checks) {
  const auto scan = thermo_scan(*p.model, t.alphas, t.betas);
  Table table({"alpha", "beta", "log_z", "N", "E", "S", "fd_N", "fd_E"});
  double identity = 0.0;
  bool n_decreasing = true, e_decreasing = true;
  for (std::size_t ia = 0; ia < t.alphas.size(); ++ia) {
    for (std::size_t ib = 0; ib < t.betas.size(); ++ib) {
      const auto& row = scan.at(ia, ib);
      const auto& s = row.summary;
      table.row({s.alpha, s.beta, s.log_z, s.particles, s.energy, s.entropy, row.fd_particles, row.fd_energy});
      const double closed = -s.beta * s.energy - s.alpha * s.particles - s.log_z;
      identity = std::max(identity, std::abs(entropy(p.model->state(s.alpha, s.beta)) - closed) /
                                        std::max(1.0, std::abs(closed)));
      if (ia > 0) n_decreasing = n_decreasing && s.particles < scan.at(ia - 1, ib).summary.particles;
      if (ib > 0) e_decreasing = e_decreasing && s.energy < scan.at(ia, ib - 1).summary.energy;
    }
  }
  checks.at_most("S = -beta E - alpha N - log Z", identity, 1e-8);
  if (t.alphas.size() > 1) checks.holds("N strictly decreasing in alpha", n_decreasing);
  if (t.betas.size() > 1) checks.holds("E strictly decreasing in beta", e_decreasing);
  outputs.push_back({"thermo_scan.csv", table.text(), table.empty()});
  if (cfg.plot_data) {
    for (std::size_t ib = 0; ib < t.betas.size(); ++ib) {
      std::vector<std::vector<double>> rows;
      for (std::size_t ia = 0; ia < t.alphas.size(); ++ia) rows.push_back({t.alphas[ia], scan.at(ia, ib).summary.particles});
      outputs.push_back({"plot_N_alpha_beta" + std::to_string(ib) + ".dat",
                         plot_text("alpha N  (beta = " + format17(t.betas[ib]) + ")", rows), rows.empty()});
    }
  }
}

// ---- curves

void run_entropy_curve(const EntropyCurveTask& t, const ScenarioConfig& cfg, Prepared& p,
                       std::vector<Output>& outputs, Checks& checks) {
  const auto rows = entropy_curve(*p.model, t.a_grid, t.fd_step);
  Table table({"a", "beta0", "f", "S_check", "fd_slope"});
  std::vector<std::vector<double>> plot;
  double worst_s = 0.0, worst_slope = 0.0;
  bool decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    table.row({r.a, r.beta0, r.f, r.s_check, r.fd_slope});
    plot.push_back({r.a, r.f});
    worst_s = std::max(worst_s, std::abs(r.f - r.s_check));
    if (r.fd_slope) worst_slope = std::max(worst_slope, rel(*r.fd_slope, -r.beta0));
    if (i > 0) decreasing = decreasing && r.f < rows[i - 1].f;
  }
  checks.at_most("|f - S(rho)|", worst_s, 1e-8);
  checks.at_most("df/da vs -beta0 (rel)", worst_slope, 1e-4);
  checks.holds("f strictly decreasing", decreasing);
  outputs.push_back({"entropy_curve.csv", table.text(), table.empty()});
  if (cfg.plot_data) outputs.push_back({"plot_f.dat", plot_text("a f", plot), plot.empty()});
}

void run_free_energy_curve(const FreeEnergyCurveTask& t, const ScenarioConfig& cfg, Prepared& p,
                           std::vector<Output>& outputs, Checks& checks) {
  const auto rows = free_energy_curve(*p.model, t.beta, t.a_grid, t.fd_step);
  Table table({"a", "alpha0", "g", "F_check", "fd_slope"});
  std::vector<std::vector<double>> plot;
  double worst_f = 0.0, worst_slope = 0.0;
  bool decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    table.row({r.a, r.alpha0, r.g, r.f_check, r.fd_slope});
    plot.push_back({r.a, r.g});
    worst_f = std::max(worst_f, std::abs(r.g - r.f_check));
    if (r.fd_slope) worst_slope = std::max(worst_slope, rel(*r.fd_slope, -r.alpha0));
    if (i > 0) decreasing = decreasing && r.g < rows[i - 1].g;
  }
  checks.at_most("|g - (S/beta + E)|", worst_f, 1e-8);
  checks.at_most("d(beta g)/da vs -alpha0 (rel)", worst_slope, 1e-4);
  checks.holds("g strictly decreasing", decreasing);
  outputs.push_back({"free_energy_curve.csv", table.text(), table.empty()});
  if (cfg.plot_data) outputs.push_back({"plot_g.dat", plot_text("a g", plot), plot.empty()});
}

// ---- reconstruct

std::optional<DensityMatrix> reference_state(const Reference& ref, const ScenarioConfig& cfg, Prepared& p,
                                             const ConstraintOperators& ops) {
  switch (ref.kind) {
    case Reference::Kind::gibbs: {
      FockOperator h = ref.tilt != 0.0 ? build_hamiltonian(p.spec.tilted(ref.tilt), p.basis) : p.hamiltonian;
      if (ref.hopping2 != 0.0) {
        const auto m = static_cast<Eigen::Index>(p.spec.m);
        ComplexMatrix a = ComplexMatrix::Zero(m, m);
        for (Eigen::Index i = 0; i + 2 < m; ++i) a(i, i + 2) = a(i + 2, i) = ref.hopping2;
        h = h + second_quantize_onebody({a, OperatorKind::general}, p.basis);
      }
      return gibbs_state(h, p.number, ref.alpha, ref.beta).first;
    }
    case Reference::Kind::random_multipliers: {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> unif(-ref.amplitude, ref.amplitude);
      auto lambda = MultiplierFields::uniform(p.spec.m, ref.alpha, ref.beta);
      for (auto& v : lambda.lam_n) v += unif(rng);
      for (auto& v : lambda.lam_u) v += unif(rng);
      for (auto& v : lambda.lam_e) v += std::min(unif(rng), 0.5 * ref.beta);
      const Spectrum s = diagonalize(ops.dual_hamiltonian(lambda));
      RealVector w = (-(s.energies.array() - s.energies.minCoeff())).exp();
      w /= w.sum();
      return DensityMatrix::from_spectral(p.basis, s.vectors, w);
    }
    case Reference::Kind::fields:
      return std::nullopt;
  }
  return std::nullopt;
}

Table fields_table(const LatticeSpec& spec, const MomentFields& f) {
  Table t({"site", "x", "n", "u", "k_site", "e_P", "e_I", "e"});
  for (Eigen::Index i = 0; i < f.n.size(); ++i) {
    std::optional<double> u;
    if (i < f.u.size()) u = f.u[i];
    std::optional<double> k_site, e_p, e_i;
    if (f.k_site.size() > 0) k_site = f.k_site[i];
    if (f.e_p.size() > 0) e_p = f.e_p[i];
    if (f.e_i.size() > 0) e_i = f.e_i[i];
    t.row({static_cast<double>(i), spec.x(static_cast<std::size_t>(i)), f.n[i], u, k_site, e_p, e_i, f.e[i]});
  }
  return t;
}

void run_reconstruct(const ReconstructTask& t, const ScenarioConfig& cfg, Prepared& p,
                     std::vector<Output>& outputs, Checks& checks, json& extra) {
  const ConstraintOperators ops(p.spec, p.basis);
  const auto ref = reference_state(t.reference, cfg, p, ops);
  MomentFields targets;
  if (ref) {
    targets = moment_fields(*ref, p.spec);
  } else {
    targets.n = t.reference.n;
    targets.u = t.reference.u;
    targets.e = t.reference.e;
  }
  const DualState out = local_gibbs_reconstruct(ops, targets, t.options);
  const double h = p.spec.h;
  const double s_star = entropy(out.rho);

  checks.at_most("residual max-norm", out.residual_norm, t.options.tolerance);
  double drop = 0.0;
  for (std::size_t i = 1; i < out.trace.size(); ++i) {
    drop = std::max(drop, (out.trace[i - 1].dual_value - out.trace[i].dual_value) /
                              std::max(1.0, std::abs(out.trace[i - 1].dual_value)));
  }
  checks.at_most("dual ascent monotone (largest relative drop)", drop, 1e-12);
  const RealVector lam = out.lambda.flatten();
  const double duality = s_star + h * lam.dot(ConstraintOperators::flatten(out.achieved)) + out.log_z;
  checks.at_most("|S + h<lambda, F(rho)> + log Z|", std::abs(duality), 1e-8);
  extra["entropy"] = s_star;
  extra["dual_value"] = out.dual_value;
  extra["iterations"] = out.iterations;
  extra["residual_norm"] = out.residual_norm;
  if (ref) {
    const double s_ref = entropy(*ref);
    // S(rho*) - S(ref) <= h <lambda, targets - F(rho*)> by the Gibbs variational principle
    const double slack = h * (lam.cwiseProduct(ConstraintOperators::flatten(out.residual))).cwiseAbs().sum();
    checks.at_most("S(rho*) - S(ref)", s_star - s_ref, 1e-8 + slack);
    extra["reference_entropy"] = s_ref;
    extra["relative_entropy_ref_star"] = relative_entropy(*ref, out.rho);
    extra["trace_distance_ref_star"] = trace_distance(*ref, out.rho);
  }

  outputs.push_back({"fields_target.csv", fields_table(p.spec, targets).text(), false});
  outputs.push_back({"fields_achieved.csv", fields_table(p.spec, out.achieved).text(), false});
  Table mult({"index", "lam_n", "lam_u", "lam_e"});
  for (Eigen::Index i = 0; i < out.lambda.lam_n.size(); ++i) {
    std::optional<double> u;
    if (i < out.lambda.lam_u.size()) u = out.lambda.lam_u[i];
    mult.row({static_cast<double>(i), out.lambda.lam_n[i], u, out.lambda.lam_e[i]});
  }
  outputs.push_back({"multipliers.csv", mult.text(), false});
  Table trace({"iteration", "dual_value", "residual_norm", "step", "newton"});
  for (const auto& r : out.trace) {
    trace.row({static_cast<double>(r.iteration), r.dual_value, r.residual_norm, r.step, r.newton ? 1.0 : 0.0});
  }
  outputs.push_back({"trace.csv", trace.text(), trace.empty()});

  if (cfg.plot_data) {
    std::vector<std::vector<double>> pn, pu, pe;
    for (Eigen::Index i = 0; i < targets.n.size(); ++i) {
      const double x = p.spec.x(static_cast<std::size_t>(i));
      pn.push_back({x, targets.n[i], out.achieved.n[i]});
      pe.push_back({x, targets.e[i], out.achieved.e[i]});
      if (i < targets.u.size()) pu.push_back({x + 0.5 * h, targets.u[i], out.achieved.u[i]});
    }
    outputs.push_back({"plot_n.dat", plot_text("x n_target n_achieved", pn), pn.empty()});
    outputs.push_back({"plot_u.dat", plot_text("x_edge u_target u_achieved", pu), pu.empty()});
    outputs.push_back({"plot_e.dat", plot_text("x e_target e_achieved", pe), pe.empty()});
  }
}

// ---- validate

void run_validate(const ValidateTask& t, const ScenarioConfig& cfg, Prepared& p,
                  std::vector<Output>& outputs, Checks& checks, std::ostream& log) {
  // invariants on the configured instance
  std::mt19937_64 rng(cfg.seed);
  const auto cert = certify_stability(p.spec, p.basis);
  const auto hc = build_confined_hamiltonian(p.spec, p.basis);
  const auto rhs = hc + p.number;
  double psd = 0.0;
  for (const auto& sector : p.basis->sectors()) {
    if (sector.particles == 0) continue;
    const ComplexMatrix gap = p.hamiltonian.sector_block(sector) - cert.gamma * rhs.sector_block(sector);
    psd = std::max(psd, -Eigen::SelfAdjointEigenSolver<ComplexMatrix>(gap, Eigen::EigenvaluesOnly).eigenvalues().minCoeff());
  }
  checks.at_most("instance: -min eig(H_n - gamma (Hc_n + n))", psd, 1e-10);

  std::vector<DensityMatrix> states;
  for (int i = 0; i < t.random_states; ++i) states.push_back(random_state(p.basis, rng, i % 2 ? 1 + i % 5 : 0));
  double identity = 0.0;
  for (double alpha : {0.0, 0.5, 1.0}) {
    for (double beta : {0.5, 1.0, 2.0}) {
      const auto s = p.model->summary(alpha, beta);
      const double closed = -beta * s.energy - alpha * s.particles - s.log_z;
      states.push_back(p.model->state(alpha, beta));
      identity = std::max(identity, std::abs(entropy(states.back()) - closed) / std::max(1.0, std::abs(closed)));
    }
  }
  checks.at_most("instance: Gibbs entropy identity", identity, 1e-8);

  const ComplexMatrix h0 = build_laplacian(p.spec).matrix;
  const auto m = static_cast<Eigen::Index>(p.spec.m);
  double kin = 0.0, sum_n = 0.0, sum_e = 0.0, dual = 0.0, bound = -1.0;
  std::normal_distribution<double> g;
  for (const auto& rho : states) {
    const auto rho1 = one_particle_dm(rho);
    const auto f = moment_fields(rho1, pair_density(rho), p.spec);
    kin = std::max(kin, rel(p.spec.h * f.k.sum(), (h0 * rho1.matrix).trace().real()));
    sum_n = std::max(sum_n, rel(p.spec.h * f.n.sum(), rho.expectation(p.number)));
    sum_e = std::max(sum_e, rel(p.spec.h * f.e.sum(), rho.expectation(p.hamiltonian)));
    for (int k = 0; k < 10; ++k) {
      ComplexMatrix a(m, m);
      for (auto& z : a.reshaped()) z = Complex(g(rng), g(rng));
      a = 0.5 * (a + a.adjoint()).eval();
      const double norm = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(a, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
      const auto big = second_quantize_onebody({a, OperatorKind::general}, p.basis);
      dual = std::max(dual, std::abs((a * rho1.matrix).trace().real() - rho.expectation(big)) / norm);
    }
    for (double beta : {0.5, 1.0, 2.0}) {
      const auto b = entropy_lower_bound_check(rho, hc, beta);
      bound = std::max(bound, b.rhs - b.lhs);
    }
  }
  checks.at_most("instance: kinetic trace identity (rel)", kin, 1e-10);
  checks.at_most("instance: h sum n = Tr(N rho) (rel)", sum_n, 1e-10);
  checks.at_most("instance: h sum e = Tr(H rho) (rel)", sum_e, 1e-10);
  checks.at_most("instance: rho1 duality / |A|", dual, 1e-10);
  checks.at_most("instance: entropy bound deficit", bound, 1e-9);

  // named acceptance suites on their fixed instances
  ValidationOptions vo;
  vo.seed = cfg.seed;
  Table table({"index", "pass", "seconds"});
  for (const auto& name : t.suites) {
    const auto r = run_suite(name, vo);
    log << (r.pass ? "PASS " : "FAIL ") << r.name << '\n';
    for (const auto& c : r.checks) checks.add("suite " + r.name + ": " + c.name, c.pass, c.measured, c.tolerance);
    table.row({static_cast<double>(r.index), r.pass ? 1.0 : 0.0, r.seconds});
  }
  outputs.push_back({"validate.csv", table.text(), table.empty()});
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, std::ostream& log) {
  RunResult result;
  json& report = result.report;
  report["config"] = cfg.echo;
  report["seed"] = cfg.seed;
  report["task"] = cfg.task_name;
  json timings = json::object();
  json warnings = json::array();

  // prepare: nothing is written if this fails
  auto t0 = std::chrono::steady_clock::now();
  Prepared p;
  try {
    p.spec = cfg.lattice.spec();
    p.spec.validate();
    p.basis = FockBasis::enumerate(cfg.fock.statistics, p.spec.m, cfg.fock.n_max, cfg.fock.dimension_cap);
    p.hamiltonian = build_hamiltonian(p.spec, p.basis);
    p.number = number_operator(p.basis);
    GibbsOptions go;
    if (auto* ts = std::get_if<ThermoScanTask>(&cfg.task)) go.allow_negative_alpha = ts->allow_negative_alpha;
    p.model.emplace(p.hamiltonian, p.number, go);

    if (auto* ec = std::get_if<EntropyCurveTask>(&cfg.task)) {
      const double lo = p.model->spectrum().energies.minCoeff();
      const double hi = p.model->energy_upper_limit();
      const double d = ec->fd_step;
      if (!(ec->a_grid.front() * (1 - d) > lo) || !(ec->a_grid.back() * (1 + d) < hi)) {
        throw SchemaError("task.a", "energies must lie inside the attainable range (" + format17(lo) + ", " +
                                        format17(hi) + ") including the finite-difference margin");
      }
    }
    if (auto* fc = std::get_if<FreeEnergyCurveTask>(&cfg.task)) {
      const double n0 = p.model->particles(0.0, fc->beta);
      if (fc->a_grid.back() > n0) {
        throw SchemaError("task.beta", "beta too large: N(0, beta) = " + format17(n0) +
                                           " is below the largest requested a; lower beta");
      }
    }
    if (auto* rc = std::get_if<ReconstructTask>(&cfg.task)) {
      const auto& r = rc->reference;
      if (r.kind == Reference::Kind::fields) {
        if (r.n.size() != static_cast<Eigen::Index>(p.spec.m) || r.e.size() != r.n.size() ||
            r.u.size() + 1 != r.n.size()) {
          throw SchemaError("task.reference", "need m values for n and e and m - 1 for u");
        }
        if (r.n.minCoeff() < 0.0) throw SchemaError("task.reference.n", "density must be >= 0");
      }
      if (r.kind == Reference::Kind::gibbs && r.tilt != 0.0) (void)build_hamiltonian(p.spec.tilted(r.tilt), p.basis);
    }
  } catch (const SchemaError& e) {
    log << "schema error: " << e.what() << '\n';
    report["status"] = "schema_error";
    report["error"] = {{"key", e.key()}, {"message", e.what()}};
    result.exit_code = exit_schema;
    return result;
  } catch (const DimensionCapExceeded& e) {
    log << "dimension cap exceeded: " << e.what() << '\n';
    report["status"] = "dimension_cap_exceeded";
    report["error"] = {{"message", e.what()}};
    result.exit_code = exit_dimension;
    return result;
  } catch (const Error& e) {
    // invalid lattice data or r0 <= C0
    log << "invalid scenario: " << e.what() << '\n';
    report["status"] = "schema_error";
    report["error"] = {{"key", "lattice"}, {"message", e.what()}};
    result.exit_code = exit_schema;
    return result;
  }
  timings["prepare"] = seconds_since(t0);
  report["instance"] = {{"m", p.spec.m},
                        {"h", p.spec.h},
                        {"statistics", std::string(to_string(cfg.fock.statistics))},
                        {"n_max", p.basis->n_max()},
                        {"dimension", p.basis->dimension()}};

  // compute
  t0 = std::chrono::steady_clock::now();
  std::vector<Output> outputs;
  Checks checks;
  json extra = json::object();
  try {
    std::visit(
        [&](const auto& task) {
          using T = std::decay_t<decltype(task)>;
          if constexpr (std::is_same_v<T, ThermoScanTask>) run_thermo_scan(task, cfg, p, outputs, checks);
          if constexpr (std::is_same_v<T, EntropyCurveTask>) run_entropy_curve(task, cfg, p, outputs, checks);
          if constexpr (std::is_same_v<T, FreeEnergyCurveTask>) run_free_energy_curve(task, cfg, p, outputs, checks);
          if constexpr (std::is_same_v<T, ReconstructTask>) run_reconstruct(task, cfg, p, outputs, checks, extra);
          if constexpr (std::is_same_v<T, ValidateTask>) run_validate(task, cfg, p, outputs, checks, log);
        },
        cfg.task);
    result.exit_code = checks.all_pass() ? exit_ok : exit_failed_check;
    report["status"] = checks.all_pass() ? "ok" : "failed_check";
  } catch (const ConvergenceError& e) {
    log << "no convergence: " << e.what() << '\n';
    report["status"] = "no_convergence";
    report["error"] = {{"message", e.what()}, {"residual", e.residual()}, {"iterations", e.iterations()}};
    result.exit_code = exit_convergence;
  } catch (const RangeError& e) {
    log << "range error: " << e.what() << '\n';
    report["status"] = "schema_error";
    report["error"] = {{"message", e.what()}, {"lower", e.lower()}, {"upper", e.upper()}};
    result.exit_code = exit_schema;
  }
  timings["compute"] = seconds_since(t0);
  report["checks"] = checks.list();
  if (!extra.empty()) report["result"] = extra;

  // write
  t0 = std::chrono::steady_clock::now();
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  for (const auto& o : outputs) {
    if (o.empty) {
      warnings.push_back("empty table, " + o.name + " not written");
      continue;
    }
    write_file(dir / o.name, o.text);
    result.files.push_back(o.name);
  }
  timings["write"] = seconds_since(t0);
  report["timings_seconds"] = timings;
  report["warnings"] = warnings;
  report["files"] = result.files;
  write_file(dir / "report.json", report.dump(2) + "\n");
  result.files.push_back("report.json");
  return result;
}

}  // namespace locgibbs::cli
