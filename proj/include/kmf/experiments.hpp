#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <atomic>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kmf/bergman.hpp"
#include "kmf/envelopes.hpp"
#include "kmf/fields.hpp"
#include "kmf/functionals.hpp"
#include "kmf/hormander.hpp"
#include "kmf/io.hpp"
#include "kmf/mobius.hpp"
#include "kmf/solvers.hpp"
#include "kmf/torsion.hpp"

namespace kmf {

inline constexpr const char* kToolVersion = "1.0.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// flat key-value configuration with [sections]; keys are "section.key"
class Config {
 public:
  static Config parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (section.empty()) throw ConfigError("config: key '" + key + "' outside any [section]");
      cfg.kv_[section + "." + key] = val;
    }
    return cfg;
  }

  static Config parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config field '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }
  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }
  int get_int(const std::string& key) const {
    return static_cast<int>(std::llround(get_double(key)));
  }
  int get_int(const std::string& key, int dflt) const { return has(key) ? get_int(key) : dflt; }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    std::string item;
    std::istringstream in(get_string(key));
    while (std::getline(in, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
  }
  std::vector<double> get_list(const std::string& key, std::vector<double> dflt) const {
    return has(key) ? get_list(key) : dflt;
  }

  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  std::string echo() const {  // canonical sorted form, re-parsable
    std::string cur_section;
    std::string out;
    for (const auto& [k, v] : kv_) {
      const auto dot = k.find('.');
      const std::string sec = k.substr(0, dot);
      if (sec != cur_section) {
        out += "[" + sec + "]\n";
        cur_section = sec;
      }
      out += k.substr(dot + 1) + " = " + v + "\n";
    }
    return out;
  }

 private:
  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  }
  static double to_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config field '" + key + "': cannot parse number from '" + v + "'");
    }
  }

  std::map<std::string, std::string> kv_;
};

struct RunOptions {
  std::string output_dir;  // overrides [output] dir when nonempty
  int threads = 1;
  std::optional<std::uint64_t> seed_override;
};

namespace detail {

inline void parallel_rows(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

inline SurfacePtr surface_from(const Config& cfg) {
  const std::string kind = cfg.get_string("surface.kind", "sphere");
  if (kind == "sphere")
    return build_sphere(cfg.get_int("surface.n_theta", 64), cfg.get_int("surface.n_phi", 128));
  if (kind == "torus")
    return build_torus({cfg.get_double("surface.tau_re", 0.0), cfg.get_double("surface.tau_im", 1.0)},
                       cfg.get_int("surface.n", 64));
  throw ConfigError("surface.kind must be 'sphere' or 'torus'");
}

inline Mobius random_mobius(Rng& rng, double spread) {
  auto cplx = [&] { return std::complex<double>(rng.normal(), rng.normal()) * spread; };
  Mobius F{1.0 + cplx(), cplx(), cplx(), 1.0 + cplx()};
  if (std::abs(F.det()) < 0.1) F = Mobius{};  // keep well-conditioned
  return F;
}

inline void write_manifest(const std::filesystem::path& dir, const Config& cfg,
                           std::uint64_t seed, int threads) {
  std::ofstream out(dir / "manifest.txt");
  out << "kmf experiment manifest\n"
      << "tool-version: " << kToolVersion << "\n"
      << "seed: " << seed << "\n"
      << "threads: " << threads << "\n"
      << "config:\n"
      << cfg.echo();
}

inline void write_plotdata(const std::filesystem::path& path, const std::vector<double>& x,
                           const std::vector<double>& y) {
  std::ofstream out(path);
  out << std::setprecision(17);
  for (size_t i = 0; i < x.size(); ++i) out << x[i] << " " << y[i] << "\n";
}

}  // namespace detail

// --- experiments ----------------------------------------------------------------

namespace experiments {

struct Context {
  Config cfg;
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  int threads = 1;
};

inline void verify_mto(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto b = make_sphere_bundle(s, 2);
  const int count = ctx.cfg.get_int("fields.count", 100);
  const int band = ctx.cfg.get_int("fields.band", 12);
  const double amp = ctx.cfg.get_double("fields.amplitude", 1.3);
  const int n_orbit = ctx.cfg.get_int("fields.moebius_count", 10);

  struct Row {
    std::string kind;
    double lhs, rhs, margin;
  };
  std::vector<Row> rows(count + 1 + n_orbit);
  auto eval = [&](const Potential& u, const std::string& kind, int slot) {
    double lse = 0.0;
    for (int i = 0; i < s->num_nodes(); ++i) lse += s->quad[i] * std::exp(-u.values[i]);
    const double lhs = std::log(lse);
    const double rhs = -integrate(s, u) + 0.25 * dirichlet(s, u, u);
    rows[slot] = {kind, lhs, rhs, rhs - lhs};
  };
  detail::parallel_rows(count, ctx.threads, [&](int i) {
    Rng rng(ctx.seed + i);
    eval(random_bandlimited(s, rng, band, amp), "random", i);
  });
  eval(constant_potential(s, 0.0), "zero", count);
  detail::parallel_rows(n_orbit, ctx.threads, [&](int i) {
    Rng rng(ctx.seed + 90000 + i);
    auto F = detail::random_mobius(rng, 0.25);
    eval(mobius_pullback(s, constant_potential(s, 0.0), F, 2), "moebius", count + 1 + i);
  });

  CsvWriter csv(ctx.dir / "margins.csv", {"case", "kind", "lhs", "rhs", "margin"});
  std::vector<double> xs, ys;
  double min_margin = 1e300, max_abs_equality = 0.0;
  for (size_t i = 0; i < rows.size(); ++i) {
    csv.row(i, rows[i].kind, rows[i].lhs, rows[i].rhs, rows[i].margin);
    xs.push_back(static_cast<double>(i));
    ys.push_back(rows[i].margin);
    if (rows[i].kind == "random") min_margin = std::min(min_margin, rows[i].margin);
    else max_abs_equality = std::max(max_abs_equality, std::abs(rows[i].margin));
  }
  detail::write_plotdata(ctx.dir / "margin_vs_case.dat", xs, ys);
  CsvWriter sum(ctx.dir / "summary.csv", {"min_margin_random", "max_abs_margin_equality_cases"});
  sum.row(min_margin, max_abs_equality);
}

inline void verify_fang(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  const int count = ctx.cfg.get_int("fields.count", 50);
  const int band = ctx.cfg.get_int("fields.band", 10);
  const double amp = ctx.cfg.get_double("fields.amplitude", 1.0);
  const int m_max = ctx.cfg.get_int("bundle.m_max", 8);

  CsvWriter csv(ctx.dir / "margins.csv",
                {"m", "case", "margin_functional", "margin_determinant", "rhs_nonpositive"});
  std::vector<double> xs, ys;
  for (int m = 0; m <= m_max; ++m) {
    auto b = make_sphere_bundle(s, m + 2);
    std::vector<double> mf(count), md(count);
    std::vector<int> rnp(count);
    detail::parallel_rows(count, ctx.threads, [&](int i) {
      Rng rng(ctx.seed + 1000 * m + i);
      auto u = random_bandlimited(s, rng, band, amp);
      auto out = fang_check(s, m, u);
      mf[i] = -(m + 1) * functional_F(b, u);  // the sharp functional margin
      md[i] = out.margin;
      rnp[i] = out.rhs_nonpositive ? 1 : 0;
    });
    double worst = 1e300;
    for (int i = 0; i < count; ++i) {
      csv.row(m, i, mf[i], md[i], rnp[i]);
      worst = std::min(worst, std::min(mf[i], md[i]));
    }
    xs.push_back(m);
    ys.push_back(worst);
  }
  detail::write_plotdata(ctx.dir / "min_margin_vs_m.dat", xs, ys);
}

inline void geodesic_profile(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto b = make_sphere_bundle(s, ctx.cfg.get_int("bundle.degree", 3));
  auto u0 = scale_to_psh(s,
                         zonal_bump(s, ctx.cfg.get_double("fields.center0", 0.35),
                                    ctx.cfg.get_double("fields.width0", 0.5),
                                    ctx.cfg.get_double("fields.height0", 1.0)),
                         b->V(), 0.05);
  auto u1 = scale_to_psh(s,
                         zonal_bump(s, ctx.cfg.get_double("fields.center1", -0.25),
                                    ctx.cfg.get_double("fields.width1", 0.55),
                                    ctx.cfg.get_double("fields.height1", -0.8)),
                         b->V(), 0.05);
  const int K = ctx.cfg.get_int("solver.time_samples", 13);

  const std::pair<const char*, GeodesicMethod> methods[] = {
      {"envelope", GeodesicMethod::envelope}, {"legendre", GeodesicMethod::legendre}};
  for (const auto& [name, method] : methods) {
    auto path = geodesic(b, u0, u1, K, method);
    auto rows = path_profile(b, path);
    const auto pdir = ctx.dir / (std::string("path_") + name);
    std::filesystem::create_directories(pdir);
    CsvWriter csv(pdir / "diagnostics.csv",
                  {"t", "E", "J", "I", "L", "F", "defect_max", "masked_fraction"});
    std::vector<double> xs, ys;
    for (int k = 0; k < path.steps(); ++k) {
      const auto& r = rows[k];
      csv.row(r.t, r.E, r.J, r.I, r.L, r.F, r.defect_max, r.masked_fraction);
      save_field_text(pdir / ("potential_" + std::to_string(k) + ".txt"),
                      path.samples[k].values);
      xs.push_back(r.t);
      ys.push_back(r.E);
    }
    detail::write_plotdata(ctx.dir / (std::string("energy_vs_t_") + name + ".dat"), xs, ys);
  }
}

inline void envelope_tests(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto b = s->kind == SurfaceKind::sphere
               ? make_sphere_bundle(s, ctx.cfg.get_int("bundle.degree", 3))
               : make_torus_bundle(s, ctx.cfg.get_int("bundle.marked_node", 0));
  const int count = ctx.cfg.get_int("fields.count", 50);
  const int band = ctx.cfg.get_int("fields.band", 8);
  const double amp = ctx.cfg.get_double("fields.amplitude", 1.4);
  auto op = build_dirichlet_operator(s);

  CsvWriter csv(ctx.dir / "projection.csv",
                {"case", "idempotence_error", "monotonicity_violation", "contact_pairing",
                 "F_u", "F_Pu", "F_gain"});
  for (int i = 0; i < count; ++i) {
    Rng rng(ctx.seed + i);
    auto u = random_bandlimited(s, rng, band, amp);
    auto rep = project_psh_report(op, u, 1e-10, 40000, nullptr, b->V());
    auto rep2 = project_psh_report(op, rep.result, 1e-10, 40000, nullptr, b->V());
    const double idem = (rep2.result.values - rep.result.values).cwiseAbs().maxCoeff();
    double mono = 0.0;
    if (s->kind == SurfaceKind::sphere) {
      Potential v{s, u.values + zonal_bump(s, -0.1, 0.4, 0.6).values.cwiseAbs()};
      const Eigen::VectorXd pv =
          project_psh_report(op, v, 1e-10, 40000, nullptr, b->V()).result.values;
      mono = std::max(0.0, (rep.result.values - pv).maxCoeff());
    }
    const Eigen::VectorXd mu = envelope_measure(op, b->V(), rep.result);
    const double contact = mu.dot(u.values - rep.result.values);
    const double fu = functional_F(b, u);
    const double fpu = functional_F(b, rep.result);
    csv.row(i, idem, mono, contact, fu, fpu, fpu - fu);
  }
}

inline void solve_critical(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto b = make_sphere_bundle(s, ctx.cfg.get_int("bundle.degree", 4));
  const int starts = ctx.cfg.get_int("solver.starts", 10);
  const double amp = ctx.cfg.get_double("fields.amplitude", 0.35);
  const double tol = ctx.cfg.get_double("solver.tol", 1e-9);

  std::ofstream jsonl(ctx.dir / "reports.jsonl");
  CsvWriter csv(ctx.dir / "solves.csv",
                {"start", "converged", "residual", "iterations", "F_value"});
  for (int i = 0; i < starts; ++i) {
    Rng rng(ctx.seed + i);
    auto u0 = random_bandlimited(s, rng, 6, amp);
    auto rep = solve_critical_sphere(b, u0, tol);
    const double fval = functional_F(b, rep.solution);
    const std::string fname = "solution_" + std::to_string(i) + ".txt";
    save_field_text(ctx.dir / fname, rep.solution.values);
    nlohmann::json j{{"start", i},
                     {"seed", ctx.seed + i},
                     {"converged", rep.converged},
                     {"residual", rep.residual},
                     {"iterations", rep.iterations},
                     {"F_value", fval},
                     {"normalization", rep.normalization},
                     {"solution_file", fname}};
    jsonl << j.dump() << "\n";
    csv.row(i, rep.converged ? 1 : 0, rep.residual, rep.iterations, fval);
  }
}

inline void mean_field_continuation(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  if (s->kind != SurfaceKind::torus) throw ConfigError("mean-field-continuation needs a torus");
  const int node = ctx.cfg.get_int("bundle.marked_node", s->n / 2 * s->n + s->n / 4);
  auto etas_over = ctx.cfg.get_list("solver.eta_over_4pi_list",
                                    {0.25, 0.5, 0.75, 1.0, 1.0 + 0.5 / (4.0 * M_PI)});
  std::vector<double> grid;
  for (double e : etas_over) grid.push_back(4.0 * M_PI * e);
  auto rows = continuation_in_eta(s, node, grid, ctx.cfg.get_double("solver.tol", 1e-9));
  CsvWriter csv(ctx.dir / "continuation.csv",
                {"eta", "eta_over_4pi", "residual", "min_eig", "iterations", "converged"});
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    csv.row(r.eta, r.eta / (4.0 * M_PI), r.residual, r.min_eig, r.iterations,
            r.converged ? 1 : 0);
    xs.push_back(r.eta / (4.0 * M_PI));
    ys.push_back(r.min_eig);
  }
  detail::write_plotdata(ctx.dir / "min_eig_vs_eta.dat", xs, ys);
}

inline void coulomb_mc(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto b = make_sphere_bundle(s, ctx.cfg.get_int("bundle.degree", 4));
  const int count = ctx.cfg.get_int("fields.count", 5);
  const int n_samples = ctx.cfg.get_int("solver.n_samples", 6000);

  std::ofstream jsonl(ctx.dir / "records.jsonl");
  CsvWriter csv(ctx.dir / "estimates.csv",
                {"case", "estimate", "stderr", "gram_value", "abs_error", "sigmas",
                 "acceptance", "n_samples", "seed"});
  for (int i = 0; i < count; ++i) {
    Rng rng(ctx.seed + i);
    auto u = random_bandlimited(s, rng, 6, 0.5);
    auto mc = mc_estimate_L(b, u, n_samples, ctx.seed + 500 + i);
    const double lg = functional_L(b, u);
    const double err = std::abs(mc.estimate - lg);
    csv.row(i, mc.estimate, mc.stderr_, lg, err, mc.stderr_ > 0 ? err / mc.stderr_ : 0.0,
            mc.acceptance, mc.n_samples, mc.seed);
    nlohmann::json j{{"case", i},          {"estimate", mc.estimate},
                     {"stderr", mc.stderr_}, {"gram_value", lg},
                     {"acceptance", mc.acceptance}, {"n_samples", mc.n_samples},
                     {"seed", mc.seed},     {"mixing_ok", mc.mixing_ok}};
    jsonl << j.dump() << "\n";
  }
}

inline void torsion_table(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  const int count = ctx.cfg.get_int("fields.count", 12);
  BundlePtr b = s->kind == SurfaceKind::sphere
                    ? make_sphere_bundle(s, ctx.cfg.get_int("bundle.degree", 4))
                    : make_torus_bundle(s, ctx.cfg.get_int("bundle.marked_node", 0));
  std::ofstream jsonl(ctx.dir / "records.jsonl");
  // the full scalar functional family per test field, plus the torsion record
  CsvWriter csv(ctx.dir / "torsion.csv",
                {"case", "E", "J", "I", "L", "F", "entropy_S", "bergman_ratio",
                 "j_coefficient", "n_sections", "relative_torsion"});
  for (int i = 0; i < count; ++i) {
    Rng rng(ctx.seed + i);
    auto u = scale_to_psh(s, random_bandlimited(s, rng, 7, 0.8), b->V(), 0.1);
    auto rec = relative_torsion(b, u);
    const double E = energy_E(b, u);
    const auto ji = aubin_JI(b, u);
    const double L = functional_L(b, u);
    const double S = entropy_S(b, u);
    const double B = bergman_ratio(b, u);
    csv.row(i, E, ji.J, ji.I, L, rec.f_value, S, B, rec.j_coefficient, rec.n_sections,
            rec.relative_torsion);
    nlohmann::json j{{"case", i},
                     {"E", E},
                     {"J", ji.J},
                     {"I", ji.I},
                     {"L", L},
                     {"F", rec.f_value},
                     {"entropy_S", S},
                     {"j_coefficient", rec.j_coefficient},
                     {"n_sections", rec.n_sections},
                     {"relative_torsion", rec.relative_torsion}};
    jsonl << j.dump() << "\n";
  }
}

inline void entropy_ladder_exp(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto klist_d = ctx.cfg.get_list("solver.k_list", {2, 4, 6, 8, 10, 12, 14, 16});
  std::vector<int> klist;
  for (double k : klist_d) klist.push_back(static_cast<int>(k));
  auto u = scale_to_psh(s,
                        zonal_bump(s, ctx.cfg.get_double("fields.center0", 0.25),
                                   ctx.cfg.get_double("fields.width0", 0.6),
                                   ctx.cfg.get_double("fields.height0", 0.5)),
                        1.0, ctx.cfg.get_double("fields.psh_margin", 0.35));
  auto res = entropy_ladder(s, u, klist);
  CsvWriter csv(ctx.dir / "ladder.csv",
                {"k", "F_k", "scaled_torsion", "neg_entropy_target", "gram_resolved"});
  std::vector<double> xs, ys;
  for (const auto& r : res.rows) {
    csv.row(r.k, r.f_k, r.scaled_torsion, res.neg_entropy, r.gram_resolved ? 1 : 0);
    xs.push_back(1.0 / r.k);
    ys.push_back(r.scaled_torsion);
  }
  detail::write_plotdata(ctx.dir / "scaled_torsion_vs_invk.dat", xs, ys);
  CsvWriter sum(ctx.dir / "summary.csv", {"extrapolated", "neg_entropy", "gap"});
  sum.row(res.extrapolated, res.neg_entropy, res.gap);
}

inline void hormander_check(const Context& ctx) {
  auto s = detail::surface_from(ctx.cfg);
  auto b = make_sphere_bundle(s, ctx.cfg.get_int("bundle.degree", 4));
  const int count = ctx.cfg.get_int("fields.count", 20);
  const int cmax = ctx.cfg.get_int("solver.truncation", 2);

  CsvWriter csv(ctx.dir / "hormander.csv",
                {"case", "kind", "norm_alpha2", "norm_g2", "gap", "fit_residual",
                 "hol_projection"});
  for (int i = 0; i < count; ++i) {
    Rng rng(ctx.seed + i);
    auto u = scale_to_psh(s, random_bandlimited(s, rng, 7, 1.0), b->V(), 0.2);
    if (i % 5 == 0) {
      Eigen::VectorXcd h(b->m() + 1);
      for (int j = 0; j <= b->m(); ++j) h[j] = std::complex<double>(rng.normal(), rng.normal());
      auto r = dbar_minimal_holomorphic_source(b, u, h);
      csv.row(i, "equality", r.norm_alpha2, r.norm_g2, r.norm_g2 - r.norm_alpha2,
              r.fit_residual, r.hol_projection);
    } else {
      const auto fam = detail::section_family(b->m(), cmax);
      Eigen::VectorXcd beta(fam.size());
      for (Eigen::Index k = 0; k < beta.size(); ++k)
        beta[k] = 0.3 * std::complex<double>(rng.normal(), rng.normal());
      auto r = dbar_minimal_from_family(b, u, beta, cmax);
      csv.row(i, "generic", r.norm_alpha2, r.norm_g2, r.norm_g2 - r.norm_alpha2, r.fit_residual,
              r.hol_projection);
    }
  }
}

}  // namespace experiments

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::string required_fields;
  std::function<void(const experiments::Context&)> run;
};

inline const std::vector<ExperimentInfo>& experiment_table() {
  static const std::vector<ExperimentInfo> table = [] {
    std::vector<ExperimentInfo> t{
        {"coulomb-mc", "Metropolis estimates of L against the Gram determinant",
         "surface, bundle.degree, fields.count, solver.n_samples", experiments::coulomb_mc},
        {"entropy-ladder", "large tensor power ladder toward the entropy limit",
         "surface(sphere), solver.k_list, fields bump parameters",
         experiments::entropy_ladder_exp},
        {"envelope-tests", "psh projection properties and F monotonicity under projection",
         "surface, bundle, fields.count", experiments::envelope_tests},
        {"geodesic-profile", "zonal geodesic with functional diagnostics along the path",
         "surface(sphere), bundle.degree, fields bump parameters, solver.time_samples",
         experiments::geodesic_profile},
        {"hormander-check", "minimal dbar solutions against the curvature-weighted bound",
         "surface(sphere), bundle.degree, fields.count, solver.truncation",
         experiments::hormander_check},
        {"mean-field-continuation", "vortex continuation in eta with spectral diagnostics",
         "surface(torus), bundle.marked_node, solver.eta_over_4pi_list",
         experiments::mean_field_continuation},
        {"solve-critical", "sphere critical-point solves from perturbed starts",
         "surface(sphere), bundle.degree, solver.starts", experiments::solve_critical},
        {"torsion-table", "relative analytic torsion records over a test family",
         "surface, bundle, fields.count", experiments::torsion_table},
        {"verify-fang", "sharp determinant/functional margins for m = 0..m_max",
         "surface(sphere), bundle.m_max, fields.count", experiments::verify_fang},
        {"verify-mto", "two-sphere inequality margins over seeded random fields",
         "surface(sphere), fields.count", experiments::verify_mto},
    };
    return t;  // kept alphabetical by name
  }();
  return table;
}

inline std::string list_experiments_text() {
  std::string out = "available experiments:\n";
  for (const auto& e : experiment_table())
    out += "  " + e.name + "\n    " + e.description + "\n    required: " + e.required_fields +
           "\n";
  return out;
}

// returns the CLI exit status: 0 success, 2 config error, 3 numerical failure
inline int run_experiment(const Config& cfg, const RunOptions& opts, std::string* message = nullptr) {
  try {
    const std::string name = cfg.get_string("experiment.name");
    const ExperimentInfo* info = nullptr;
    for (const auto& e : experiment_table())
      if (e.name == name) info = &e;
    if (!info) throw ConfigError("unknown experiment '" + name + "'");

    experiments::Context ctx;
    ctx.cfg = cfg;
    ctx.seed = opts.seed_override
                   ? *opts.seed_override
                   : static_cast<std::uint64_t>(cfg.get_double("fields.seed", 42));
    ctx.threads = opts.threads;
    const std::string dir = !opts.output_dir.empty()
                                ? opts.output_dir
                                : cfg.get_string("output.dir", "out/" + name);
    ctx.dir = dir;
    std::filesystem::create_directories(ctx.dir);
    detail::write_manifest(ctx.dir, cfg, ctx.seed, ctx.threads);
    info->run(ctx);
    if (message) *message = "wrote " + ctx.dir.string();
    return 0;
  } catch (const ConfigError& e) {
    if (message) *message = std::string("config error: ") + e.what();
    return 2;
  } catch (const std::exception& e) {
    if (message) *message = std::string("numerical failure: ") + e.what();
    return 3;
  }
}

}  // namespace kmf
