#pragma once

// The built-in verification suite: fourteen numbered criteria covering the
// closed-form coupling-time laws, maximality, the reflection principle, the
// CLT and tail orders, the non-isotropic bounds, the partner-law check, the
// deterministic spherical geometry, the gradient bound, and the horizontal
// total-variation limit. "fast" trims path counts and widens the absolute
// slacks; statistical bands scale with N automatically.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "couplab/experiments.hpp"

namespace couplab {

enum class VerifySuite { Fast, Full };

struct CriterionReport {
  int index = 0;
  std::string title;
  std::vector<Assertion> checks;
  double seconds = 0.0;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline std::vector<CriterionReport> run_verification(VerifySuite suite) {
  const bool fast = suite == VerifySuite::Fast;
  auto scale_n = [&](std::size_t n) { return fast ? std::max<std::size_t>(2000, n / 10) : n; };
  std::vector<CriterionReport> reports;
  auto timed = [&](int index, const std::string& title, auto&& body) {
    CriterionReport rep;
    rep.index = index;
    rep.title = title;
    auto t0 = std::chrono::steady_clock::now();
    body(rep.checks);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports.push_back(std::move(rep));
  };
  auto check = [](std::vector<Assertion>& out, const std::string& name, double measured,
                  double tolerance, bool pass) {
    out.push_back({name, measured, tolerance, pass});
  };

  // 1: exact arctan-tanh tail law on the Heisenberg group
  timed(1, "Heisenberg vertical coupling tail matches the exact closed form", [&](auto& out) {
    PathConfig cfg;
    cfg.dt = 2e-3;
    cfg.horizon = 10.0;
    cfg.seed = 101;
    cfg.scheme = Scheme::BesselClock;
    std::size_t n = scale_n(200000);
    double slack = fast ? 0.01 : 0.005;
    auto s = collect_vertical(SpaceSpec::heisenberg(), 1.0, cfg, n);
    std::vector<double> grid{0.5, 1.0, 2.0, 5.0, 10.0};
    auto curve = empirical_tail(s.times, s.hit, cfg.horizon, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double exact = heisenberg_tail_exact(1.0, grid[k]);
      double d = std::fabs(curve.survival[k] - exact);
      double band = 3.0 * curve.stderr_[k] + slack;
      check(out, "t=" + format_sig12(grid[k]), d, band, d <= band);
    }
  });

  // 2 and 3 share the coupled runs per space
  struct SpaceSetting {
    SpaceSpec spec;
    double a;
    std::uint64_t seed;
  };
  std::vector<SpaceSetting> spaces{{SpaceSpec::heisenberg(), 1.0, 201},
                                   {SpaceSpec::sl2_cover(), 1.0, 202},
                                   {SpaceSpec::su2(), 0.5 * kPi, 203}};
  std::vector<double> probe_ts{1.0, 5.0};
  std::vector<TailSamples> shared(spaces.size());
  std::vector<std::vector<std::vector<double>>> shared_ind(spaces.size());
  std::size_t n23 = scale_n(100000);
  timed(2, "reflection principle P(sigma_a > t) = 1 - 2 P(z_t beyond the barrier)",
        [&](auto& out) {
          double slack = fast ? 0.01 : 0.0;
          for (std::size_t si = 0; si < spaces.size(); ++si) {
            PathConfig cfg;
            cfg.dt = 2e-3;
            cfg.horizon = 5.0;
            cfg.seed = spaces[si].seed;
            cfg.scheme = Scheme::BesselClock;
            shared[si] = collect_vertical(spaces[si].spec, spaces[si].a, cfg, n23, probe_ts);
            PathConfig ind = cfg;
            ind.seed = cfg.seed ^ 0x5bf0f1ecb5a24c1dULL;
            shared_ind[si] =
                collect_z_at(spaces[si].spec, 2.0 * spaces[si].a, probe_ts, ind, n23);
            for (std::size_t k = 0; k < probe_ts.size(); ++k) {
              auto r = reflection_principle_check(spaces[si].spec, spaces[si].a,
                                                  shared[si].survived[k], shared[si].z[k]);
              double band = 3.0 * r.combined_se + slack;
              check(out,
                    spaces[si].spec.name() + " t=" + format_sig12(probe_ts[k]),
                    std::fabs(r.discrepancy), band, std::fabs(r.discrepancy) <= band);
            }
          }
        });

  timed(3, "maximality: coupling tail equals the total-variation witness gap", [&](auto& out) {
    double slack = fast ? 0.01 : 0.005;
    for (std::size_t si = 0; si < spaces.size(); ++si) {
      PathConfig cfg;
      cfg.horizon = 5.0;
      auto curve = empirical_tail(shared[si].times, shared[si].hit, cfg.horizon, probe_ts);
      for (std::size_t k = 0; k < probe_ts.size(); ++k) {
        auto w =
            empirical_tv_witness(shared[si].z[k], shared_ind[si][k], spaces[si].spec, spaces[si].a);
        double d = std::fabs(curve.survival[k] - w.value);
        double band =
            3.0 * std::sqrt(curve.stderr_[k] * curve.stderr_[k] + w.stderr_ * w.stderr_) + slack;
        check(out, spaces[si].spec.name() + " t=" + format_sig12(probe_ts[k]), d, band, d <= band);
      }
    }
  });

  // 4: sech density of the stochastic area
  timed(4, "stochastic area at t=1 follows the sech density", [&](auto& out) {
    PathConfig cfg;
    cfg.dt = 1e-3;
    cfg.seed = 401;
    cfg.scheme = Scheme::BesselClock;
    std::size_t n = scale_n(100000);
    double tol = fast ? 0.025 : 0.012;
    auto z = collect_z_at(SpaceSpec::heisenberg(), 0.0, {1.0}, cfg, n)[0];
    double ks = ks_distance(z, [](double x) { return levy_area_cdf(1.0, x); });
    check(out, "KS distance", ks, tol, ks <= tol);
  });

  // 5: hyperbolic mirror coupling success probability
  timed(5, "hyperbolic mirror coupling success probability 1 - (4/pi) arctan(tanh(r/2))",
        [&](auto& out) {
          std::size_t n = scale_n(50000);
          double tol = fast ? 0.04 : 0.02;
          for (double r : {0.5, 1.0, 2.0}) {
            PathConfig cfg;
            cfg.dt = fast ? 2e-3 : 1e-3;
            cfg.horizon = 400.0;
            cfg.seed = 500 + static_cast<std::uint64_t>(10 * r);
            MirrorOptions opts;
            opts.escape_half_separation = 12.0;
            opts.track_vertical = false;
            auto spec = SpaceSpec::sl2_cover();
            BasePoint p = make_base_point(spec, r, 0.0), q = make_base_point(spec, r, kPi);
            std::vector<char> ok(n), resid(n);
            parallel_for_paths(n, [&](std::size_t i) {
              auto outcome = mirror_horizontal_coupling(spec, p, q, 0.0, 0.0, cfg, i, opts);
              ok[i] = outcome.status == MirrorStatus::Coupled ? 1 : 0;
              resid[i] = outcome.status == MirrorStatus::Truncated ? 1 : 0;
            });
            double f = 0.0, rf = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              f += ok[i];
              rf += resid[i];
            }
            f /= static_cast<double>(n);
            rf /= static_cast<double>(n);
            double expect = hyperbolic_success_prob(r);
            check(out, "r=" + format_sig12(r) + " (residual " + format_sig12(rf) + ")",
                  std::fabs(f - expect), tol, std::fabs(f - expect) <= tol);
          }
        });

  // 6: CLT for the vertical coordinate over the hyperbolic base, line fiber
  timed(6, "z_t/sqrt(t) approaches a standard normal with right-side domination",
        [&](auto& out) {
          PathConfig cfg;
          cfg.dt = 5e-3;
          cfg.seed = 601;
          cfg.scheme = Scheme::BesselClock;
          std::size_t n = scale_n(50000);
          double tol = fast ? 0.08 : 0.05;
          auto z = collect_z_at(SpaceSpec::sl2_cover(), 0.0, {50.0}, cfg, n)[0];
          auto res = clt_check_sl2(z, 50.0);
          check(out, "KS distance", res.ks, tol, res.ks <= tol);
          check(out, "domination margin", res.worst_margin, 0.0, res.domination_ok);
        });

  // 7: 1/sqrt(t) tail order for the hyperbolic base, line fiber
  timed(7, "hyperbolic-base vertical tail decays like t^{-1/2} with c <= 3", [&](auto& out) {
    PathConfig cfg;
    cfg.dt = 5e-3;
    cfg.horizon = 100.0;
    cfg.seed = 701;
    cfg.scheme = Scheme::BesselClock;
    std::size_t n = scale_n(50000);
    auto s = collect_vertical(SpaceSpec::sl2_cover(), 1.0, cfg, n);
    std::vector<double> grid{10, 15, 20, 30, 40, 55, 70, 85, 100};
    auto curve = empirical_tail(s.times, s.hit, cfg.horizon, grid);
    auto fit = power_fit(curve, 10.0, 100.0);
    double exp_tol = fast ? 0.15 : 0.1;
    check(out, "fitted exponent", fit.rate, exp_tol, std::fabs(fit.rate + 0.5) <= exp_tol);
    double c = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
      c = std::max(c, curve.survival[k] * std::sqrt(grid[k]));
    double c_tol = fast ? 3.5 : 3.0;
    check(out, "sup survival*sqrt(t)/a", c, c_tol, c <= c_tol);
  });

  // 8: exponential tails on the two circle-fiber spaces
  timed(8, "circle-fiber coupling tails are exponential with stable positive rates",
        [&](auto& out) {
          std::size_t n = scale_n(50000);
          double r2_tol = fast ? 0.95 : 0.98;
          double agree_tol = fast ? 0.4 : 0.25;
          std::vector<double> grid;
          for (int t = 2; t <= 12; ++t) grid.push_back(t);
          for (auto spec : {SpaceSpec::sl2(), SpaceSpec::su2()}) {
            std::vector<double> rates;
            for (double a : {0.25 * kPi, 0.5 * kPi}) {
              PathConfig cfg;
              cfg.dt = 2e-3;
              cfg.horizon = 12.0;
              cfg.seed = 800 + (spec.base == Base::Spherical ? 10 : 0) +
                         static_cast<std::uint64_t>(4 * a);
              cfg.scheme = Scheme::BesselClock;
              auto s = collect_vertical(spec, a, cfg, n);
              auto curve = empirical_tail(s.times, s.hit, cfg.horizon, grid);
              auto fit = exp_rate_fit(curve, 2.0, 12.0);
              rates.push_back(fit.rate);
              check(out, spec.name() + " 2a=" + format_sig12(2 * a) + " rate", fit.rate, 0.0,
                    fit.rate > 0.0);
              check(out, spec.name() + " 2a=" + format_sig12(2 * a) + " R2", fit.r2, r2_tol,
                    fit.r2 >= r2_tol);
            }
            double rel = std::fabs(rates[0] - rates[1]) / std::max(rates[0], rates[1]);
            check(out, spec.name() + " rate agreement", rel, agree_tol, rel <= agree_tol);
          }
        });

  // 9: non-isotropic density cap and tail bound for weights (1, 2)
  timed(9, "non-isotropic density cap 1/(alpha_n t) and tail bound 2a/(alpha_n t)",
        [&](auto& out) {
          std::vector<double> w{1.0, 2.0};
          auto spec = SpaceSpec::nonisotropic(w);
          NonisotropicDensity dens(w, 1.0);
          double cap = 1.0 / (w.back() * 1.0);
          check(out, "density max", dens.max_pdf(), cap + 1e-9, dens.max_pdf() <= cap + 1e-9);
          PathConfig cfg;
          cfg.dt = 1e-3;
          cfg.seed = 901;
          std::size_t n = scale_n(100000);
          double ks_tol = fast ? 0.04 : 0.02;
          auto z = collect_z_at(spec, 0.0, {1.0}, cfg, n)[0];
          double ks = ks_distance(z, [&](double x) { return dens.cdf(x); });
          check(out, "KS vs convolution", ks, ks_tol, ks <= ks_tol);
          PathConfig tc;
          tc.dt = 2e-3;
          tc.horizon = 8.0;
          tc.seed = 902;
          std::size_t nt = scale_n(50000);
          auto s = collect_vertical(spec, 1.0, tc, nt);
          std::vector<double> grid{2.0, 4.0, 6.0, 8.0};
          auto curve = empirical_tail(s.times, s.hit, tc.horizon, grid);
          for (std::size_t k = 0; k < grid.size(); ++k) {
            double bound = nonisotropic_tail_bound(w, 1.0, grid[k]) + 3.0 * curve.stderr_[k];
            check(out, "tail t=" + format_sig12(grid[k]), curve.survival[k], bound,
                  curve.survival[k] <= bound);
          }
        });

  // 10: two-stage tail boundedness on the Heisenberg group
  timed(10, "two-stage tail P(tau > t) min(sqrt(t)/h, t/|v|) stays below 10", [&](auto& out) {
    std::size_t n = scale_n(50000);
    auto spec = SpaceSpec::heisenberg();
    for (double v : {0.0, 2.0}) {
      PathConfig cfg;
      cfg.dt = 5e-3;
      cfg.horizon = 50.0;
      cfg.seed = 1000 + static_cast<std::uint64_t>(v);
      TotalPoint s1{make_base_point(spec, 1.0, 0.0), 0.0};
      TotalPoint s2{make_base_point(spec, 1.0, kPi), v};
      std::vector<double> tau(n);
      std::vector<char> hit(n);
      parallel_for_paths(n, [&](std::size_t i) {
        auto o = two_stage_coupling(spec, s1, s2, cfg, i);
        tau[i] = o.coupled ? o.coupling_time : cfg.horizon;
        hit[i] = o.coupled ? 1 : 0;
      });
      double t_min = std::max(1.0, 2.0 * v) + 1.0;
      std::vector<double> grid;
      for (int k = 0; k <= 6; ++k) grid.push_back(std::min(50.0, t_min + k * (50.0 - t_min) / 6.0));
      auto curve = empirical_tail(tau, hit, cfg.horizon, grid);
      double worst = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double scale = std::sqrt(grid[k]);
        if (v != 0.0) scale = std::min(scale, grid[k] / v);
        worst = std::max(worst, curve.survival[k] * scale);
      }
      check(out, "(h,v)=(1," + format_sig12(v) + ") sup scaled survival", worst, 10.0,
            worst <= 10.0);
    }
  });

  // 11: reflected partner is a Brownian motion
  timed(11, "reflected partner marginals match an independent Brownian motion at t=1",
        [&](auto& out) {
          std::size_t n = scale_n(20000);
          for (const auto& ss : spaces) {
            PathConfig cfg;
            cfg.dt = 2e-3;
            cfg.horizon = 8.0;
            cfg.seed = 1100 + ss.seed;
            double a = ss.spec.fiber == Fiber::Circle ? ss.a : 0.5;
            auto res = partner_marginal_check(ss.spec, a, cfg, n, 1.0);
            check(out, ss.spec.name() + " e0 p-value", res.e0.pvalue, 0.01,
                  res.e0.pvalue > 0.01);
            check(out, ss.spec.name() + " e1 p-value", res.e1.pvalue, 0.01,
                  res.e1.pvalue > 0.01);
            check(out, ss.spec.name() + " z p-value", res.z.pvalue, 0.01, res.z.pvalue > 0.01);
          }
        });

  // 12: deterministic spherical geometry
  timed(12, "equidistant spheres, fiber isometries, and the projection commute as claimed",
        [&](auto& out) {
          auto spec = preset_by_name("su2-geometry");
          auto m = run_experiment(spec);
          for (const auto& a : m.doc["assertions"]) {
            check(out, a["name"].template get<std::string>(),
                  a["measured"].template get<double>(), a["tolerance"].template get<double>(),
                  a["pass"].template get<bool>());
          }
        });

  // 13: vertical gradient bound via the coupled difference quotient
  timed(13, "coupled difference quotients certify |grad_v P_t f| <= osc(f) / t",
        [&](auto& out) {
          ExperimentSpec spec = preset_by_name("gradient-vertical");
          spec.n_paths = scale_n(50000);
          spec.seed = 1301;
          auto m = run_experiment(spec);
          for (const auto& a : m.doc["assertions"]) {
            check(out, a["name"].template get<std::string>(),
                  a["measured"].template get<double>(), a["tolerance"].template get<double>(),
                  a["pass"].template get<bool>());
          }
        });

  // 14: horizontal total-variation limit over the hyperbolic base, line fiber
  timed(14, "horizontal TV at large t approaches (4/pi) arctan(tanh(r/2))", [&](auto& out) {
    std::size_t n = scale_n(50000);
    double tol = fast ? 0.06 : 0.03;
    PathConfig cfg;
    cfg.dt = fast ? 2e-3 : 1e-3;
    cfg.horizon = 80.0;
    cfg.seed = 1401;
    MirrorOptions opts;
    opts.escape_half_separation = 12.0;
    opts.track_vertical = false;
    auto spec = SpaceSpec::sl2_cover();
    BasePoint p = make_base_point(spec, 1.0, 0.0), q = make_base_point(spec, 1.0, kPi);
    std::vector<double> wit(n);
    parallel_for_paths(n, [&](std::size_t i) {
      auto o = mirror_horizontal_coupling(spec, p, q, 0.0, 0.0, cfg, i, opts);
      wit[i] = o.status == MirrorStatus::Coupled ? 0.0 : static_cast<double>(o.witness_sign);
    });
    double est = 0.0;
    for (double v : wit) est += v;
    est /= static_cast<double>(n);
    double expect = horizontal_tv_limit_sl2(1.0);
    check(out, "witness estimate", std::fabs(est - expect), tol, std::fabs(est - expect) <= tol);
  });

  return reports;
}

inline bool print_verification(std::ostream& os, const std::vector<CriterionReport>& reports) {
  bool all = true;
  for (const auto& rep : reports) {
    bool ok = rep.pass();
    all = all && ok;
    char head[160];
    std::snprintf(head, sizeof head, "[%2d] %-70s %s (%.1fs)", rep.index, rep.title.c_str(),
                  ok ? "PASS" : "FAIL", rep.seconds);
    os << head << '\n';
    for (const auto& c : rep.checks) {
      char line[200];
      std::snprintf(line, sizeof line, "     %-52s measured %-12.5g tol %-12.5g %s",
                    c.name.c_str(), c.measured, c.tolerance, c.pass ? "ok" : "FAIL");
      os << line << '\n';
    }
  }
  os << (all ? "verification: all criteria passed\n" : "verification: FAILURES present\n");
  return all;
}

}  // namespace couplab
