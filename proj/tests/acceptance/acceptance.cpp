// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <vemfacet/oracle.hpp>
#include <vemfacet/report.hpp>
#include <vemfacet/spaces.hpp>
#include <vemfacet/studies.hpp>

using namespace vemfacet;

namespace
{
  // Pinned tolerances.
  constexpr double tol_trig = 1e-10;
  constexpr double tol_poly = 1e-13;
  constexpr double tol_div_curl = 1e-13;
  constexpr double tol_roundtrip_2d = 1e-6;
  constexpr double tol_roundtrip_3d = 1e-3;
  constexpr double pi0_factor = 3.0;
  constexpr double pi0_floor = 1e-12;
  constexpr double slope_lo = 0.85, slope_hi = 1.15;
  constexpr double uniform_variation = 1.01;
  constexpr double family_variation = 2.0;
  constexpr double in_space_floor = 1e-10;
  constexpr double in_space_ratio = 3.0;

  struct Check
  {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string & what)
    {
      if (!cond) {
        ok = false;
        detail << " [fail: " << what << "]";
      }
    }
  };

  StudyConfig study(const std::string & text) { return parse_study_file(text).studies.at(0); }

  PolytopalMesh mesh(const std::string & family, double h)
  {
    FamilySpec spec;
    spec.family = family;
    return generate_mesh(spec, h);
  }

  std::vector<ElementGeometry> first_cells(const PolytopalMesh & m, std::size_t n)
  {
    std::vector<ElementGeometry> out;
    for (std::size_t c = 0; c < std::min(n, m.n_cells()); ++c) {
      out.push_back(geometry(m, c));
    }
    return out;
  }

  Eigen::VectorXd random_dofs(std::mt19937_64 & rng, std::size_t n)
  {
    std::normal_distribution<double> N;
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v(i) = N(rng);
    }
    return v;
  }

  std::string sci(double x)
  {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
  }

  //------------------------------------------------------------------------------

  void exactness(Check & c)
  {
    for (const char * family : {"cubes", "distorted-hexes"}) {
      const auto r = run_study(study(std::string("[ex]\nkind = exactness\nspaces = face3d, edge3d\nfamily = ") + family +
                                     "\nh = 1/2, 1/4\nfields = trig, poly\nrandom_vectors = 1000\n"));
      const double ct = r.value("trig.commuting_residual.max"), cp = r.value("poly.commuting_residual.max");
      const double dt = r.value("trig.div_commuting_residual.max"), dp = r.value("poly.div_commuting_residual.max");
      const double dc = r.value("random.div_curl_residual.max");
      c.require(ct <= tol_trig, std::string(family) + " trig commuting");
      c.require(cp <= tol_poly, std::string(family) + " poly commuting");
      c.require(dt <= tol_trig && dp <= tol_trig, std::string(family) + " div commuting");
      c.require(dc <= tol_div_curl, std::string(family) + " div curl");
      c.require(r.value("random.vectors.total") >= 1000, "vector count");
      c.detail << ' ' << family << ": commuting trig " << sci(ct) << " poly " << sci(cp) << ", div " << sci(dt)
               << "/" << sci(dp) << ", div-curl " << sci(dc) << ";";
    }
  }

  void round_trip(Check & c)
  {
    std::mt19937_64 rng(2024);
    struct Case
    {
      SpaceTag space;
      std::string family;
      double h;
      int level;
      double tol;
    };
    const std::vector<Case> cases{{SpaceTag::Face2D, "hexagons", 0.5, 3, tol_roundtrip_2d},
                                  {SpaceTag::Edge2D, "hexagons", 0.5, 3, tol_roundtrip_2d},
                                  {SpaceTag::Face2D, "distorted-quads", 0.5, 3, tol_roundtrip_2d},
                                  {SpaceTag::Edge2D, "distorted-quads", 0.5, 3, tol_roundtrip_2d},
                                  {SpaceTag::Face3D, "distorted-hexes", 0.5, 2, tol_roundtrip_3d},
                                  {SpaceTag::Edge3D, "distorted-hexes", 0.5, 2, tol_roundtrip_3d}};
    for (const auto & k : cases) {
      Oracle oracle;
      const auto g = geometry(mesh(k.family, k.h), 0);
      double worst = 0.0;
      bool converging = true;
      double last_coarse = 0.0, last_fine = 0.0;
      for (int trial = 0; trial < 3; ++trial) {
        const DofVector d{k.space, g.cell, random_dofs(rng, dof_count(k.space, g))};
        const auto f = oracle.reconstruct(d, g, k.level, true);
        worst = std::max(worst, (reextract_dofs(f, g).values - d.values).norm() / d.values.norm());
        // the two-level estimate shrinks with the level, unless both sit at roundoff (field reproduced exactly)
        const auto coarse = oracle.reconstruct(d, g, k.level - 1, true);
        const double floor = in_space_floor * l2_norm(f);
        last_coarse = coarse.accuracy;
        last_fine = f.accuracy;
        converging = converging && (f.accuracy < coarse.accuracy || std::max(f.accuracy, coarse.accuracy) <= floor);
      }
      c.require(worst <= k.tol, to_string(k.space) + " residual");
      c.require(converging, to_string(k.space) + " accuracy not decreasing");
      c.detail << ' ' << to_string(k.space) << '/' << k.family << " L=" << k.level << ": " << sci(worst) << ';';
      c.detail << " accuracy " << sci(last_coarse) << " -> " << sci(last_fine) << ';';
    }
  }

  void pi0_cross(Check & c)
  {
    std::mt19937_64 rng(77);
    const auto quads = mesh("distorted-quads", 0.25);
    const auto hexes = mesh("distorted-hexes", 0.5);
    for (auto space : {SpaceTag::Face2D, SpaceTag::Edge2D, SpaceTag::Face3D, SpaceTag::Edge3D}) {
      const auto cells = first_cells(space_dimension(space) == 2 ? quads : hexes, 5);
      const int level = space_dimension(space) == 2 ? 2 : 1;
      Oracle oracle;
      double worst = 0.0; // observed / allowed
      for (const auto & g : cells) {
        for (int k = 0; k < 20; ++k) {
          const DofVector d{space, g.cell, random_dofs(rng, dof_count(space, g))};
          const auto f = oracle.reconstruct(d, g, level, true);
          // L2 norm of the difference of the two constants
          const double diff = (pi0_ambient(d, g) - f.integral() / g.measure).norm() * std::sqrt(g.measure);
          const double allowed = pi0_factor * f.accuracy + pi0_floor * l2_norm(f);
          worst = std::max(worst, diff / allowed);
        }
      }
      c.require(worst <= 1.0, to_string(space));
      c.detail << ' ' << to_string(space) << ": max diff/allowed " << sci(worst) << ';';
    }
  }

  void convergence(Check & c)
  {
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"[c2]\nkind = convergence\nspaces = edge2d, face2d\nfamily = squares\nh = 1/4, 1/8, 1/16, 1/32\n"
       "fields = trig\noracle_level = 3\n",
       {"edge2d_trig.l2_error", "edge2d_trig.rot_error", "face2d_trig.l2_error", "face2d_trig.div_error"}},
      {"[c3]\nkind = convergence\nspaces = face3d, edge3d\nfamily = cubes\nh = 1/2, 1/4, 1/8\n"
       "fields = trig\noracle_level = 2\n",
       {"face3d_trig.l2_error", "face3d_trig.div_error", "edge3d_trig.l2_error", "edge3d_trig.curl_error"}}};
    for (const auto & [text, keys] : runs) {
      const auto r = run_study(study(text));
      for (const auto & k : keys) {
        const double s = r.value(k + ".slope");
        c.require(s >= slope_lo && s <= slope_hi, k);
        c.detail << ' ' << k << ' ' << (std::isnan(s) ? std::string("inconclusive") : sci(s)) << ';';
      }
    }
  }

  void stability(Check & c)
  {
    struct Case
    {
      std::string family, spaces, h;
      int level;
      bool uniform;
    };
    const std::vector<Case> cases{{"squares", "edge2d, face2d", "1/4, 1/8, 1/16", 2, true},
                                  {"distorted-quads", "edge2d, face2d", "1/4, 1/8, 1/16", 2, false},
                                  {"hexagons", "edge2d, face2d", "1/4, 1/8, 1/16", 2, false},
                                  {"cubes", "face3d, edge3d", "1/2, 1/3, 1/4", 1, true},
                                  {"distorted-hexes", "face3d, edge3d", "1/2, 1/3, 1/4", 1, false}};
    for (const auto & k : cases) {
      const auto r = run_study(study("[s]\nkind = stability\nspaces = " + k.spaces + "\nfamily = " + k.family +
                                     "\nh = " + k.h + "\noracle_level = " + std::to_string(k.level) + "\n"));
      const double limit = k.uniform ? uniform_variation : family_variation;
      double worst = 1.0;
      for (const auto & t : r.tables) {
        for (const char * q : {"S.lambda_min", "S.lambda_max", "inner.lambda_min", "inner.lambda_max"}) {
          const std::string base = t.name + "." + q;
          const double v = r.value(base + ".variation");
          c.require(r.value(base + ".min") > 0.0, base + " not positive");
          c.require(v <= limit && (k.uniform || v < limit), k.family + " " + base);
          worst = std::max(worst, std::isnan(v) ? INFINITY : v);
        }
      }
      c.detail << ' ' << k.family << " variation " << sci(worst) << (k.uniform ? " (<=1.01)" : " (<2)") << ';';
    }
  }

  void apriori(Check & c)
  {
    struct Case
    {
      std::string family, spaces, h;
      int level;
    };
    const std::vector<Case> cases{{"squares", "edge2d, face2d", "1/4, 1/8, 1/16", 2},
                                  {"hexagons", "edge2d, face2d", "1/4, 1/8, 1/16", 2},
                                  {"cubes", "face3d, edge3d", "1/2, 1/3, 1/4", 1},
                                  {"distorted-hexes", "face3d, edge3d", "1/2, 1/3, 1/4", 1}};
    for (const auto & k : cases) {
      const auto r = run_study(study("[a]\nkind = apriori\nspaces = " + k.spaces + "\nfamily = " + k.family +
                                     "\nh = " + k.h + "\nfields = poly, trig\noracle_level = " +
                                     std::to_string(k.level) + "\n"));
      double worst = 1.0, cmax = 0.0;
      for (const auto & t : r.tables) {
        const double v = r.value(t.name + ".C.variation");
        const double m = r.value(t.name + ".C.max");
        c.require(std::isfinite(m) && v < family_variation, k.family + " " + t.name);
        worst = std::max(worst, std::isnan(v) ? INFINITY : v);
        cmax = std::max(cmax, m);
      }
      c.detail << ' ' << k.family << " C<=" << sci(cmax) << " variation " << sci(worst) << ';';
    }
  }

  void in_space(Check & c)
  {
    const auto quad = geometry(mesh("distorted-quads", 0.5), 0);
    const auto hex = geometry(mesh("distorted-hexes", 1.0), 0);
    for (auto space : {SpaceTag::Face2D, SpaceTag::Edge2D, SpaceTag::Face3D, SpaceTag::Edge3D}) {
      const auto & g = space_dimension(space) == 2 ? quad : hex;
      const AnalyticField f = builtin_field("poly", space);
      const DofVector d = extract_dofs(space, f, g);
      // DOF-exact interpolant: the field's own DOFs (exact polynomial quadrature) come back
      const double dof_err = (reextract_dofs(reconstruct(d, g, 1, false), g).values - d.values).cwiseAbs().maxCoeff();
      c.require(dof_err <= in_space_floor, to_string(space) + " DOFs");
      const int top = space_dimension(space) == 2 ? 3 : 2;
      std::vector<double> dist;
      Oracle oracle;
      for (int L = 1; L <= top; ++L) {
        dist.push_back(l2_distance(oracle.reconstruct(d, g, L, false), f, 6));
      }
      bool ok = true;
      for (std::size_t k = 1; k < dist.size(); ++k) {
        ok = ok && (dist[k] <= in_space_floor || dist[k - 1] / dist[k] >= in_space_ratio);
      }
      c.require(ok, to_string(space) + " distances");
      c.detail << ' ' << to_string(space) << ":";
      for (double x : dist) {
        c.detail << ' ' << sci(x);
      }
      c.detail << ';';
    }
  }

  void reproducibility(Check & c)
  {
    const std::string text = "[run]\nseed = 41\n\n"
                             "[r1]\nkind = apriori\nspaces = edge2d, face2d\nfamily = distorted-quads\n"
                             "h = 1/2, 1/4\nfields = trig\noracle_level = 2\n\n"
                             "[r2]\nkind = convergence\nspaces = face3d\nfamily = distorted-hexes\n"
                             "h = 1/1, 1/2\nfields = trig\noracle_level = 1\n";
    auto run_all = [&](unsigned threads) {
      auto file = parse_study_file(text);
      std::vector<StudyReport> reports;
      for (auto cfg : file.studies) {
        cfg.seed = *file.run.seed;
        cfg.threads = threads;
        reports.push_back(run_study(cfg));
      }
      return report_json(reports);
    };
    const std::string a = run_all(1), b = run_all(1), d = run_all(4);
    c.require(a == b, "rerun differs");
    c.require(a == d, "thread count changes the report");
    c.detail << " " << a.size() << " bytes, identical across reruns and thread counts";
  }
} // namespace

int main()
{
  const std::vector<std::pair<std::string, std::function<void(Check &)>>> criteria{
    {"exactness", exactness},   {"round-trip", round_trip}, {"pi0-cross-validation", pi0_cross},
    {"convergence", convergence}, {"stability", stability},   {"apriori", apriori},
    {"in-space", in_space},     {"reproducibility", reproducibility}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception & e) {
      c.ok = false;
      c.detail << " [exception: " << e.what() << "]";
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s) %.1fs:%s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), s,
                c.detail.str().c_str());
    std::fflush(stdout);
    failures += c.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
