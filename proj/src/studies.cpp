#include <vemfacet/studies.hpp>
#include <vemfacet/errors.hpp>
#include <vemfacet/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vemfacet
{

  namespace
  {
    constexpr double pi = std::numbers::pi;

    bool needs_oracle(StudyKind k) { return k != StudyKind::exactness; }

    std::vector<ElementGeometry> geometries(const PolytopalMesh & mesh)
    {
      std::vector<ElementGeometry> g;
      g.reserve(mesh.n_cells());
      for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
        g.push_back(geometry(mesh, c));
      }
      return g;
    }

    MeshRecord record(double h, const PolytopalMesh & mesh)
    {
      const auto r = regularity_report(mesh);
      return {h, r.max_diameter, mesh.n_cells(), r.min_gamma};
    }

    std::string key(std::initializer_list<std::string> parts)
    {
      std::string s;
      for (const auto & p : parts) {
        if (!s.empty()) {
          s += '.';
        }
        s += p;
      }
      return s;
    }

    // max / min over meshes of a positive series (1 = perfectly h-independent)
    double variation(const std::vector<double> & v)
    {
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      return *hi / *lo;
    }

    Eigen::VectorXd random_direction(std::mt19937_64 & rng, std::size_t n)
    {
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::VectorXd d(n);
      for (std::size_t i = 0; i < n; ++i) {
        d(i) = normal(rng);
      }
      return d / d.norm();
    }

    DofVector unit_dofs(SpaceTag space, const ElementGeometry & g, std::size_t j)
    {
      DofVector d;
      d.space = space;
      d.element = g.cell;
      d.values = Eigen::VectorXd::Unit(dof_count(space, g), j);
      return d;
    }

    AnalyticField curl_field(const AnalyticField & f)
    {
      AnalyticField c;
      c.name = "curl " + f.name;
      c.dimension = 3;
      c.value = f.curl;
      c.div = [](const Eigen::Vector3d &) { return 0.0; };
      return c;
    }

    void add_rows(StudyTable & t, double h, const std::vector<std::pair<std::string, std::pair<double, double>>> & q)
    {
      for (const auto & [name, va] : q) {
        t.rows.push_back({h, name, va.first, va.second});
      }
    }

    /// Slope fits for every quantity of a table (points ordered as the h list).
    void fit_table(StudyReport & r, const StudyTable & t, const std::vector<std::string> & quantities)
    {
      for (const auto & q : quantities) {
        std::vector<double> h_all, v_all, h_ok, v_ok;
        for (const auto & row : t.rows) {
          if (row.quantity != q) {
            continue;
          }
          const auto it = std::find_if(r.meshes.begin(), r.meshes.end(),
                                       [&row](const MeshRecord & m) { return m.h == row.h; });
          const double h = it->h_max;
          if (row.value > 0.0) {
            h_all.push_back(h);
            v_all.push_back(row.value);
            if (row.accuracy <= r.config.admissibility * row.value) {
              h_ok.push_back(h);
              v_ok.push_back(row.value);
            }
          }
        }
        SlopeFit s;
        s.table = t.name;
        s.quantity = q;
        s.points = h_all.size();
        s.admissible = h_ok.size();
        s.conclusive = h_ok.size() >= 3;
        const auto fit = s.conclusive ? fit_slope(h_ok, v_ok) : std::make_pair(std::nan(""), std::nan(""));
        s.slope = fit.first;
        s.residual = fit.second;
        s.slope_all = h_all.size() >= 2 ? fit_slope(h_all, v_all).first : std::nan("");
        r.slopes.push_back(s);
        r.summary.emplace_back(key({t.name, q, "slope"}), s.slope);
      }
    }

    template <typename PerElement>
    auto per_element(const std::vector<ElementGeometry> & geo, unsigned threads, PerElement f)
    {
      using R = decltype(f(geo.front()));
      std::vector<R> out(geo.size());
      parallel_for(geo.size(), threads, [&](std::size_t i) { out[i] = f(geo[i]); });
      return out;
    }

    std::pair<double, double> mean_div_rot(const ElementGeometry & g, const AnalyticField & f,
                                           const SimplexSubmesh & sm)
    {
      const double div = integrate(sm, f.div, 10) / g.measure;
      double rot = 0.0;
      if (f.curl) {
        const Eigen::Vector3d n = g.dimension == 2 ? g.polygon().normal : Eigen::Vector3d::UnitZ();
        rot = integrate(sm, [&f, &n](const Eigen::Vector3d & x) { return f.curl(x).dot(n); }, 10) / g.measure;
      }
      return {div, rot};
    }

  } // namespace

  //------------------------------------------------------------------------------
  // Config and fields
  //------------------------------------------------------------------------------

  std::string to_string(StudyKind kind)
  {
    switch (kind) {
    case StudyKind::convergence:
      return "convergence";
    case StudyKind::stability:
      return "stability";
    case StudyKind::exactness:
      return "exactness";
    case StudyKind::apriori:
      return "apriori";
    case StudyKind::inverse_probe:
      return "inverse-probe";
    }
    return "?";
  }

  StudyKind parse_study_kind(const std::string & name)
  {
    for (auto k : {StudyKind::convergence, StudyKind::stability, StudyKind::exactness, StudyKind::apriori,
                   StudyKind::inverse_probe}) {
      if (to_string(k) == name) {
        return k;
      }
    }
    throw ValidationError("unknown study kind '" + name + "'");
  }

  void StudyConfig::validate() const
  {
    if (spaces.empty()) {
      throw ValidationError("study " + name + ": no spaces given");
    }
    if (mesh.h.empty()) {
      throw ValidationError("study " + name + ": empty h list");
    }
    for (std::size_t i = 0; i < mesh.h.size(); ++i) {
      if (!(mesh.h[i] > 0.0) || (i > 0 && !(mesh.h[i] < mesh.h[i - 1]))) {
        throw ValidationError("study " + name + ": h list must be positive and strictly decreasing");
      }
    }
    const int dim = family_dimension(mesh.family);
    for (auto s : spaces) {
      if (space_dimension(s) != dim) {
        throw ValidationError("study " + name + ": space " + to_string(s) + " does not match the "
                              + std::to_string(dim) + "D family " + mesh.family);
      }
    }
    for (const auto & f : fields) {
      const auto names = builtin_field_names();
      if (std::find(names.begin(), names.end(), f) == names.end()) {
        throw ValidationError("study " + name + ": unknown field '" + f + "'");
      }
      for (auto s : spaces) {
        builtin_field(f, s);
      }
    }
    if (kind == StudyKind::convergence || kind == StudyKind::exactness) {
      if (fields.empty()) {
        throw ValidationError("study " + name + ": no test fields given");
      }
    }
    if (needs_oracle(kind) && oracle_level < 1) {
      throw ValidationError("study " + name + ": oracle level must be >= 1");
    }
    if (oracle_level > 5) {
      throw ValidationError("study " + name + ": oracle level above 5 is not supported");
    }
    if (samples < 0 || random_vectors < 0) {
      throw ValidationError("study " + name + ": sample counts must be non-negative");
    }
    if (!(admissibility > 0.0)) {
      throw ValidationError("study " + name + ": admissibility must be positive");
    }
  }

  std::vector<std::string> builtin_field_names() { return {"constant", "poly", "trig", "trig-yz", "trig-b"}; }

  AnalyticField builtin_field(const std::string & name, SpaceTag space)
  {
    const int dim = space_dimension(space);
    AnalyticField f;
    f.name = name;
    f.dimension = dim;
    f.regularity = 1.0;
    if (name == "constant") {
      const Eigen::Vector3d c = dim == 2 ? Eigen::Vector3d(0.3, -0.2, 0.0) : Eigen::Vector3d(0.3, -0.2, 0.5);
      f.value = [c](const Eigen::Vector3d &) { return c; };
      f.div = [](const Eigen::Vector3d &) { return 0.0; };
      f.curl = [](const Eigen::Vector3d &) { return Eigen::Vector3d::Zero().eval(); };
    } else if (name == "poly") {
      switch (space) {
      case SpaceTag::Face3D:
        f.value = [](const Eigen::Vector3d & x) {
          return Eigen::Vector3d(0.3 + 0.5 * x(0), -0.2 + 0.5 * x(1), 0.1 + 0.5 * x(2));
        };
        f.div = [](const Eigen::Vector3d &) { return 1.5; };
        f.curl = [](const Eigen::Vector3d &) { return Eigen::Vector3d::Zero().eval(); };
        break;
      case SpaceTag::Edge3D: {
        const Eigen::Vector3d a(0.3, -0.2, 0.5);
        const Eigen::Vector3d b(0.1, 0.7, 0.2);
        f.value = [a, b](const Eigen::Vector3d & x) { return (a + b.cross(x)).eval(); };
        f.div = [](const Eigen::Vector3d &) { return 0.0; };
        f.curl = [b](const Eigen::Vector3d &) { return (2.0 * b).eval(); };
        break;
      }
      case SpaceTag::Face2D:
        f.value = [](const Eigen::Vector3d & x) { return Eigen::Vector3d(0.3 + 0.5 * x(0), -0.2 + 0.5 * x(1), 0.0); };
        f.div = [](const Eigen::Vector3d &) { return 1.0; };
        f.curl = [](const Eigen::Vector3d &) { return Eigen::Vector3d::Zero().eval(); };
        break;
      case SpaceTag::Edge2D:
        f.value = [](const Eigen::Vector3d & x) { return Eigen::Vector3d(0.3 - 0.5 * x(1), -0.2 + 0.5 * x(0), 0.0); };
        f.div = [](const Eigen::Vector3d &) { return 0.0; };
        f.curl = [](const Eigen::Vector3d &) { return Eigen::Vector3d(0.0, 0.0, 1.0); };
        break;
      }
    } else if (name == "trig") {
      if (dim == 3) {
        f.value = [](const Eigen::Vector3d & x) {
          const double sx = std::sin(pi * x(0)), sy = std::sin(pi * x(1)), sz = std::sin(pi * x(2));
          return Eigen::Vector3d(sx * sy, sy * sz, sz * sx);
        };
        f.div = [](const Eigen::Vector3d & x) {
          return pi
                 * (std::cos(pi * x(0)) * std::sin(pi * x(1)) + std::cos(pi * x(1)) * std::sin(pi * x(2))
                    + std::cos(pi * x(2)) * std::sin(pi * x(0)));
        };
        f.curl = [](const Eigen::Vector3d & x) {
          return Eigen::Vector3d(-pi * std::sin(pi * x(1)) * std::cos(pi * x(2)),
                                 -pi * std::sin(pi * x(2)) * std::cos(pi * x(0)),
                                 -pi * std::sin(pi * x(0)) * std::cos(pi * x(1)));
        };
      } else {
        f.value = [](const Eigen::Vector3d & x) {
          return Eigen::Vector3d(std::sin(pi * x(0)) * std::cos(pi * x(1)),
                                 std::sin(pi * x(1)) + std::sin(pi * x(0)), 0.0);
        };
        f.div = [](const Eigen::Vector3d & x) {
          return pi * std::cos(pi * x(0)) * std::cos(pi * x(1)) + pi * std::cos(pi * x(1));
        };
        f.curl = [](const Eigen::Vector3d & x) {
          return Eigen::Vector3d(0.0, 0.0, pi * std::cos(pi * x(0)) + pi * std::sin(pi * x(0)) * std::sin(pi * x(1)));
        };
      }
    } else if (name == "trig-yz") {
      if (dim != 3) {
        throw ValidationError("field trig-yz is three-dimensional");
      }
      f.value = [](const Eigen::Vector3d & x) {
        return Eigen::Vector3d(std::sin(pi * x(1)) * std::sin(pi * x(2)), 0.0, 0.0);
      };
      f.div = [](const Eigen::Vector3d &) { return 0.0; };
      f.curl = [](const Eigen::Vector3d & x) {
        return Eigen::Vector3d(0.0, pi * std::sin(pi * x(1)) * std::cos(pi * x(2)),
                               -pi * std::cos(pi * x(1)) * std::sin(pi * x(2)));
      };
    } else if (name == "trig-b") {
      if (dim != 2) {
        throw ValidationError("field trig-b is two-dimensional");
      }
      f.value = [](const Eigen::Vector3d & x) { return Eigen::Vector3d(std::sin(pi * x(1)), std::sin(pi * x(0)), 0.0); };
      f.div = [](const Eigen::Vector3d &) { return 0.0; };
      f.curl = [](const Eigen::Vector3d & x) {
        return Eigen::Vector3d(0.0, 0.0, pi * std::cos(pi * x(0)) - pi * std::cos(pi * x(1)));
      };
    } else {
      throw ValidationError("unknown field '" + name + "'");
    }
    return f;
  }

  //------------------------------------------------------------------------------
  // Helpers
  //------------------------------------------------------------------------------

  double StudyReport::value(const std::string & k) const
  {
    for (const auto & [name, v] : summary) {
      if (name == k) {
        return v;
      }
    }
    throw std::out_of_range("no summary entry '" + k + "'");
  }

  const StudyTable & StudyReport::table(const std::string & name) const
  {
    for (const auto & t : tables) {
      if (t.name == name) {
        return t;
      }
    }
    throw std::out_of_range("no table '" + name + "'");
  }

  std::pair<double, double> fit_slope(const std::vector<double> & h, const std::vector<double> & value)
  {
    const std::size_t n = h.size();
    if (n < 2 || value.size() != n) {
      throw std::invalid_argument("fit_slope needs at least two points");
    }
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
      A(i, 0) = 1.0;
      A(i, 1) = std::log(h[i]);
      b(i) = std::log(value[i]);
    }
    const Eigen::Vector2d x = A.colPivHouseholderQr().solve(b);
    const double rms = std::sqrt((A * x - b).squaredNorm() / double(n));
    return {x(1), rms};
  }

  std::uint64_t element_seed(std::uint64_t seed, std::uint64_t element)
  {
    auto mix = [](std::uint64_t z) {
      z += 0x9e3779b97f4a7c15ULL;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return z ^ (z >> 31);
    };
    return mix(seed ^ mix(element));
  }

  Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd & A, const Eigen::MatrixXd & B,
                                          const std::string & what)
  {
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) {
      throw NumericalError(what + " is not positive definite");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      throw NumericalError("generalized eigenproblem failed for " + what);
    }
    return es.eigenvalues();
  }

  //------------------------------------------------------------------------------
  // Convergence
  //------------------------------------------------------------------------------

  StudyReport run_convergence(const StudyConfig & cfg, Oracle & oracle)
  {
    cfg.validate();
    StudyReport r;
    r.config = cfg;
    const int L = cfg.oracle_level;
    for (auto space : cfg.spaces) {
      for (const auto & name : cfg.fields) {
        r.tables.push_back({to_string(space) + "_" + name, {}});
      }
    }
    for (double h : cfg.mesh.h) {
      const PolytopalMesh mesh = generate_mesh(cfg.mesh, h);
      const auto geo = geometries(mesh);
      r.meshes.push_back(record(h, mesh));
      std::size_t t = 0;
      for (auto space : cfg.spaces) {
        oracle.prepare(space, geo, L, true, cfg.threads);
        if (space == SpaceTag::Edge3D) {
          oracle.prepare(SpaceTag::Face3D, geo, L, true, cfg.threads);
        }
        for (const auto & name : cfg.fields) {
          const AnalyticField field = builtin_field(name, space);
          struct Local
          {
            double err2, acc2, cerr2, cacc2;
          };
          const auto local = per_element(geo, cfg.threads, [&](const ElementGeometry & g) {
            const DofVector d = extract_dofs(space, field, g);
            const SubmeshField f = oracle.reconstruct(d, g, L, true);
            const double err = l2_distance(f, field, 6);
            Local out{err * err, f.accuracy * f.accuracy, 0.0, 0.0};
            if (space == SpaceTag::Edge3D) {
              const SubmeshField c = oracle.reconstruct(curl_image(d, g), g, L, true);
              const double e = l2_distance(c, curl_field(field), 6);
              out.cerr2 = e * e;
              out.cacc2 = c.accuracy * c.accuracy;
            } else {
              const double c = space == SpaceTag::Edge2D ? rot_constant(d, g) : div_constant(d, g);
              const Eigen::Vector3d n = g.polygon().normal;
              out.cerr2 = integrate(
                *f.submesh,
                [&](const Eigen::Vector3d & x) {
                  const double v = space == SpaceTag::Edge2D ? field.curl(x).dot(n) : field.div(x);
                  return (v - c) * (v - c);
                },
                6);
            }
            return out;
          });
          Local sum{0.0, 0.0, 0.0, 0.0};
          for (const auto & l : local) {
            sum.err2 += l.err2;
            sum.acc2 += l.acc2;
            sum.cerr2 += l.cerr2;
            sum.cacc2 += l.cacc2;
          }
          const std::string commuted = is_face_space(space) ? "div_error"
                                       : space == SpaceTag::Edge2D ? "rot_error"
                                                                   : "curl_error";
          add_rows(r.tables[t], h,
                   {{"l2_error", {std::sqrt(sum.err2), std::sqrt(sum.acc2)}},
                    {commuted, {std::sqrt(std::max(0.0, sum.cerr2)), std::sqrt(sum.cacc2)}}});
          ++t;
        }
      }
    }
    for (const auto & table : r.tables) {
      std::vector<std::string> quantities;
      for (const auto & row : table.rows) {
        if (std::find(quantities.begin(), quantities.end(), row.quantity) == quantities.end()) {
          quantities.push_back(row.quantity);
        }
      }
      fit_table(r, table, quantities);
      for (const auto & q : quantities) {
        double mx = 0.0, acc = 0.0;
        for (const auto & row : table.rows) {
          if (row.quantity == q) {
            mx = std::max(mx, row.value);
            acc = std::max(acc, row.accuracy);
          }
        }
        r.summary.emplace_back(key({table.name, q, "max"}), mx);
        r.summary.emplace_back(key({table.name, q, "max_accuracy"}), acc);
      }
    }
    return r;
  }

  //------------------------------------------------------------------------------
  // Stability, a-priori constants and inverse probes share the per-element eigen brackets
  //------------------------------------------------------------------------------

  namespace
  {
    enum class Probe
    {
      stability,
      apriori,
      inverse
    };

    /// Quadratic form of h ||div||, h ||rot|| or h ||curl|| in the DOF basis.
    Eigen::MatrixXd inverse_form(SpaceTag space, const ElementGeometry & g, Oracle & oracle, int L)
    {
      const std::size_t n = dof_count(space, g);
      const double h = g.diameter;
      if (space == SpaceTag::Edge3D) {
        Eigen::MatrixXd CI(g.faces.size(), n);
        for (std::size_t j = 0; j < n; ++j) {
          CI.col(j) = curl_image(unit_dofs(space, g, j), g).values;
        }
        const Eigen::MatrixXd GF = oracle.gram_matrix(SpaceTag::Face3D, g, L, false).matrix;
        return h * h * CI.transpose() * GF * CI;
      }
      Eigen::VectorXd row(n);
      for (std::size_t j = 0; j < n; ++j) {
        const DofVector d = unit_dofs(space, g, j);
        row(j) = space == SpaceTag::Edge2D ? rot_constant(d, g) : div_constant(d, g);
      }
      return h * h * g.measure * row * row.transpose();
    }

    StudyReport run_probe(const StudyConfig & cfg, Oracle & oracle, Probe probe)
    {
      cfg.validate();
      StudyReport r;
      r.config = cfg;
      const int L = cfg.oracle_level;
      for (auto space : cfg.spaces) {
        r.tables.push_back({to_string(space), {}});
      }
      for (double h : cfg.mesh.h) {
        const PolytopalMesh mesh = generate_mesh(cfg.mesh, h);
        const auto geo = geometries(mesh);
        r.meshes.push_back(record(h, mesh));
        for (std::size_t t = 0; t < cfg.spaces.size(); ++t) {
          const SpaceTag space = cfg.spaces[t];
          oracle.prepare(space, geo, L, true, cfg.threads);
          if (probe == Probe::inverse && space == SpaceTag::Edge3D) {
            oracle.prepare(SpaceTag::Face3D, geo, L, false, cfg.threads);
          }
          struct Local
          {
            double lo, hi, dlo, dhi, smin, smax, acc;
            std::vector<double> field_values;
          };
          const auto local = per_element(geo, cfg.threads, [&](const ElementGeometry & g) {
            const GramMatrix G = oracle.gram_matrix(space, g, L, true);
            const std::string what = "Gram matrix of element " + std::to_string(g.cell);
            Local out{};
            out.acc = G.accuracy;
            std::mt19937_64 rng(element_seed(cfg.seed, g.cell));
            const std::size_t n = G.matrix.rows();
            if (probe == Probe::inverse) {
              const Eigen::MatrixXd N = inverse_form(space, g, oracle, L);
              const Eigen::VectorXd ev = generalized_eigenvalues(N, G.matrix, what);
              out.hi = std::sqrt(std::max(0.0, ev(ev.size() - 1)));
              out.smax = 0.0;
              for (int k = 0; k < cfg.samples; ++k) {
                const Eigen::VectorXd d = random_direction(rng, n);
                out.smax = std::max(out.smax, std::sqrt(std::max(0.0, d.dot(N * d)) / d.dot(G.matrix * d)));
              }
              for (const auto & name : cfg.fields) {
                const Eigen::VectorXd d = extract_dofs(space, builtin_field(name, space), g).values;
                const double den = d.dot(G.matrix * d);
                out.field_values.push_back(den > 0 ? std::sqrt(std::max(0.0, d.dot(N * d)) / den) : 0.0);
              }
              return out;
            }
            const Eigen::MatrixXd S = stabilization_matrix(space, g);
            const Eigen::VectorXd ev = generalized_eigenvalues(S, G.matrix, what);
            out.lo = ev(0);
            out.hi = ev(ev.size() - 1);
            out.smin = std::numeric_limits<double>::infinity();
            out.smax = 0.0;
            for (int k = 0; k < cfg.samples; ++k) {
              const Eigen::VectorXd d = random_direction(rng, n);
              const double q = d.dot(S * d) / d.dot(G.matrix * d);
              out.smin = std::min(out.smin, q);
              out.smax = std::max(out.smax, q);
            }
            if (probe == Probe::stability) {
              const Eigen::VectorXd dv = generalized_eigenvalues(discrete_inner_matrix(space, g), G.matrix, what);
              out.dlo = dv(0);
              out.dhi = dv(dv.size() - 1);
            } else {
              for (const auto & name : cfg.fields) {
                const Eigen::VectorXd d = extract_dofs(space, builtin_field(name, space), g).values;
                const double den = d.dot(S * d);
                out.field_values.push_back(den > 0 ? std::sqrt(d.dot(G.matrix * d) / den) : 0.0);
              }
            }
            return out;
          });
          double lo = std::numeric_limits<double>::infinity(), hi = 0.0, dlo = lo, dhi = 0.0;
          double smin = lo, smax = 0.0, acc = 0.0;
          std::vector<double> fmax(cfg.fields.size(), 0.0);
          for (const auto & l : local) {
            lo = std::min(lo, l.lo);
            hi = std::max(hi, l.hi);
            dlo = std::min(dlo, l.dlo);
            dhi = std::max(dhi, l.dhi);
            smin = std::min(smin, l.smin);
            smax = std::max(smax, l.smax);
            acc = std::max(acc, std::isnan(l.acc) ? 0.0 : l.acc);
            for (std::size_t k = 0; k < l.field_values.size(); ++k) {
              fmax[k] = std::max(fmax[k], l.field_values[k]);
            }
          }
          auto & table = r.tables[t];
          if (probe == Probe::stability) {
            add_rows(table, h,
                     {{"S.lambda_min", {lo, acc * lo}},
                      {"S.lambda_max", {hi, acc * hi}},
                      {"inner.lambda_min", {dlo, acc * dlo}},
                      {"inner.lambda_max", {dhi, acc * dhi}},
                      {"S.sampled_min", {smin, acc * smin}},
                      {"S.sampled_max", {smax, acc * smax}},
                      {"gram_accuracy", {acc, 0.0}}});
          } else if (probe == Probe::apriori) {
            // C = sup ||v|| / sqrt(S(v, v)) = 1 / sqrt(lambda_min)
            const double C = 1.0 / std::sqrt(lo);
            add_rows(table, h, {{"C", {C, 0.5 * acc * C}}, {"C.sampled", {1.0 / std::sqrt(smin), 0.5 * acc * C}}});
            for (std::size_t k = 0; k < fmax.size(); ++k) {
              add_rows(table, h, {{"C." + cfg.fields[k], {fmax[k], 0.5 * acc * fmax[k]}}});
            }
          } else {
            add_rows(table, h, {{"ratio", {hi, 0.5 * acc * hi}}, {"ratio.sampled", {smax, 0.5 * acc * hi}}});
            for (std::size_t k = 0; k < fmax.size(); ++k) {
              add_rows(table, h, {{"ratio." + cfg.fields[k], {fmax[k], 0.5 * acc * fmax[k]}}});
            }
          }
        }
      }
      // h-independence verdicts
      for (const auto & table : r.tables) {
        std::vector<std::string> quantities;
        for (const auto & row : table.rows) {
          if (std::find(quantities.begin(), quantities.end(), row.quantity) == quantities.end()) {
            quantities.push_back(row.quantity);
          }
        }
        for (const auto & q : quantities) {
          if (q == "gram_accuracy") {
            double mx = 0.0;
            for (const auto & row : table.rows) {
              if (row.quantity == q) {
                mx = std::max(mx, row.value);
              }
            }
            r.summary.emplace_back(key({table.name, q, "max"}), mx);
            continue;
          }
          std::vector<double> v;
          for (const auto & row : table.rows) {
            if (row.quantity == q) {
              v.push_back(row.value);
            }
          }
          const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
          r.summary.emplace_back(key({table.name, q, "min"}), *lo);
          r.summary.emplace_back(key({table.name, q, "max"}), *hi);
          r.summary.emplace_back(key({table.name, q, "variation"}), *lo > 0.0 ? variation(v) : std::nan(""));
        }
      }
      return r;
    }
  } // namespace

  StudyReport run_stability(const StudyConfig & cfg, Oracle & oracle) { return run_probe(cfg, oracle, Probe::stability); }
  StudyReport run_apriori(const StudyConfig & cfg, Oracle & oracle) { return run_probe(cfg, oracle, Probe::apriori); }
  StudyReport run_inverse_probe(const StudyConfig & cfg, Oracle & oracle)
  {
    return run_probe(cfg, oracle, Probe::inverse);
  }

  //------------------------------------------------------------------------------
  // Exactness
  //------------------------------------------------------------------------------

  StudyReport run_exactness(const StudyConfig & cfg)
  {
    cfg.validate();
    StudyReport r;
    r.config = cfg;
    auto has = [&cfg](SpaceTag s) { return std::find(cfg.spaces.begin(), cfg.spaces.end(), s) != cfg.spaces.end(); };
    for (const auto & name : cfg.fields) {
      r.tables.push_back({name, {}});
    }
    if (has(SpaceTag::Edge3D)) {
      r.tables.push_back({"random", {}});
    }
    for (double h : cfg.mesh.h) {
      const PolytopalMesh mesh = generate_mesh(cfg.mesh, h);
      const auto geo = geometries(mesh);
      r.meshes.push_back(record(h, mesh));
      const std::size_t per_cell =
        geo.empty() ? 0 : (std::size_t(cfg.random_vectors) + geo.size() - 1) / geo.size();
      for (std::size_t t = 0; t < cfg.fields.size(); ++t) {
        struct Local
        {
          double commuting = 0.0, div = 0.0, rot = 0.0;
        };
        const auto local = per_element(geo, cfg.threads, [&](const ElementGeometry & g) {
          Local out;
          const SimplexSubmesh sm = subtessellate(g, 1);
          if (g.dimension == 3) {
            const AnalyticField f = builtin_field(cfg.fields[t], SpaceTag::Face3D);
            if (has(SpaceTag::Edge3D)) {
              const AnalyticField fe = builtin_field(cfg.fields[t], SpaceTag::Edge3D);
              const Eigen::VectorXd a = curl_image(extract_dofs(SpaceTag::Edge3D, fe, g), g).values;
              const Eigen::VectorXd b = extract_dofs(SpaceTag::Face3D, curl_field(fe), g).values;
              out.commuting = (a - b).cwiseAbs().maxCoeff();
            }
            if (has(SpaceTag::Face3D)) {
              const double c = div_constant(extract_dofs(SpaceTag::Face3D, f, g), g);
              out.div = std::abs(c - mean_div_rot(g, f, sm).first);
            }
          } else {
            if (has(SpaceTag::Face2D)) {
              const AnalyticField f = builtin_field(cfg.fields[t], SpaceTag::Face2D);
              const double c = div_constant(extract_dofs(SpaceTag::Face2D, f, g), g);
              out.div = std::abs(c - mean_div_rot(g, f, sm).first);
            }
            if (has(SpaceTag::Edge2D)) {
              const AnalyticField f = builtin_field(cfg.fields[t], SpaceTag::Edge2D);
              const double c = rot_constant(extract_dofs(SpaceTag::Edge2D, f, g), g);
              out.rot = std::abs(c - mean_div_rot(g, f, sm).second);
            }
          }
          return out;
        });
        Local mx;
        for (const auto & l : local) {
          mx.commuting = std::max(mx.commuting, l.commuting);
          mx.div = std::max(mx.div, l.div);
          mx.rot = std::max(mx.rot, l.rot);
        }
        if (has(SpaceTag::Edge3D)) {
          add_rows(r.tables[t], h, {{"commuting_residual", {mx.commuting, 0.0}}});
        }
        if (has(SpaceTag::Face3D) || has(SpaceTag::Face2D)) {
          add_rows(r.tables[t], h, {{"div_commuting_residual", {mx.div, 0.0}}});
        }
        if (has(SpaceTag::Edge2D)) {
          add_rows(r.tables[t], h, {{"rot_commuting_residual", {mx.rot, 0.0}}});
        }
      }
      if (has(SpaceTag::Edge3D)) {
        // div(curl_image(d)) relative to the size of the face terms, for random d
        const auto local = per_element(geo, cfg.threads, [&](const ElementGeometry & g) {
          std::mt19937_64 rng(element_seed(cfg.seed, g.cell));
          double worst = 0.0;
          for (std::size_t k = 0; k < per_cell; ++k) {
            DofVector d;
            d.space = SpaceTag::Edge3D;
            d.element = g.cell;
            d.values = random_direction(rng, g.edges.size());
            const DofVector c = curl_image(d, g);
            double scale = 0.0;
            for (std::size_t f = 0; f < g.faces.size(); ++f) {
              scale += std::abs(c.values(f)) * g.faces[f].area / g.measure;
            }
            const double res = std::abs(div_constant(c, g));
            worst = std::max(worst, scale > 0.0 ? res / scale : res);
          }
          return worst;
        });
        add_rows(r.tables.back(), h,
                 {{"div_curl_residual", {*std::max_element(local.begin(), local.end()), 0.0}},
                  {"vectors", {double(per_cell * geo.size()), 0.0}}});
      }
    }
    for (const auto & table : r.tables) {
      std::vector<std::string> quantities;
      for (const auto & row : table.rows) {
        if (std::find(quantities.begin(), quantities.end(), row.quantity) == quantities.end()) {
          quantities.push_back(row.quantity);
        }
      }
      for (const auto & q : quantities) {
        double mx = 0.0;
        for (const auto & row : table.rows) {
          if (row.quantity == q) {
            mx = q == "vectors" ? mx + row.value : std::max(mx, row.value);
          }
        }
        r.summary.emplace_back(key({table.name, q, q == "vectors" ? "total" : "max"}), mx);
      }
    }
    return r;
  }

  StudyReport run_study(const StudyConfig & cfg, Oracle & oracle)
  {
    switch (cfg.kind) {
    case StudyKind::convergence:
      return run_convergence(cfg, oracle);
    case StudyKind::stability:
      return run_stability(cfg, oracle);
    case StudyKind::exactness:
      return run_exactness(cfg);
    case StudyKind::apriori:
      return run_apriori(cfg, oracle);
    case StudyKind::inverse_probe:
      return run_inverse_probe(cfg, oracle);
    }
    throw ValidationError("unknown study kind");
  }

  StudyReport run_study(const StudyConfig & cfg)
  {
    Oracle oracle;
    return run_study(cfg, oracle);
  }

} // namespace vemfacet
