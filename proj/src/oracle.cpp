#include <vemfacet/oracle.hpp>
#include <vemfacet/errors.hpp>
#include <vemfacet/parallel.hpp>
#include <vemfacet/quadrature.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <bit>
#include <cmath>
#include <set>

namespace vemfacet
{

  namespace
  {
    using Sparse = Eigen::SparseMatrix<double>;
    using SparseSolver = Eigen::SparseLU<Sparse>;
    using Triplets = std::vector<Eigen::Triplet<double>>;
    constexpr std::size_t none = SimplexSubmesh::none;

    Eigen::Matrix3d skew(const Eigen::Vector3d & a)
    {
      Eigen::Matrix3d S;
      S << 0.0, -a(2), a(1), a(2), 0.0, -a(0), -a(1), a(0), 0.0;
      return S;
    }

    // int_T (v1 + B1 y) . (v2 + B2 y), y = x - centroid
    double affine_dot(double vol, const Eigen::Matrix3d & sigma, const Eigen::Vector3d & v1, const Eigen::Matrix3d & B1,
                      const Eigen::Vector3d & v2, const Eigen::Matrix3d & B2)
    {
      return vol * v1.dot(v2) + ((B1.transpose() * B2).cwiseProduct(sigma)).sum();
    }

    constexpr std::array<std::array<int, 2>, 6> pairs3{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
    constexpr std::array<std::array<int, 2>, 3> pairs2{{{0, 1}, {0, 2}, {1, 2}}};

    /// Entities, orientations and barycentric data of a simplex submesh.
    struct Complex
    {
      const SimplexSubmesh & sm;
      int d;
      std::size_t nv;
      std::vector<double> vol;
      std::vector<Eigen::Vector3d> cen;
      std::vector<Eigen::Matrix3d> sigma;
      std::vector<std::array<Eigen::Vector3d, 4>> grad;

      std::vector<std::array<std::size_t, 2>> edges;
      std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_id;
      std::vector<std::array<std::size_t, 6>> s_edges;

      // facets: edges (2D) or triangles (3D)
      std::vector<std::array<std::size_t, 3>> facets;
      std::vector<Eigen::Vector3d> facet_normal;
      std::vector<double> facet_measure;
      std::vector<Eigen::Vector3d> facet_centroid;
      std::vector<std::size_t> facet_parent;
      std::vector<std::array<std::size_t, 4>> s_facets; // opposite local vertex i
      std::vector<std::array<int, 4>> s_facet_sign;

      std::vector<bool> node_boundary;
      std::vector<bool> edge_boundary;

      explicit Complex(const SimplexSubmesh & m) : sm(m), d(m.dimension), nv(m.vertices_per_simplex())
      {
        const std::size_t ns = sm.n_simplices();
        vol.resize(ns);
        cen.resize(ns);
        sigma.resize(ns);
        grad.resize(ns);
        s_edges.resize(ns);
        s_facets.resize(ns);
        s_facet_sign.resize(ns);
        std::map<std::array<std::size_t, 3>, std::size_t> facet_id;
        for (std::size_t s = 0; s < ns; ++s) {
          const auto & t = sm.simplices[s];
          vol[s] = sm.simplex_measure(s);
          if (!(vol[s] > 0.0)) {
            throw NumericalError("degenerate simplex in the sub-tessellation of element " + std::to_string(sm.cell));
          }
          cen[s] = sm.simplex_centroid(s);
          Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
          for (std::size_t i = 0; i < nv; ++i) {
            const Eigen::Vector3d q = sm.nodes[t[i]] - cen[s];
            S += q * q.transpose();
          }
          sigma[s] = S * (vol[s] / double((d + 1) * (d + 2)));
          if (d == 2) {
            for (int i = 0; i < 3; ++i) {
              const auto & p1 = sm.nodes[t[(i + 1) % 3]];
              const auto & p2 = sm.nodes[t[(i + 2) % 3]];
              grad[s][i] = sm.normal.cross(p2 - p1) / (2.0 * vol[s]);
            }
            grad[s][3].setZero();
          } else {
            Eigen::Matrix3d J;
            for (int k = 0; k < 3; ++k) {
              J.col(k) = sm.nodes[t[k + 1]] - sm.nodes[t[0]];
            }
            const Eigen::Matrix3d Ji = J.inverse();
            grad[s][0] = Eigen::Vector3d::Zero();
            for (int k = 0; k < 3; ++k) {
              grad[s][k + 1] = Ji.row(k).transpose();
              grad[s][0] -= grad[s][k + 1];
            }
          }
          const std::size_t npairs = d == 2 ? 3 : 6;
          for (std::size_t k = 0; k < npairs; ++k) {
            const auto pr = d == 2 ? pairs2[k] : pairs3[k];
            const std::size_t a = std::min(t[pr[0]], t[pr[1]]);
            const std::size_t b = std::max(t[pr[0]], t[pr[1]]);
            auto [it, inserted] = edge_id.emplace(std::make_pair(a, b), edges.size());
            if (inserted) {
              edges.push_back({a, b});
            }
            s_edges[s][k] = it->second;
          }
          for (std::size_t i = 0; i < nv; ++i) {
            std::array<std::size_t, 3> f{none, none, none};
            std::size_t m = 0;
            for (std::size_t j = 0; j < nv; ++j) {
              if (j != i) {
                f[m++] = t[j];
              }
            }
            std::sort(f.begin(), f.begin() + m);
            auto [it, inserted] = facet_id.emplace(f, facets.size());
            if (inserted) {
              facets.push_back(f);
              const auto & xa = sm.nodes[f[0]];
              const auto & xb = sm.nodes[f[1]];
              if (d == 2) {
                facet_normal.push_back((xb - xa).normalized().cross(sm.normal));
                facet_measure.push_back((xb - xa).norm());
                facet_centroid.push_back(0.5 * (xa + xb));
              } else {
                const auto & xc = sm.nodes[f[2]];
                const Eigen::Vector3d nn = (xb - xa).cross(xc - xa);
                facet_normal.push_back(nn.normalized());
                facet_measure.push_back(0.5 * nn.norm());
                facet_centroid.push_back((xa + xb + xc) / 3.0);
              }
              facet_parent.push_back(none);
            }
            const std::size_t fid = it->second;
            s_facets[s][i] = fid;
            s_facet_sign[s][i] = facet_normal[fid].dot(facet_centroid[fid] - sm.nodes[t[i]]) > 0 ? 1 : -1;
          }
        }
        for (const auto & bf : sm.boundary) {
          auto f = bf.nodes;
          std::sort(f.begin(), f.begin() + d);
          facet_parent[facet_id.at(f)] = bf.face;
        }
        node_boundary.resize(sm.nodes.size());
        for (std::size_t i = 0; i < sm.nodes.size(); ++i) {
          node_boundary[i] = sm.facet_mask[i] != 0;
        }
        edge_boundary.resize(edges.size());
        for (std::size_t e = 0; e < edges.size(); ++e) {
          edge_boundary[e] = (sm.facet_mask[edges[e][0]] & sm.facet_mask[edges[e][1]]) != 0;
        }
      }

      std::size_t n_simplices() const { return vol.size(); }

    };

    struct PiecewiseAffine
    {
      std::vector<Eigen::Vector3d> value;
      std::vector<Eigen::Matrix3d> grad;

      explicit PiecewiseAffine(std::size_t n = 0) : value(n, Eigen::Vector3d::Zero()), grad(n, Eigen::Matrix3d::Zero())
      {
      }

      void axpy(double a, const PiecewiseAffine & x)
      {
        for (std::size_t s = 0; s < value.size(); ++s) {
          value[s] += a * x.value[s];
          grad[s] += a * x.grad[s];
        }
      }

      // adds a (x - x0) + B-type affine field given by its value at x0 and its constant gradient
      void add_affine(const Complex & c, const Eigen::Vector3d & at_x0, const Eigen::Vector3d & x0,
                      const Eigen::Matrix3d & B)
      {
        for (std::size_t s = 0; s < value.size(); ++s) {
          value[s] += at_x0 + B * (c.cen[s] - x0);
          grad[s] += B;
        }
      }
    };

    // int psi . (g + G y) summed over simplices, with (g, G) an affine weight given per simplex
    template <typename Weight>
    double moment(const Complex & c, const PiecewiseAffine & f, Weight weight)
    {
      double r = 0.0;
      for (std::size_t s = 0; s < c.n_simplices(); ++s) {
        Eigen::Vector3d g;
        Eigen::Matrix3d G;
        weight(s, g, G);
        r += affine_dot(c.vol[s], c.sigma[s], f.value[s], f.grad[s], g, G);
      }
      return r;
    }

    struct IndexMap
    {
      std::vector<std::size_t> to_local; // none if excluded
      std::vector<std::size_t> to_global;

      template <typename Keep>
      IndexMap(std::size_t n, Keep keep)
      {
        to_local.assign(n, none);
        for (std::size_t i = 0; i < n; ++i) {
          if (keep(i)) {
            to_local[i] = to_global.size();
            to_global.push_back(i);
          }
        }
      }
      std::size_t size() const { return to_global.size(); }
    };

    void factorize(SparseSolver & lu, Sparse & A, const std::string & what, std::size_t cell)
    {
      A.makeCompressed();
      lu.analyzePattern(A);
      lu.factorize(A);
      if (lu.info() != Eigen::Success) {
        throw NumericalError("singular " + what + " system on element " + std::to_string(cell) + ": "
                             + lu.lastErrorMessage());
      }
    }

    // restriction of a sparse matrix to (rows, cols) index maps, appended to triplets with offsets
    void restrict_into(Triplets & tr, const Sparse & A, const IndexMap & rows, const IndexMap & cols,
                       std::size_t row_offset, std::size_t col_offset, bool mirror)
    {
      for (int k = 0; k < A.outerSize(); ++k) {
        for (Sparse::InnerIterator it(A, k); it; ++it) {
          const auto r = rows.to_local[it.row()];
          const auto col = cols.to_local[it.col()];
          if (r != none && col != none) {
            tr.emplace_back(row_offset + r, col_offset + col, it.value());
            if (mirror) {
              tr.emplace_back(col_offset + col, row_offset + r, it.value());
            }
          }
        }
      }
    }

    //------------------------------------------------------------------------------
    // BDM1: full P1 vector fields with continuous normal component. DOF (facet f, node a) is the
    // value of u . nu_f at node a, nu_f the global facet orientation.
    //------------------------------------------------------------------------------

    class Bdm
    {
    public:
      explicit Bdm(const Complex & c) : m_c(c), m_U(c.n_simplices())
      {
        const int d = c.d;
        for (std::size_t s = 0; s < c.n_simplices(); ++s) {
          for (std::size_t i = 0; i < c.nv; ++i) {
            Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
            int r = 0;
            std::array<std::size_t, 3> js{};
            for (std::size_t j = 0; j < c.nv; ++j) {
              if (j != i) {
                N.row(r) = c.facet_normal[c.s_facets[s][j]].transpose();
                js[r++] = j;
              }
            }
            if (d == 2) {
              N.row(2) = c.sm.normal.transpose();
            }
            const Eigen::Matrix3d Ninv = N.inverse();
            for (int k = 0; k < d; ++k) {
              m_U[s][i][js[k]] = Ninv.col(k);
            }
          }
        }
      }

      std::size_t n_dofs() const { return m_c.facets.size() * m_c.d; }

      std::size_t dof(std::size_t facet, std::size_t node) const
      {
        const auto & f = m_c.facets[facet];
        for (int a = 0; a < m_c.d; ++a) {
          if (f[a] == node) {
            return facet * m_c.d + a;
          }
        }
        throw std::logic_error("node not on facet");
      }

      // visits the local basis functions of simplex s: fn(dof, value at centroid, gradient)
      template <typename Fn>
      void local(std::size_t s, Fn fn) const
      {
        const auto & c = m_c;
        for (std::size_t i = 0; i < c.nv; ++i) {
          for (std::size_t j = 0; j < c.nv; ++j) {
            if (j == i) {
              continue;
            }
            const Eigen::Vector3d & U = m_U[s][i][j];
            fn(dof(c.s_facets[s][j], c.sm.simplices[s][i]), (U / double(c.d + 1)).eval(),
               (U * c.grad[s][i].transpose()).eval());
          }
        }
      }

      PiecewiseAffine field(const Eigen::VectorXd & coef) const
      {
        PiecewiseAffine f(m_c.n_simplices());
        for (std::size_t s = 0; s < m_c.n_simplices(); ++s) {
          local(s, [&](std::size_t k, const Eigen::Vector3d & v, const Eigen::Matrix3d & B) {
            f.value[s] += coef(k) * v;
            f.grad[s] += coef(k) * B;
          });
        }
        return f;
      }

    private:
      const Complex & m_c;
      std::vector<std::array<std::array<Eigen::Vector3d, 4>, 4>> m_U;
    };

    /// Mixed BDM1-P0 Neumann problem: div u = c_div, u . n = g on the boundary (compatible data). One factorisation serves all boundary data.
    class MixedNeumann
    {
    public:
      using BoundaryData = std::function<double(std::size_t parent, const Eigen::Vector3d & x)>;

      MixedNeumann(const Complex & c, std::vector<Eigen::Vector3d> parent_normals)
          : m_c(c), m_bdm(c), m_normals(std::move(parent_normals)),
            m_interior(m_bdm.n_dofs(), [&c](std::size_t k) { return c.facet_parent[k / c.d] == none; })
      {
        const std::size_t n = m_bdm.n_dofs();
        const std::size_t nS = c.n_simplices();
        Triplets tm, tb;
        for (std::size_t s = 0; s < nS; ++s) {
          std::vector<std::tuple<std::size_t, Eigen::Vector3d, Eigen::Matrix3d>> loc;
          m_bdm.local(s, [&](std::size_t k, const Eigen::Vector3d & v, const Eigen::Matrix3d & B) {
            loc.emplace_back(k, v, B);
          });
          for (const auto & [ki, vi, Bi] : loc) {
            tb.emplace_back(s, ki, c.vol[s] * Bi.trace());
            for (const auto & [kj, vj, Bj] : loc) {
              tm.emplace_back(ki, kj, affine_dot(c.vol[s], c.sigma[s], vi, Bi, vj, Bj));
            }
          }
        }
        m_M.resize(n, n);
        m_M.setFromTriplets(tm.begin(), tm.end());
        m_B.resize(nS, n);
        m_B.setFromTriplets(tb.begin(), tb.end());

        const std::size_t nI = m_interior.size();
        // the multiplier is fixed on the last simplex; its div equation follows from compatibility
        const IndexMap all_s(nS, [nS](std::size_t s) { return s + 1 < nS; });
        Triplets ta;
        restrict_into(ta, m_M, m_interior, m_interior, 0, 0, false);
        Sparse Bneg = -m_B;
        restrict_into(ta, Bneg, all_s, m_interior, nI, 0, true);
        Sparse A(nI + nS - 1, nI + nS - 1);
        A.setFromTriplets(ta.begin(), ta.end());
        factorize(m_lu, A, "mixed Neumann", c.sm.cell);
      }

      const Bdm & space() const { return m_bdm; }

      Eigen::VectorXd solve(const BoundaryData & g, double cdiv) const
      {
        const auto & c = m_c;
        const std::size_t nI = m_interior.size();
        const std::size_t nS = c.n_simplices();
        Eigen::VectorXd uB = Eigen::VectorXd::Zero(m_bdm.n_dofs());
        for (std::size_t f = 0; f < c.facets.size(); ++f) {
          const auto p = c.facet_parent[f];
          if (p == none) {
            continue;
          }
          const double orient = c.facet_normal[f].dot(m_normals[p]);
          for (int a = 0; a < c.d; ++a) {
            uB(f * c.d + a) = orient * g(p, c.sm.nodes[c.facets[f][a]]);
          }
        }
        const Eigen::VectorXd MuB = m_M * uB;
        const Eigen::VectorXd BuB = m_B * uB;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nI + nS - 1);
        for (std::size_t k = 0; k < nI; ++k) {
          rhs(k) = -MuB(m_interior.to_global[k]);
        }
        for (std::size_t s = 0; s + 1 < nS; ++s) {
          rhs(nI + s) = -(cdiv * c.vol[s] - BuB(s));
        }
        const Eigen::VectorXd x = m_lu.solve(rhs);
        Eigen::VectorXd u = uB;
        for (std::size_t k = 0; k < nI; ++k) {
          u(m_interior.to_global[k]) = x(k);
        }
        return u;
      }

    private:
      const Complex & m_c;
      Bdm m_bdm;
      std::vector<Eigen::Vector3d> m_normals;
      IndexMap m_interior;
      Sparse m_M, m_B;
      SparseSolver m_lu;
    };

    //------------------------------------------------------------------------------
    // Face2D: psi = grad-part + a w, w = -x_F^perp / 2 + u, div u = 0, w . n = 0, so rot w = -1
    //------------------------------------------------------------------------------

    std::vector<PiecewiseAffine> face2d_basis(const Complex & c, const FaceGeometry & F)
    {
      const std::size_t n = F.edges.size();
      std::vector<Eigen::Vector3d> normals;
      for (const auto & e : F.edges) {
        normals.push_back(e.normal);
      }
      const MixedNeumann mixed(c, normals);
      const Eigen::Vector3d nrm = F.normal;
      const Eigen::Vector3d xb = F.barycenter;
      const Eigen::Matrix3d R = skew(nrm);
      auto xperp = [&](std::size_t s, Eigen::Vector3d & g, Eigen::Matrix3d & M) {
        g = nrm.cross(c.cen[s] - xb);
        M = R;
      };
      PiecewiseAffine w = mixed.space().field(mixed.solve(
        [&](std::size_t p, const Eigen::Vector3d & x) { return 0.5 * nrm.cross(x - xb).dot(normals[p]); }, 0.0));
      w.add_affine(c, Eigen::Vector3d::Zero(), xb, -0.5 * R);
      const double denom = moment(c, w, xperp);
      if (!(std::abs(denom) > 0.0)) {
        throw NumericalError("degenerate enhancing constraint on polygon " + std::to_string(F.id));
      }
      std::vector<PiecewiseAffine> basis;
      for (std::size_t j = 0; j < n; ++j) {
        PiecewiseAffine f = mixed.space().field(
          mixed.solve([j](std::size_t p, const Eigen::Vector3d &) { return p == j ? 1.0 : 0.0; },
                      F.edges[j].length / F.area));
        f.axpy(-moment(c, f, xperp) / denom, w);
        basis.push_back(std::move(f));
      }
      return basis;
    }

    std::vector<PiecewiseAffine> rotated(std::vector<PiecewiseAffine> fields, const Eigen::Vector3d & n)
    {
      const Eigen::Matrix3d R = skew(n);
      for (auto & f : fields) {
        for (std::size_t s = 0; s < f.value.size(); ++s) {
          f.value[s] = n.cross(f.value[s]);
          f.grad[s] = R * f.grad[s];
        }
      }
      return fields;
    }

    //------------------------------------------------------------------------------
    // Face3D: psi = grad-part + sum_i c_i w_i, w_i = e_i x x_E / 2 + u_i, div u_i = 0, w_i . n = 0
    //------------------------------------------------------------------------------

    std::vector<PiecewiseAffine> face3d_basis(const Complex & c, const ElementGeometry & g)
    {
      const std::size_t n = g.faces.size();
      std::vector<Eigen::Vector3d> normals;
      for (const auto & f : g.faces) {
        normals.push_back(f.normal);
      }
      const MixedNeumann mixed(c, normals);
      const Eigen::Vector3d xb = g.barycenter;
      std::array<PiecewiseAffine, 3> w;
      for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d e = Eigen::Vector3d::Unit(i);
        w[i] = mixed.space().field(mixed.solve(
          [&](std::size_t p, const Eigen::Vector3d & x) { return -0.5 * e.cross(x - xb).dot(normals[p]); }, 0.0));
        w[i].add_affine(c, Eigen::Vector3d::Zero(), xb, 0.5 * skew(e));
      }
      // enhancing constraint: int psi . (x_E x e_j) = 0
      auto weight = [&](int j) {
        return [&c, &xb, j](std::size_t s, Eigen::Vector3d & v, Eigen::Matrix3d & W) {
          v = (c.cen[s] - xb).cross(Eigen::Vector3d::Unit(j));
          W = -skew(Eigen::Vector3d::Unit(j));
        };
      };
      Eigen::Matrix3d A;
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          A(j, k) = moment(c, w[k], weight(j));
        }
      }
      const Eigen::FullPivLU<Eigen::Matrix3d> Alu(A);
      if (!Alu.isInvertible()) {
        throw NumericalError("singular enhancing-constraint system on element " + std::to_string(g.cell));
      }
      std::vector<PiecewiseAffine> basis;
      for (std::size_t i = 0; i < n; ++i) {
        PiecewiseAffine f = mixed.space().field(
          mixed.solve([i](std::size_t p, const Eigen::Vector3d &) { return p == i ? 1.0 : 0.0; },
                      g.faces[i].area / g.measure));
        Eigen::Vector3d rhs;
        for (int j = 0; j < 3; ++j) {
          rhs(j) = -moment(c, f, weight(j));
        }
        const Eigen::Vector3d coef = Alu.solve(rhs);
        for (int k = 0; k < 3; ++k) {
          f.axpy(coef(k), w[k]);
        }
        basis.push_back(std::move(f));
      }
      return basis;
    }

    //------------------------------------------------------------------------------
    // Edge3D: second-kind Nedelec (full P1) with a P2 gauge multiplier.
    // DOF 2e + end: v(x_a) . (x_b - x_a) at the end node a of edge e, b the other node.
    //------------------------------------------------------------------------------

    class Nedelec2
    {
    public:
      explicit Nedelec2(const Complex & c)
          : m_c(c), m_ie(2 * c.edges.size(), [&c](std::size_t k) { return !c.edge_boundary[k / 2]; }),
            m_in(c.sm.nodes.size() + c.edges.size(),
                 [&c](std::size_t k) {
                   const std::size_t nN = c.sm.nodes.size();
                   return k < nN ? !c.node_boundary[k] : !c.edge_boundary[k - nN];
                 })
      {
        const std::size_t nE = c.edges.size();
        const std::size_t nN = c.sm.nodes.size();
        Triplets tm, tk, tg;
        for (std::size_t s = 0; s < c.n_simplices(); ++s) {
          std::vector<std::tuple<std::size_t, Eigen::Vector3d, Eigen::Matrix3d, Eigen::Vector3d>> loc;
          local(s, [&](std::size_t k, const Eigen::Vector3d & v, const Eigen::Matrix3d & B, const Eigen::Vector3d & cu) {
            loc.emplace_back(k, v, B, cu);
          });
          for (const auto & [ki, vi, Bi, ci] : loc) {
            for (const auto & [kj, vj, Bj, cj] : loc) {
              tm.emplace_back(ki, kj, affine_dot(c.vol[s], c.sigma[s], vi, Bi, vj, Bj));
              tk.emplace_back(ki, kj, c.vol[s] * ci.dot(cj));
            }
          }
        }
        // gradients of the P2 basis (vertex functions, then edge bubbles 4 l_a l_b)
        for (std::size_t e = 0; e < nE; ++e) {
          const auto [a, b] = c.edges[e];
          tg.emplace_back(2 * e, a, -3.0);
          tg.emplace_back(2 * e, b, -1.0);
          tg.emplace_back(2 * e, nN + e, 4.0);
          tg.emplace_back(2 * e + 1, b, -3.0);
          tg.emplace_back(2 * e + 1, a, -1.0);
          tg.emplace_back(2 * e + 1, nN + e, 4.0);
        }
        m_M.resize(2 * nE, 2 * nE);
        m_M.setFromTriplets(tm.begin(), tm.end());
        m_K.resize(2 * nE, 2 * nE);
        m_K.setFromTriplets(tk.begin(), tk.end());
        Sparse G(2 * nE, nN + nE);
        G.setFromTriplets(tg.begin(), tg.end());
        m_MG = m_M * G;

        Triplets ta;
        restrict_into(ta, m_K, m_ie, m_ie, 0, 0, false);
        restrict_into(ta, m_MG, m_ie, m_in, 0, m_ie.size(), true);
        Sparse A(m_ie.size() + m_in.size(), m_ie.size() + m_in.size());
        A.setFromTriplets(ta.begin(), ta.end());
        factorize(m_lu, A, "curl-curl", c.sm.cell);
      }

      std::size_t n_dofs() const { return 2 * m_c.edges.size(); }

      std::size_t dof(std::size_t from, std::size_t to) const
      {
        const std::size_t e = m_c.edge_id.at({std::min(from, to), std::max(from, to)});
        return 2 * e + (from == m_c.edges[e][0] ? 0 : 1);
      }

      // fn(dof, value at centroid, gradient, curl) for the 12 functions l_i grad l_j
      template <typename Fn>
      void local(std::size_t s, Fn fn) const
      {
        const auto & c = m_c;
        const auto & t = c.sm.simplices[s];
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) {
            if (i == j) {
              continue;
            }
            const Eigen::Vector3d & gi = c.grad[s][i];
            const Eigen::Vector3d & gj = c.grad[s][j];
            fn(dof(t[i], t[j]), (gj / 4.0).eval(), (gj * gi.transpose()).eval(), gi.cross(gj).eval());
          }
        }
      }

      /// (curl v, curl w) + (grad s, w) = (psi, curl w), (v, grad t) = 0, v = vB on the boundary.
      Eigen::VectorXd solve(const PiecewiseAffine & psi, const Eigen::VectorXd & vB) const
      {
        const auto & c = m_c;
        Eigen::VectorXd load = Eigen::VectorXd::Zero(n_dofs());
        for (std::size_t s = 0; s < c.n_simplices(); ++s) {
          local(s, [&](std::size_t k, const Eigen::Vector3d &, const Eigen::Matrix3d &, const Eigen::Vector3d & cu) {
            load(k) += c.vol[s] * psi.value[s].dot(cu);
          });
        }
        load -= m_K * vB;
        const Eigen::VectorXd gauge = -(m_MG.transpose() * vB);
        const std::size_t nI = m_ie.size();
        Eigen::VectorXd rhs(nI + m_in.size());
        for (std::size_t k = 0; k < nI; ++k) {
          rhs(k) = load(m_ie.to_global[k]);
        }
        for (std::size_t k = 0; k < m_in.size(); ++k) {
          rhs(nI + k) = gauge(m_in.to_global[k]);
        }
        const Eigen::VectorXd x = m_lu.solve(rhs);
        Eigen::VectorXd v = vB;
        for (std::size_t k = 0; k < nI; ++k) {
          v(m_ie.to_global[k]) = x(k);
        }
        return v;
      }

      PiecewiseAffine field(const Eigen::VectorXd & coef) const
      {
        PiecewiseAffine f(m_c.n_simplices());
        for (std::size_t s = 0; s < m_c.n_simplices(); ++s) {
          local(s, [&](std::size_t k, const Eigen::Vector3d & v, const Eigen::Matrix3d & B, const Eigen::Vector3d &) {
            f.value[s] += coef(k) * v;
            f.grad[s] += coef(k) * B;
          });
        }
        return f;
      }

    private:
      const Complex & m_c;
      IndexMap m_ie;
      IndexMap m_in;
      Sparse m_M, m_K, m_MG;
      SparseSolver m_lu;
    };

    std::vector<PiecewiseAffine> edge3d_basis(const Complex & c, const std::vector<PiecewiseAffine> & face_basis,
                                              const ElementGeometry & g, int level)
    {
      const std::size_t nE = g.edges.size();
      const Nedelec2 ned(c);
      // node lookup by position (face submeshes reproduce the boundary of the 3D submesh exactly)
      std::map<std::array<double, 3>, std::size_t> node_at;
      for (std::size_t i = 0; i < c.sm.nodes.size(); ++i) {
        if (c.node_boundary[i]) {
          const auto & x = c.sm.nodes[i];
          node_at[{x(0), x(1), x(2)}] = i;
        }
      }
      // tangential traces from the Edge2D reconstructions on the faces
      Eigen::MatrixXd VB = Eigen::MatrixXd::Zero(ned.n_dofs(), nE);
      std::vector<bool> done(c.edges.size(), false);
      for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const auto & F = g.faces[k];
        const SimplexSubmesh sm2 = subtessellate_polygon(F, level);
        const Complex c2(sm2);
        const auto trace = rotated(face2d_basis(c2, F), F.normal);
        std::vector<std::size_t> to3(sm2.nodes.size());
        for (std::size_t i = 0; i < sm2.nodes.size(); ++i) {
          const auto & x = sm2.nodes[i];
          const auto it = node_at.find({x(0), x(1), x(2)});
          if (it == node_at.end()) {
            throw NumericalError("face and element sub-tessellations do not match on element "
                                 + std::to_string(g.cell));
          }
          to3[i] = it->second;
        }
        for (std::size_t s2 = 0; s2 < c2.n_simplices(); ++s2) {
          const auto & t = sm2.simplices[s2];
          for (const auto & pr : pairs2) {
            const std::size_t a = to3[t[pr[0]]];
            const std::size_t b = to3[t[pr[1]]];
            const std::size_t e = c.edge_id.at({std::min(a, b), std::max(a, b)});
            if (done[e]) {
              continue;
            }
            done[e] = true;
            for (const auto & [from, to] : {std::make_pair(a, b), std::make_pair(b, a)}) {
              const Eigen::Vector3d & xf = c.sm.nodes[from];
              const Eigen::Vector3d dir = c.sm.nodes[to] - xf;
              const std::size_t row = ned.dof(from, to);
              for (std::size_t i = 0; i < F.edges.size(); ++i) {
                const auto & f = trace[i];
                const double val = (f.value[s2] + f.grad[s2] * (xf - c2.cen[s2])).dot(dir);
                VB(row, F.edges[i].edge) += F.edges[i].sign * val;
              }
            }
          }
        }
      }
      for (std::size_t e = 0; e < c.edges.size(); ++e) {
        if (c.edge_boundary[e] && !done[e]) {
          throw NumericalError("boundary edge without trace value on element " + std::to_string(g.cell));
        }
      }
      // curl v = Face3D reconstruction of the curl image
      std::vector<PiecewiseAffine> basis;
      for (std::size_t j = 0; j < nE; ++j) {
        PiecewiseAffine psi(c.n_simplices());
        for (std::size_t k = 0; k < g.faces.size(); ++k) {
          for (const auto & fe : g.faces[k].edges) {
            if (fe.edge == j) {
              psi.axpy(fe.sign * fe.length / g.faces[k].area, face_basis[k]);
            }
          }
        }
        basis.push_back(ned.field(ned.solve(psi, VB.col(j))));
      }
      return basis;
    }

    // Records geometry quantized to 1e-9 (relative to the unit diameter) into the cache key.
    struct Snapper
    {
      std::vector<long long> key;

      void operator()(double x) { key.push_back(std::llround(x * 1e9)); }
      void operator()(const Eigen::Vector3d & v)
      {
        for (int k = 0; k < 3; ++k) {
          (*this)(v(k));
        }
      }
      void tag(long long v) { key.push_back(v); }
    };

    /// Scales the element to unit diameter about its barycenter and relabels vertices by rank.
    /// Returns the cache key.
    std::vector<long long> normalize(const ElementGeometry & g, SpaceTag space, int level, ElementGeometry & n)
    {
      if (space_dimension(space) != g.dimension) {
        throw std::invalid_argument("space " + to_string(space) + " cannot be used on a "
                                    + std::to_string(g.dimension) + "D element");
      }
      const double h = g.diameter;
      const Eigen::Vector3d c = g.barycenter;
      auto P = [h, &c](const Eigen::Vector3d & x) -> Eigen::Vector3d { return (x - c) / h; };
      std::map<std::size_t, std::size_t> rank;
      for (std::size_t i = 0; i < g.vertices.size(); ++i) {
        rank[g.vertices[i]] = i;
      }
      Snapper snap;
      snap.tag(static_cast<long long>(space));
      snap.tag(level);
      snap.tag(g.dimension);
      n = g;
      n.diameter = 1.0;
      n.measure = g.measure / std::pow(h, g.dimension);
      snap(n.measure);
      n.barycenter = Eigen::Vector3d::Zero();
      for (std::size_t i = 0; i < n.vertices.size(); ++i) {
        n.vertices[i] = i;
      }
      snap.tag(static_cast<long long>(n.edges.size()));
      for (std::size_t e = 0; e < n.edges.size(); ++e) {
        auto & E = n.edges[e];
        E.id = e;
        for (auto & v : E.vertices) {
          v = rank.at(v);
          snap.tag(static_cast<long long>(v));
        }
        E.length /= h;
        E.midpoint = P(E.midpoint);
        snap(E.length);
        snap(E.midpoint);
        snap(E.tangent);
      }
      snap.tag(static_cast<long long>(n.faces.size()));
      for (std::size_t k = 0; k < n.faces.size(); ++k) {
        auto & f = n.faces[k];
        f.id = k;
        f.area /= h * h;
        f.diameter /= h;
        f.barycenter = P(f.barycenter);
        snap.tag(f.orientation);
        snap(f.normal);
        snap(f.area);
        snap(f.diameter);
        snap(f.barycenter);
        snap(f.e1);
        snap(f.e2);
        snap.tag(static_cast<long long>(f.points.size()));
        for (std::size_t i = 0; i < f.points.size(); ++i) {
          f.loop[i] = rank.at(f.loop[i]);
          snap.tag(static_cast<long long>(f.loop[i]));
          f.points[i] = P(f.points[i]);
          snap(f.points[i]);
          auto & fe = f.edges[i];
          fe.global_edge = fe.edge;
          fe.length /= h;
          fe.start = P(fe.start);
          fe.end = P(fe.end);
          fe.midpoint = P(fe.midpoint);
          snap.tag(static_cast<long long>(fe.edge));
          snap.tag(fe.sign);
          snap(fe.length);
          snap(fe.start);
          snap(fe.end);
          snap(fe.midpoint);
          snap(fe.tangent);
          snap(fe.normal);
        }
      }
      return std::move(snap.key);
    }

    void check_level(int level)
    {
      if (level < 0) {
        throw std::invalid_argument("oracle level must be non-negative");
      }
    }
  } // namespace

  struct Oracle::Basis
  {
    SpaceTag space;
    int level;
    std::shared_ptr<const SimplexSubmesh> submesh; // normalised coordinates
    std::vector<PiecewiseAffine> fields;
    Eigen::MatrixXd gram;
  };

  namespace
  {
    std::shared_ptr<const Oracle::Basis> build_basis(SpaceTag space, const ElementGeometry & n, int level)
    {
      auto b = std::make_shared<Oracle::Basis>();
      b->space = space;
      b->level = level;
      if (space_dimension(space) == 2) {
        const auto & F = n.polygon();
        auto sm = std::make_shared<SimplexSubmesh>(subtessellate_polygon(F, level));
        sm->cell = n.cell;
        const Complex c(*sm);
        b->fields = face2d_basis(c, F);
        if (space == SpaceTag::Edge2D) {
          b->fields = rotated(std::move(b->fields), F.normal);
        }
        b->submesh = sm;
      } else {
        auto sm = std::make_shared<SimplexSubmesh>(subtessellate(n, level));
        const Complex c(*sm);
        b->fields = face3d_basis(c, n);
        if (space == SpaceTag::Edge3D) {
          b->fields = edge3d_basis(c, b->fields, n, level);
        }
        b->submesh = sm;
      }
      const std::size_t N = b->fields.size();
      b->gram.resize(N, N);
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < b->submesh->n_simplices(); ++t) {
            s += affine_dot(b->submesh->simplex_measure(t), second_moment(*b->submesh, t), b->fields[i].value[t],
                            b->fields[i].grad[t], b->fields[j].value[t], b->fields[j].grad[t]);
          }
          b->gram(i, j) = b->gram(j, i) = s;
        }
      }
      return b;
    }

    SubmeshField materialize(const Oracle::Basis & b, const DofVector & d, const ElementGeometry & g)
    {
      const double h = g.diameter;
      auto sm = std::make_shared<SimplexSubmesh>(*b.submesh);
      sm->cell = g.cell;
      for (auto & x : sm->nodes) {
        x = g.barycenter + h * x;
      }
      SubmeshField f;
      f.space = d.space;
      f.element = g.cell;
      f.level = b.level;
      f.submesh = sm;
      const std::size_t ns = sm->n_simplices();
      f.value.assign(ns, Eigen::Vector3d::Zero());
      f.gradient.assign(ns, Eigen::Matrix3d::Zero());
      for (std::size_t j = 0; j < b.fields.size(); ++j) {
        const double dj = d.values(j);
        if (dj == 0.0) {
          continue;
        }
        for (std::size_t s = 0; s < ns; ++s) {
          f.value[s] += dj * b.fields[j].value[s];
          f.gradient[s] += (dj / h) * b.fields[j].grad[s];
        }
      }
      return f;
    }
  } // namespace

  std::shared_ptr<const Oracle::Basis> Oracle::lookup(SpaceTag space, const ElementGeometry & g, int level)
  {
    check_level(level);
    ElementGeometry n;
    const auto key = normalize(g, space, level, n);
    if (!m_use_cache) {
      return build_basis(space, n, level);
    }
    {
      std::lock_guard<std::mutex> lock(m_mutex);
      const auto it = m_cache.find(key);
      if (it != m_cache.end()) {
        return it->second;
      }
    }
    auto b = build_basis(space, n, level);
    std::lock_guard<std::mutex> lock(m_mutex);
    return m_cache.emplace(key, b).first->second;
  }

  void Oracle::prepare(SpaceTag space, const std::vector<ElementGeometry> & elements, int level, bool estimate,
                       unsigned threads)
  {
    if (!m_use_cache) {
      return;
    }
    std::vector<std::pair<std::vector<long long>, ElementGeometry>> todo;
    std::set<std::vector<long long>> seen;
    for (int l = estimate && level > 0 ? level - 1 : level; l <= level; ++l) {
      for (const auto & g : elements) {
        check_level(l);
        ElementGeometry n;
        auto key = normalize(g, space, l, n);
        {
          std::lock_guard<std::mutex> lock(m_mutex);
          if (m_cache.count(key)) {
            continue;
          }
        }
        if (seen.insert(key).second) {
          todo.emplace_back(std::move(key), std::move(n));
        }
      }
    }
    std::vector<std::shared_ptr<const Basis>> built(todo.size());
    parallel_for(todo.size(), threads, [&](std::size_t i) {
      built[i] = build_basis(space, todo[i].second, int(todo[i].first[1]));
    });
    std::lock_guard<std::mutex> lock(m_mutex);
    for (std::size_t i = 0; i < todo.size(); ++i) {
      m_cache.emplace(todo[i].first, built[i]);
    }
  }

  std::size_t Oracle::cache_size() const
  {
    std::lock_guard<std::mutex> lock(m_mutex);
    return m_cache.size();
  }

  SubmeshField Oracle::reconstruct(const DofVector & d, const ElementGeometry & g, int level, bool estimate)
  {
    if (std::size_t(d.values.size()) != dof_count(d.space, g)) {
      throw std::invalid_argument("DOF vector length does not match the element");
    }
    if (!d.values.allFinite()) {
      throw std::invalid_argument("DOF vector has non-finite entries");
    }
    SubmeshField f = materialize(*lookup(d.space, g, level), d, g);
    if (estimate && level > 0) {
      const SubmeshField coarse = materialize(*lookup(d.space, g, level - 1), d, g);
      f.accuracy = l2_distance(f, coarse);
    }
    return f;
  }

  std::vector<SubmeshField> Oracle::basis(SpaceTag space, const ElementGeometry & g, int level)
  {
    const auto b = lookup(space, g, level);
    std::vector<SubmeshField> out;
    for (std::size_t j = 0; j < b->fields.size(); ++j) {
      DofVector d;
      d.space = space;
      d.element = g.cell;
      d.values = Eigen::VectorXd::Unit(b->fields.size(), j);
      out.push_back(materialize(*b, d, g));
    }
    return out;
  }

  GramMatrix Oracle::gram_matrix(SpaceTag space, const ElementGeometry & g, int level, bool estimate)
  {
    const double scale = std::pow(g.diameter, g.dimension);
    GramMatrix G;
    G.space = space;
    G.element = g.cell;
    G.level = level;
    G.matrix = scale * lookup(space, g, level)->gram;
    if (estimate && level > 0) {
      const Eigen::MatrixXd coarse = scale * lookup(space, g, level - 1)->gram;
      G.accuracy = (G.matrix - coarse).cwiseAbs().maxCoeff() / G.matrix.cwiseAbs().maxCoeff();
    }
    return G;
  }

  SubmeshField reconstruct(const DofVector & d, const ElementGeometry & g, int level, bool estimate)
  {
    Oracle o(false);
    return o.reconstruct(d, g, level, estimate);
  }

  GramMatrix gram_matrix(SpaceTag space, const ElementGeometry & g, int level, bool estimate)
  {
    Oracle o(false);
    return o.gram_matrix(space, g, level, estimate);
  }

  //------------------------------------------------------------------------------
  // Field utilities
  //------------------------------------------------------------------------------

  Eigen::Matrix3d second_moment(const SimplexSubmesh & sm, std::size_t s)
  {
    const Eigen::Vector3d c = sm.simplex_centroid(s);
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < sm.vertices_per_simplex(); ++i) {
      const Eigen::Vector3d q = sm.nodes[sm.simplices[s][i]] - c;
      S += q * q.transpose();
    }
    const int d = sm.dimension;
    return S * (std::abs(sm.simplex_measure(s)) / double((d + 1) * (d + 2)));
  }

  Eigen::Vector3d SubmeshField::evaluate(std::size_t s, const Eigen::Vector3d & x) const
  {
    return value[s] + gradient[s] * (x - submesh->simplex_centroid(s));
  }

  Eigen::Vector3d SubmeshField::operator()(const Eigen::Vector3d & x) const
  {
    const auto & sm = *submesh;
    std::size_t best = 0;
    double best_min = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < sm.n_simplices(); ++s) {
      // smallest barycentric coordinate of x in s
      const auto & t = sm.simplices[s];
      double lmin;
      if (sm.dimension == 2) {
        const double A = sm.simplex_measure(s);
        lmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i) {
          const auto & p1 = sm.nodes[t[(i + 1) % 3]];
          const auto & p2 = sm.nodes[t[(i + 2) % 3]];
          lmin = std::min(lmin, 0.5 * (p1 - x).cross(p2 - x).dot(sm.normal) / A);
        }
      } else {
        Eigen::Matrix3d J;
        for (int k = 0; k < 3; ++k) {
          J.col(k) = sm.nodes[t[k + 1]] - sm.nodes[t[0]];
        }
        const Eigen::Vector3d l = J.inverse() * (x - sm.nodes[t[0]]);
        lmin = std::min({1.0 - l.sum(), l(0), l(1), l(2)});
      }
      if (lmin > best_min) {
        best_min = lmin;
        best = s;
      }
      if (lmin >= 0.0) {
        break;
      }
    }
    return evaluate(best, x);
  }

  Eigen::Vector3d SubmeshField::curl(std::size_t s) const
  {
    const auto & B = gradient[s];
    return {B(2, 1) - B(1, 2), B(0, 2) - B(2, 0), B(1, 0) - B(0, 1)};
  }

  Eigen::Vector3d SubmeshField::integral() const
  {
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (std::size_t s = 0; s < value.size(); ++s) {
      r += submesh->simplex_measure(s) * value[s];
    }
    return r;
  }

  double l2_inner(const SubmeshField & a, const SubmeshField & b)
  {
    if (a.element != b.element || a.submesh->n_simplices() != b.submesh->n_simplices()) {
      throw std::invalid_argument("inner product of fields on different submeshes");
    }
    double r = 0.0;
    for (std::size_t s = 0; s < a.value.size(); ++s) {
      r += affine_dot(a.submesh->simplex_measure(s), second_moment(*a.submesh, s), a.value[s], a.gradient[s],
                      b.value[s], b.gradient[s]);
    }
    return r;
  }

  double l2_norm(const SubmeshField & f) { return std::sqrt(std::max(0.0, l2_inner(f, f))); }

  double l2_distance(const SubmeshField & a, const SubmeshField & b)
  {
    if (a.element != b.element || a.submesh->dimension != b.submesh->dimension) {
      throw std::invalid_argument("l2_distance: fields live on different elements");
    }
    const SubmeshField & fine = a.level >= b.level ? a : b;
    const SubmeshField & coarse = a.level >= b.level ? b : a;
    const auto & sm = *fine.submesh;
    if (fine.level != coarse.level && sm.ancestors.size() <= std::size_t(coarse.level)) {
      throw std::invalid_argument("l2_distance: incompatible submeshes");
    }
    double r = 0.0;
    for (std::size_t s = 0; s < sm.n_simplices(); ++s) {
      const std::size_t t = fine.level == coarse.level ? s : sm.ancestors[coarse.level][s];
      if (t >= coarse.submesh->n_simplices()) {
        throw std::invalid_argument("l2_distance: incompatible submeshes");
      }
      const Eigen::Vector3d cs = sm.simplex_centroid(s);
      const Eigen::Vector3d ct = coarse.submesh->simplex_centroid(t);
      const Eigen::Vector3d v = fine.value[s] - coarse.value[t] - coarse.gradient[t] * (cs - ct);
      const Eigen::Matrix3d B = fine.gradient[s] - coarse.gradient[t];
      r += affine_dot(sm.simplex_measure(s), second_moment(sm, s), v, B, v, B);
    }
    return std::sqrt(std::max(0.0, r));
  }

  double l2_distance(const SubmeshField & a, const AnalyticField & b, int degree)
  {
    const auto & sm = *a.submesh;
    double r = 0.0;
    for (std::size_t s = 0; s < sm.n_simplices(); ++s) {
      const auto & t = sm.simplices[s];
      const QuadratureRule rule =
        sm.dimension == 2 ? triangle_rule(sm.nodes[t[0]], sm.nodes[t[1]], sm.nodes[t[2]], degree)
                          : tetrahedron_rule(sm.nodes[t[0]], sm.nodes[t[1]], sm.nodes[t[2]], sm.nodes[t[3]], degree);
      const Eigen::Vector3d c = sm.simplex_centroid(s);
      for (const auto & q : rule) {
        r += q.w * (a.value[s] + a.gradient[s] * (q.x - c) - b.value(q.x)).squaredNorm();
      }
    }
    return std::sqrt(r);
  }

  double l2_distance(const SubmeshField & a, const PolyField & b)
  {
    return l2_distance(a, AnalyticField::from_poly(b), 2 * std::max(1, b.degree()));
  }

  DofVector reextract_dofs(const SubmeshField & f, const ElementGeometry & g)
  {
    const auto & sm = *f.submesh;
    DofVector d;
    d.space = f.space;
    d.element = f.element;
    d.values = Eigen::VectorXd::Zero(dof_count(f.space, g));
    if (f.space == SpaceTag::Edge3D) {
      // element edge shared by faces k1 < k2
      std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_of;
      std::vector<std::vector<std::size_t>> faces_of(g.edges.size());
      for (std::size_t k = 0; k < g.faces.size(); ++k) {
        for (const auto & fe : g.faces[k].edges) {
          faces_of[fe.edge].push_back(k);
        }
      }
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        edge_of[{faces_of[e][0], faces_of[e][1]}] = e;
      }
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (std::size_t s = 0; s < sm.n_simplices(); ++s) {
        const auto & t = sm.simplices[s];
        for (const auto & pr : pairs3) {
          const std::size_t a = std::min(t[pr[0]], t[pr[1]]);
          const std::size_t b = std::max(t[pr[0]], t[pr[1]]);
          const std::uint64_t mask = sm.facet_mask[a] & sm.facet_mask[b];
          if (std::popcount(mask) < 2 || !seen.insert({a, b}).second) {
            continue;
          }
          const std::size_t k1 = std::countr_zero(mask);
          const std::size_t k2 = std::countr_zero(mask & (mask - 1));
          const std::size_t e = edge_of.at({k1, k2});
          const Eigen::Vector3d mid = 0.5 * (sm.nodes[a] + sm.nodes[b]);
          const double len = (sm.nodes[b] - sm.nodes[a]).norm();
          d.values(e) += len * f.evaluate(s, mid).dot(g.edges[e].tangent);
        }
      }
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        d.values(e) /= g.edges[e].length;
      }
      return d;
    }
    for (const auto & bf : sm.boundary) {
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      double measure;
      if (sm.dimension == 2) {
        centroid = 0.5 * (sm.nodes[bf.nodes[0]] + sm.nodes[bf.nodes[1]]);
        measure = (sm.nodes[bf.nodes[1]] - sm.nodes[bf.nodes[0]]).norm();
      } else {
        const auto & a = sm.nodes[bf.nodes[0]];
        const auto & b = sm.nodes[bf.nodes[1]];
        const auto & c = sm.nodes[bf.nodes[2]];
        centroid = (a + b + c) / 3.0;
        measure = 0.5 * (b - a).cross(c - a).norm();
      }
      const Eigen::Vector3d v = f.evaluate(bf.simplex, centroid);
      switch (f.space) {
      case SpaceTag::Face2D:
        d.values(bf.face) += measure * v.dot(g.polygon().edges[bf.face].normal);
        break;
      case SpaceTag::Edge2D:
        d.values(bf.face) += measure * v.dot(g.polygon().edges[bf.face].tangent);
        break;
      default:
        d.values(bf.face) += measure * v.dot(g.faces[bf.face].normal);
        break;
      }
    }
    for (Eigen::Index k = 0; k < d.values.size(); ++k) {
      d.values(k) /= space_dimension(f.space) == 2 ? g.polygon().edges[k].length : g.faces[k].area;
    }
    return d;
  }

  Eigen::VectorXd constraint_moments(const SubmeshField & f, const ElementGeometry & g)
  {
    const auto & sm = *f.submesh;
    auto accumulate = [&](auto weight) {
      double r = 0.0;
      for (std::size_t s = 0; s < sm.n_simplices(); ++s) {
        Eigen::Vector3d w;
        Eigen::Matrix3d W;
        weight(s, w, W);
        r += affine_dot(sm.simplex_measure(s), second_moment(sm, s), f.value[s], f.gradient[s], w, W);
      }
      return r;
    };
    if (space_dimension(f.space) == 2) {
      const auto & F = g.polygon();
      Eigen::VectorXd m(1);
      if (f.space == SpaceTag::Face2D) {
        m(0) = accumulate([&](std::size_t s, Eigen::Vector3d & w, Eigen::Matrix3d & W) {
          w = F.normal.cross(sm.simplex_centroid(s) - F.barycenter);
          W = skew(F.normal);
        });
      } else {
        m(0) = accumulate([&](std::size_t s, Eigen::Vector3d & w, Eigen::Matrix3d & W) {
          w = sm.simplex_centroid(s) - F.barycenter;
          W = Eigen::Matrix3d::Identity() - F.normal * F.normal.transpose();
        });
      }
      return m;
    }
    Eigen::VectorXd m(3);
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d ej = Eigen::Vector3d::Unit(j);
      if (f.space == SpaceTag::Face3D) {
        m(j) = accumulate([&](std::size_t s, Eigen::Vector3d & w, Eigen::Matrix3d & W) {
          w = (sm.simplex_centroid(s) - g.barycenter).cross(ej);
          W = -skew(ej);
        });
      } else {
        double r = 0.0;
        for (std::size_t s = 0; s < sm.n_simplices(); ++s) {
          r += sm.simplex_measure(s) * f.curl(s).dot((sm.simplex_centroid(s) - g.barycenter).cross(ej));
        }
        m(j) = r;
      }
    }
    return m;
  }

} // namespace vemfacet
