#include <vemfacet/submesh.hpp>
#include <vemfacet/errors.hpp>

#include <cmath>
#include <map>

namespace vemfacet
{

  double SimplexSubmesh::simplex_measure(std::size_t s) const
  {
    const auto & t = simplices[s];
    if (dimension == 2) {
      return 0.5 * (nodes[t[1]] - nodes[t[0]]).cross(nodes[t[2]] - nodes[t[0]]).dot(normal);
    }
    return (nodes[t[1]] - nodes[t[0]]).dot((nodes[t[2]] - nodes[t[0]]).cross(nodes[t[3]] - nodes[t[0]])) / 6.0;
  }

  Eigen::Vector3d SimplexSubmesh::simplex_centroid(std::size_t s) const
  {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < vertices_per_simplex(); ++k) {
      c += nodes[simplices[s][k]];
    }
    return c / double(vertices_per_simplex());
  }

  double SimplexSubmesh::measure() const
  {
    double m = 0.0;
    for (std::size_t s = 0; s < simplices.size(); ++s) {
      m += simplex_measure(s);
    }
    return m;
  }

  double SimplexSubmesh::min_quality() const
  {
    // quality = d * inradius / circumradius proxy: (normalised) inradius over longest edge
    double q = std::numeric_limits<double>::infinity();
    const std::size_t nv = vertices_per_simplex();
    for (std::size_t s = 0; s < simplices.size(); ++s) {
      const auto & t = simplices[s];
      double lmax = 0.0;
      double boundary = 0.0;
      for (std::size_t i = 0; i < nv; ++i) {
        for (std::size_t j = i + 1; j < nv; ++j) {
          lmax = std::max(lmax, (nodes[t[i]] - nodes[t[j]]).norm());
        }
      }
      const double m = std::abs(simplex_measure(s));
      if (dimension == 2) {
        for (std::size_t i = 0; i < 3; ++i) {
          boundary += (nodes[t[(i + 1) % 3]] - nodes[t[i]]).norm();
        }
        // r = 2|T|/perimeter; equilateral: r/l = 1/(2 sqrt 3)
        q = std::min(q, 2.0 * std::sqrt(3.0) * (2.0 * m / boundary) / lmax);
      } else {
        for (std::size_t i = 0; i < 4; ++i) {
          const auto & a = nodes[t[(i + 1) % 4]];
          const auto & b = nodes[t[(i + 2) % 4]];
          const auto & c = nodes[t[(i + 3) % 4]];
          boundary += 0.5 * (b - a).cross(c - a).norm();
        }
        // r = 3|T|/area; regular: r/l = 1/(2 sqrt 6)
        q = std::min(q, 2.0 * std::sqrt(6.0) * (3.0 * m / boundary) / lmax);
      }
    }
    return q;
  }

  namespace
  {
    constexpr std::size_t none = SimplexSubmesh::none;

    void check_facet_count(std::size_t n)
    {
      if (n > 64) {
        throw ValidationError("elements with more than 64 facets are not supported by the sub-tessellation");
      }
    }

    // Recomputes boundary facets from the node facet masks.
    void collect_boundary(SimplexSubmesh & sm)
    {
      sm.boundary.clear();
      const std::size_t nv = sm.vertices_per_simplex();
      for (std::size_t s = 0; s < sm.simplices.size(); ++s) {
        const auto & t = sm.simplices[s];
        for (std::size_t skip = 0; skip < nv; ++skip) {
          std::uint64_t mask = ~std::uint64_t(0);
          std::array<std::size_t, 3> f{none, none, none};
          std::size_t k = 0;
          for (std::size_t i = 0; i < nv; ++i) {
            if (i != skip) {
              mask &= sm.facet_mask[t[i]];
              f[k++] = t[i];
            }
          }
          if (mask != 0) {
            std::size_t face = 0;
            while (!(mask & (std::uint64_t(1) << face))) {
              ++face;
            }
            sm.boundary.push_back({f, s, face});
          }
        }
      }
    }
  } // namespace

  SimplexSubmesh subtessellate_polygon(const FaceGeometry & polygon, int level)
  {
    if (level < 0) {
      throw std::invalid_argument("refinement level must be non-negative");
    }
    const std::size_t n = polygon.points.size();
    check_facet_count(n);
    SimplexSubmesh sm;
    sm.dimension = 2;
    sm.cell = polygon.id;
    sm.normal = polygon.normal;
    sm.nodes = polygon.points;
    sm.nodes.push_back(polygon.barycenter);
    sm.facet_mask.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      // vertex i lies on edges i-1 and i
      sm.facet_mask[i] |= std::uint64_t(1) << i;
      sm.facet_mask[i] |= std::uint64_t(1) << ((i + n - 1) % n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      sm.simplices.push_back({n, i, (i + 1) % n, none});
      if (sm.simplex_measure(i) <= 1e-12 * polygon.diameter * polygon.diameter) {
        throw ValidationError("star-centre visibility failure: polygon " + std::to_string(polygon.id) + ", edge "
                              + std::to_string(i) + " is not visible from the barycentre");
      }
    }
    sm.ancestors.push_back({});
    for (std::size_t s = 0; s < sm.simplices.size(); ++s) {
      sm.ancestors[0].push_back(s);
    }
    collect_boundary(sm);
    for (int l = 0; l < level; ++l) {
      sm = refine(sm);
    }
    return sm;
  }

  SimplexSubmesh subtessellate(const ElementGeometry & g, int level)
  {
    if (g.dimension == 2) {
      auto sm = subtessellate_polygon(g.polygon(), level);
      sm.cell = g.cell;
      return sm;
    }
    if (level < 0) {
      throw std::invalid_argument("refinement level must be non-negative");
    }
    check_facet_count(g.faces.size());
    SimplexSubmesh sm;
    sm.dimension = 3;
    sm.cell = g.cell;
    // nodes: element vertices (sorted global order), barycentre, face barycentres
    std::map<std::size_t, std::size_t> local;
    for (auto v : g.vertices) {
      local[v] = sm.nodes.size();
      sm.facet_mask.push_back(0);
      sm.nodes.push_back(Eigen::Vector3d::Zero());
    }
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
      const auto & f = g.faces[k];
      for (std::size_t i = 0; i < f.loop.size(); ++i) {
        sm.nodes[local.at(f.loop[i])] = f.points[i];
        sm.facet_mask[local.at(f.loop[i])] |= std::uint64_t(1) << k;
      }
    }
    const std::size_t centre = sm.nodes.size();
    sm.nodes.push_back(g.barycenter);
    sm.facet_mask.push_back(0);
    const double tol = 1e-12 * std::pow(g.diameter, 3);
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
      const auto & f = g.faces[k];
      const std::size_t fc = sm.nodes.size();
      sm.nodes.push_back(f.barycenter);
      sm.facet_mask.push_back(std::uint64_t(1) << k);
      for (std::size_t i = 0; i < f.loop.size(); ++i) {
        sm.simplices.push_back({centre, fc, local.at(f.loop[i]), local.at(f.loop[(i + 1) % f.loop.size()])});
        if (sm.simplex_measure(sm.simplices.size() - 1) <= tol) {
          throw ValidationError("star-centre visibility failure: cell " + std::to_string(g.cell) + ", face "
                                + std::to_string(f.id) + " is not visible from the barycentre");
        }
      }
    }
    sm.ancestors.push_back({});
    for (std::size_t s = 0; s < sm.simplices.size(); ++s) {
      sm.ancestors[0].push_back(s);
    }
    collect_boundary(sm);
    for (int l = 0; l < level; ++l) {
      sm = refine(sm);
    }
    return sm;
  }

  SimplexSubmesh subtessellate(const PolytopalMesh & mesh, std::size_t cell, int level)
  {
    return subtessellate(geometry(mesh, cell), level);
  }

  SimplexSubmesh refine(const SimplexSubmesh & in)
  {
    SimplexSubmesh out;
    out.dimension = in.dimension;
    out.cell = in.cell;
    out.level = in.level + 1;
    out.normal = in.normal;
    out.nodes = in.nodes;
    out.facet_mask = in.facet_mask;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> midpoints;
    auto mid = [&out, &midpoints](std::size_t a, std::size_t b) {
      const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      const auto it = midpoints.find(key);
      if (it != midpoints.end()) {
        return it->second;
      }
      const std::size_t id = out.nodes.size();
      out.nodes.push_back(0.5 * (out.nodes[key.first] + out.nodes[key.second]));
      out.facet_mask.push_back(out.facet_mask[key.first] & out.facet_mask[key.second]);
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::size_t> parent;
    for (std::size_t s = 0; s < in.simplices.size(); ++s) {
      const auto & t = in.simplices[s];
      if (in.dimension == 2) {
        const std::size_t m01 = mid(t[0], t[1]);
        const std::size_t m12 = mid(t[1], t[2]);
        const std::size_t m02 = mid(t[0], t[2]);
        out.simplices.push_back({t[0], m01, m02, none});
        out.simplices.push_back({m01, t[1], m12, none});
        out.simplices.push_back({m02, m12, t[2], none});
        out.simplices.push_back({m01, m12, m02, none});
        parent.insert(parent.end(), 4, s);
        continue;
      }
      std::size_t m[4][4];
      for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
          m[i][j] = m[j][i] = mid(t[i], t[j]);
        }
      }
      out.simplices.push_back({t[0], m[0][1], m[0][2], m[0][3]});
      out.simplices.push_back({m[0][1], t[1], m[1][2], m[1][3]});
      out.simplices.push_back({m[0][2], m[1][2], t[2], m[2][3]});
      out.simplices.push_back({m[0][3], m[1][3], m[2][3], t[3]});
      // inner octahedron split along its shortest diagonal
      const std::array<std::array<int, 4>, 3> pairs{{{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}}};
      int best = 0;
      double best_len = std::numeric_limits<double>::infinity();
      for (int p = 0; p < 3; ++p) {
        const auto & q = pairs[p];
        const double len = (out.nodes[m[q[0]][q[1]]] - out.nodes[m[q[2]][q[3]]]).norm();
        if (len < best_len - 1e-14 * len) {
          best_len = len;
          best = p;
        }
      }
      const auto & q = pairs[best];
      const std::size_t a = m[q[0]][q[1]];
      const std::size_t b = m[q[2]][q[3]];
      // equatorial cycle from the two remaining opposite pairs
      const auto & r1 = pairs[(best + 1) % 3];
      const auto & r2 = pairs[(best + 2) % 3];
      const std::array<std::size_t, 4> ring{m[r1[0]][r1[1]], m[r2[0]][r2[1]], m[r1[2]][r1[3]], m[r2[2]][r2[3]]};
      for (int k = 0; k < 4; ++k) {
        out.simplices.push_back({a, b, ring[k], ring[(k + 1) % 4]});
      }
      parent.insert(parent.end(), 8, s);
    }
    if (out.dimension == 3) {
      for (std::size_t s = 0; s < out.simplices.size(); ++s) {
        if (out.simplex_measure(s) < 0) {
          std::swap(out.simplices[s][2], out.simplices[s][3]);
        }
      }
    }
    out.ancestors.resize(in.ancestors.size() + 1);
    for (std::size_t l = 0; l < in.ancestors.size(); ++l) {
      out.ancestors[l].resize(out.simplices.size());
      for (std::size_t s = 0; s < out.simplices.size(); ++s) {
        out.ancestors[l][s] = in.ancestors[l][parent[s]];
      }
    }
    out.ancestors.back().resize(out.simplices.size());
    for (std::size_t s = 0; s < out.simplices.size(); ++s) {
      out.ancestors.back()[s] = s;
    }
    collect_boundary(out);
    return out;
  }

} // namespace vemfacet
