#include <vemfacet/mesh.hpp>
#include <vemfacet/errors.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace vemfacet
{

  namespace
  {
    std::string str(std::size_t i) { return std::to_string(i); }

    std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b)
    {
      return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

    std::vector<std::array<std::size_t, 2>> collect_edges(const std::vector<std::vector<std::size_t>> & loops)
    {
      std::vector<std::array<std::size_t, 2>> edges;
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (const auto & loop : loops) {
        for (std::size_t i = 0; i < loop.size(); ++i) {
          const auto k = key(loop[i], loop[(i + 1) % loop.size()]);
          if (seen.insert(k).second) {
            edges.push_back({k.first, k.second});
          }
        }
      }
      return edges;
    }

    double cross2(const Eigen::Vector2d & a, const Eigen::Vector2d & b) { return a(0) * b(1) - a(1) * b(0); }

    // Proper or touching intersection of closed segments [p1,p2] and [q1,q2].
    bool segments_intersect(const Eigen::Vector2d & p1, const Eigen::Vector2d & p2, const Eigen::Vector2d & q1,
                            const Eigen::Vector2d & q2, double eps)
    {
      auto orient = [eps](const Eigen::Vector2d & a, const Eigen::Vector2d & b, const Eigen::Vector2d & c) {
        const double v = cross2(b - a, c - a);
        return std::abs(v) <= eps ? 0 : (v > 0 ? 1 : -1);
      };
      auto on_segment = [eps](const Eigen::Vector2d & a, const Eigen::Vector2d & b, const Eigen::Vector2d & c) {
        return std::min(a(0), b(0)) - eps <= c(0) && c(0) <= std::max(a(0), b(0)) + eps
               && std::min(a(1), b(1)) - eps <= c(1) && c(1) <= std::max(a(1), b(1)) + eps;
      };
      const int o1 = orient(p1, p2, q1);
      const int o2 = orient(p1, p2, q2);
      const int o3 = orient(q1, q2, p1);
      const int o4 = orient(q1, q2, p2);
      if (o1 != o2 && o3 != o4) {
        return true;
      }
      return (o1 == 0 && on_segment(p1, p2, q1)) || (o2 == 0 && on_segment(p1, p2, q2))
             || (o3 == 0 && on_segment(q1, q2, p1)) || (o4 == 0 && on_segment(q1, q2, p2));
    }

    // Returns an empty string when the 2D loop is simple, else a description of the defect.
    std::string simple_polygon_defect(const std::vector<Eigen::Vector2d> & pts)
    {
      const std::size_t n = pts.size();
      double diam = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          diam = std::max(diam, (pts[i] - pts[j]).norm());
        }
      }
      const double eps = 1e-12 * diam * diam;
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d a = pts[(i + 1) % n] - pts[i];
        const Eigen::Vector2d b = pts[(i + 2) % n] - pts[(i + 1) % n];
        if (a.norm() <= 1e-14 * diam) {
          return "degenerate edge";
        }
        if (std::abs(cross2(a, b)) <= eps && a.dot(b) < 0) {
          return "edge folds back onto its predecessor";
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
          if (i == 0 && j == n - 1) {
            continue;
          }
          if (segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n], eps)) {
            return "self-intersecting loop";
          }
        }
      }
      return {};
    }

    Eigen::Vector3d pick_e1(const Eigen::Vector3d & n)
    {
      const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
      int best = 0;
      for (int k = 1; k < 3; ++k) {
        if (std::abs(n(k)) < std::abs(n(best)) - 1e-12) {
          best = k;
        }
      }
      Eigen::Vector3d e = I.col(best) - n.dot(I.col(best)) * n;
      return e.normalized();
    }
  } // namespace

  //------------------------------------------------------------------------------
  // Construction
  //------------------------------------------------------------------------------

  PolytopalMesh PolytopalMesh::make_2d(std::vector<Eigen::Vector3d> vertices,
                                       std::vector<std::vector<std::size_t>> cells,
                                       std::vector<std::array<std::size_t, 2>> edges)
  {
    PolytopalMesh mesh;
    mesh.m_dim = 2;
    mesh.m_vertices = std::move(vertices);
    mesh.m_cell_loops = std::move(cells);
    mesh.m_edges = edges.empty() ? collect_edges(mesh.m_cell_loops) : std::move(edges);
    mesh.build_edge_index();
    mesh.validate();
    return mesh;
  }

  PolytopalMesh PolytopalMesh::make_3d(std::vector<Eigen::Vector3d> vertices,
                                       std::vector<std::vector<std::size_t>> faces,
                                       std::vector<std::vector<OrientedFace>> cells,
                                       std::vector<std::array<std::size_t, 2>> edges)
  {
    PolytopalMesh mesh;
    mesh.m_dim = 3;
    mesh.m_vertices = std::move(vertices);
    mesh.m_faces = std::move(faces);
    mesh.m_cell_faces = std::move(cells);
    mesh.m_edges = edges.empty() ? collect_edges(mesh.m_faces) : std::move(edges);
    mesh.build_edge_index();
    mesh.validate();
    return mesh;
  }

  void PolytopalMesh::build_edge_index()
  {
    m_edge_index.clear();
    for (std::size_t i = 0; i < m_edges.size(); ++i) {
      const auto & e = m_edges[i];
      if (e[0] >= m_vertices.size() || e[1] >= m_vertices.size()) {
        throw ValidationError("edge " + str(i) + ": vertex id out of range");
      }
      if (e[0] == e[1]) {
        throw ValidationError("edge " + str(i) + ": repeated vertex");
      }
      if (!m_edge_index.emplace(key(e[0], e[1]), i).second) {
        throw ValidationError("edge " + str(i) + ": duplicate of edge " + str(m_edge_index.at(key(e[0], e[1]))));
      }
    }
  }

  std::size_t PolytopalMesh::edge_id(std::size_t a, std::size_t b) const
  {
    const auto it = m_edge_index.find(key(a, b));
    if (it == m_edge_index.end()) {
      throw std::out_of_range("no edge joins vertices " + str(a) + " and " + str(b));
    }
    return it->second;
  }

  std::vector<std::size_t> PolytopalMesh::cell_edges(std::size_t cell) const
  {
    std::set<std::size_t> ids;
    if (m_dim == 2) {
      const auto & loop = m_cell_loops.at(cell);
      for (std::size_t i = 0; i < loop.size(); ++i) {
        ids.insert(edge_id(loop[i], loop[(i + 1) % loop.size()]));
      }
    } else {
      for (const auto & of : m_cell_faces.at(cell)) {
        const auto & loop = m_faces.at(of.face);
        for (std::size_t i = 0; i < loop.size(); ++i) {
          ids.insert(edge_id(loop[i], loop[(i + 1) % loop.size()]));
        }
      }
    }
    return {ids.begin(), ids.end()};
  }

  std::vector<std::size_t> PolytopalMesh::cell_vertices(std::size_t cell) const
  {
    std::set<std::size_t> ids;
    if (m_dim == 2) {
      ids.insert(m_cell_loops.at(cell).begin(), m_cell_loops.at(cell).end());
    } else {
      for (const auto & of : m_cell_faces.at(cell)) {
        ids.insert(m_faces.at(of.face).begin(), m_faces.at(of.face).end());
      }
    }
    return {ids.begin(), ids.end()};
  }

  //------------------------------------------------------------------------------
  // Validation
  //------------------------------------------------------------------------------

  void PolytopalMesh::validate() const
  {
    if (m_dim != 2 && m_dim != 3) {
      throw ValidationError("mesh dimension must be 2 or 3");
    }
    for (std::size_t i = 0; i < m_vertices.size(); ++i) {
      if (!m_vertices[i].allFinite() || (m_dim == 2 && m_vertices[i](2) != 0.0)) {
        throw ValidationError("vertex " + str(i) + ": invalid coordinates");
      }
    }

    // Checks a vertex loop and returns its points; `what` names the entity in messages.
    auto check_loop = [this](const std::vector<std::size_t> & loop, const std::string & what) {
      if (loop.size() < 3) {
        throw ValidationError(what + ": fewer than three vertices");
      }
      std::set<std::size_t> distinct;
      std::vector<Eigen::Vector3d> pts;
      for (std::size_t i = 0; i < loop.size(); ++i) {
        if (loop[i] >= m_vertices.size()) {
          throw ValidationError(what + ": vertex id " + str(loop[i]) + " out of range");
        }
        if (!distinct.insert(loop[i]).second) {
          throw ValidationError(what + ": repeated vertex " + str(loop[i]));
        }
        if (!m_edge_index.count(key(loop[i], loop[(i + 1) % loop.size()]))) {
          throw ValidationError(what + ": no edge joins vertices " + str(loop[i]) + " and "
                                + str(loop[(i + 1) % loop.size()]));
        }
        pts.push_back(m_vertices[loop[i]]);
      }
      return pts;
    };

    if (m_dim == 2) {
      // direction (+1 low->high) in which each cell traverses each edge
      std::vector<std::vector<std::pair<std::size_t, int>>> traversals(m_edges.size());
      for (std::size_t c = 0; c < m_cell_loops.size(); ++c) {
        const std::string what = "cell " + str(c);
        const auto pts = check_loop(m_cell_loops[c], what);
        std::vector<Eigen::Vector2d> p2;
        double signed_area = 0.0;
        double diam = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          p2.emplace_back(pts[i](0), pts[i](1));
          const auto & q = pts[(i + 1) % pts.size()];
          signed_area += 0.5 * (pts[i](0) * q(1) - q(0) * pts[i](1));
          for (std::size_t j = i + 1; j < pts.size(); ++j) {
            diam = std::max(diam, (pts[i] - pts[j]).norm());
          }
        }
        if (std::abs(signed_area) <= 1e-12 * diam * diam) {
          throw ValidationError(what + ": zero area");
        }
        if (signed_area < 0) {
          throw ValidationError(what + ": loop is clockwise (cells must be counterclockwise)");
        }
        const std::string defect = simple_polygon_defect(p2);
        if (!defect.empty()) {
          throw ValidationError(what + ": " + defect);
        }
        const auto & loop = m_cell_loops[c];
        for (std::size_t i = 0; i < loop.size(); ++i) {
          const std::size_t a = loop[i];
          const std::size_t b = loop[(i + 1) % loop.size()];
          const std::size_t e = edge_id(a, b);
          traversals[e].emplace_back(c, a < b ? 1 : -1);
        }
      }
      for (std::size_t e = 0; e < m_edges.size(); ++e) {
        const auto & t = traversals[e];
        if (t.empty()) {
          throw ValidationError("edge " + str(e) + ": not used by any cell");
        }
        if (t.size() > 2) {
          throw ValidationError("edge " + str(e) + ": shared by more than two cells");
        }
        if (t.size() == 2 && t[0].second == t[1].second) {
          throw ValidationError("edge " + str(e) + ": cells " + str(t[0].first) + " and " + str(t[1].first)
                                + " traverse it in the same direction");
        }
      }
      return;
    }

    // 3D faces
    for (std::size_t f = 0; f < m_faces.size(); ++f) {
      const std::string what = "face " + str(f);
      const auto pts = check_loop(m_faces[f], what);
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      for (const auto & p : pts) {
        centroid += p;
      }
      centroid /= double(pts.size());
      Eigen::MatrixXd A(pts.size(), 3);
      double diam = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        A.row(i) = (pts[i] - centroid).transpose();
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
          diam = std::max(diam, (pts[i] - pts[j]).norm());
        }
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
      const Eigen::Vector3d plane_normal = svd.matrixV().col(2);
      double dev = 0.0;
      for (const auto & p : pts) {
        dev = std::max(dev, std::abs((p - centroid).dot(plane_normal)));
      }
      if (dev > tol_planar * diam) {
        throw ValidationError(what + ": not planar (deviation " + std::to_string(dev / diam) + " relative)");
      }
      Eigen::Vector3d newell = Eigen::Vector3d::Zero();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        newell += pts[i].cross(pts[(i + 1) % pts.size()]);
      }
      if (newell.norm() * 0.5 <= 1e-12 * diam * diam) {
        throw ValidationError(what + ": zero area");
      }
      const Eigen::Vector3d n = newell.normalized();
      const Eigen::Vector3d e1 = pick_e1(n);
      const Eigen::Vector3d e2 = n.cross(e1);
      std::vector<Eigen::Vector2d> p2;
      for (const auto & p : pts) {
        p2.emplace_back((p - centroid).dot(e1), (p - centroid).dot(e2));
      }
      const std::string defect = simple_polygon_defect(p2);
      if (!defect.empty()) {
        throw ValidationError(what + ": " + defect);
      }
    }

    // 3D cells
    std::vector<std::vector<std::pair<std::size_t, int>>> face_users(m_faces.size());
    for (std::size_t c = 0; c < m_cell_faces.size(); ++c) {
      const std::string what = "cell " + str(c);
      const auto & cf = m_cell_faces[c];
      if (cf.size() < 4) {
        throw ValidationError(what + ": fewer than four faces");
      }
      std::set<std::size_t> seen;
      for (const auto & of : cf) {
        if (of.face >= m_faces.size()) {
          throw ValidationError(what + ": face id " + str(of.face) + " out of range");
        }
        if (of.sign != 1 && of.sign != -1) {
          throw ValidationError(what + ": orientation of face " + str(of.face) + " must be +1 or -1");
        }
        if (!seen.insert(of.face).second) {
          throw ValidationError(what + ": face " + str(of.face) + " listed twice");
        }
        face_users[of.face].emplace_back(c, of.sign);
      }
      // Each edge of a closed, consistently oriented surface is traversed once in each direction.
      std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> directed;
      for (std::size_t k = 0; k < cf.size(); ++k) {
        auto loop = m_faces[cf[k].face];
        if (cf[k].sign < 0) {
          std::reverse(loop.begin(), loop.end());
        }
        for (std::size_t i = 0; i < loop.size(); ++i) {
          directed[{loop[i], loop[(i + 1) % loop.size()]}].push_back(k);
        }
      }
      std::vector<int> conflicts(cf.size(), 0);
      bool bad = false;
      for (const auto & [dir, users] : directed) {
        const bool has_reverse = directed.count({dir.second, dir.first}) > 0;
        if (users.size() > 1) {
          bad = true;
          for (auto k : users) {
            ++conflicts[k];
          }
        } else if (!has_reverse) {
          throw ValidationError(what + ": not closed (edge " + str(dir.first) + "-" + str(dir.second)
                                + " belongs to a single face)");
        }
      }
      if (bad) {
        // blame the face whose edges disagree with most of its neighbours
        std::size_t worst = 0;
        double worst_ratio = -1.0;
        for (std::size_t k = 0; k < cf.size(); ++k) {
          const double ratio = double(conflicts[k]) / double(m_faces[cf[k].face].size());
          if (ratio > worst_ratio) {
            worst_ratio = ratio;
            worst = k;
          }
        }
        throw ValidationError("face " + str(cf[worst].face) + ": loop orientation inconsistent with the other faces of "
                              + what);
      }
      // signed volume must be positive (normals outward)
      Eigen::Vector3d c0 = Eigen::Vector3d::Zero();
      std::size_t count = 0;
      for (const auto & of : cf) {
        for (auto v : m_faces[of.face]) {
          c0 += m_vertices[v];
          ++count;
        }
      }
      c0 /= double(count);
      double vol = 0.0;
      double diam = 0.0;
      for (const auto & of : cf) {
        const auto & loop = m_faces[of.face];
        for (std::size_t i = 0; i < loop.size(); ++i) {
          const Eigen::Vector3d a = m_vertices[loop[0]] - c0;
          const Eigen::Vector3d b = m_vertices[loop[i]] - c0;
          const Eigen::Vector3d d = m_vertices[loop[(i + 1) % loop.size()]] - c0;
          vol += of.sign * a.dot(b.cross(d)) / 6.0;
          diam = std::max(diam, 2.0 * b.norm());
        }
      }
      if (std::abs(vol) <= 1e-12 * diam * diam * diam) {
        throw ValidationError(what + ": zero volume");
      }
      if (vol < 0) {
        throw ValidationError(what + ": face normals point inward (all orientation signs flipped)");
      }
    }
    for (std::size_t f = 0; f < m_faces.size(); ++f) {
      const auto & u = face_users[f];
      if (u.empty()) {
        throw ValidationError("face " + str(f) + ": not used by any cell");
      }
      if (u.size() > 2) {
        throw ValidationError("face " + str(f) + ": shared by more than two cells");
      }
      if (u.size() == 2 && u[0].second == u[1].second) {
        throw ValidationError("face " + str(f) + ": cells " + str(u[0].first) + " and " + str(u[1].first)
                              + " use the same orientation sign");
      }
    }
  }

  //------------------------------------------------------------------------------
  // File format
  //------------------------------------------------------------------------------

  namespace
  {
    class TokenReader
    {
    public:
      explicit TokenReader(const std::string & text)
      {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
          ++lineno;
          const auto hash = line.find('#');
          if (hash != std::string::npos) {
            line.erase(hash);
          }
          std::istringstream ls(line);
          std::string tok;
          while (ls >> tok) {
            m_tokens.emplace_back(tok, lineno);
          }
        }
      }

      bool done() const { return m_pos >= m_tokens.size(); }

      std::string word(const char * what)
      {
        if (done()) {
          throw ParseError(std::string("unexpected end of file while reading ") + what);
        }
        return m_tokens[m_pos++].first;
      }

      void expect(const std::string & kw)
      {
        const std::size_t line = done() ? 0 : m_tokens[m_pos].second;
        const auto w = word(kw.c_str());
        if (w != kw) {
          throw ParseError("line " + str(line) + ": expected '" + kw + "', found '" + w + "'");
        }
      }

      bool peek(const std::string & kw) const { return !done() && m_tokens[m_pos].first == kw; }

      std::size_t index(const char * what)
      {
        const std::size_t line = done() ? 0 : m_tokens[m_pos].second;
        const auto w = word(what);
        std::size_t used = 0;
        long long v = 0;
        try {
          v = std::stoll(w, &used);
        } catch (const std::exception &) {
          used = 0;
        }
        if (used != w.size() || v < 0) {
          throw ParseError("line " + str(line) + ": expected a non-negative integer for " + what + ", found '" + w
                           + "'");
        }
        return std::size_t(v);
      }

      int sign(const char * what)
      {
        const std::size_t line = done() ? 0 : m_tokens[m_pos].second;
        const auto w = word(what);
        if (w == "1" || w == "+1") {
          return 1;
        }
        if (w == "-1") {
          return -1;
        }
        throw ParseError("line " + str(line) + ": expected +1 or -1 for " + what + ", found '" + w + "'");
      }

      double real(const char * what)
      {
        const std::size_t line = done() ? 0 : m_tokens[m_pos].second;
        const auto w = word(what);
        std::size_t used = 0;
        double v = 0;
        try {
          v = std::stod(w, &used);
        } catch (const std::exception &) {
          used = 0;
        }
        if (used != w.size()) {
          throw ParseError("line " + str(line) + ": expected a number for " + what + ", found '" + w + "'");
        }
        return v;
      }

    private:
      std::vector<std::pair<std::string, std::size_t>> m_tokens;
      std::size_t m_pos = 0;
    };
  } // namespace

  PolytopalMesh parse_mesh(const std::string & text)
  {
    TokenReader in(text);
    in.expect("polymesh-v1");
    in.expect("dimension");
    const std::size_t dim = in.index("dimension");
    if (dim != 2 && dim != 3) {
      throw ParseError("dimension must be 2 or 3");
    }
    in.expect("vertices");
    const std::size_t nv = in.index("vertex count");
    std::vector<Eigen::Vector3d> vertices(nv, Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < nv; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        vertices[i](k) = in.real("vertex coordinate");
      }
    }
    in.expect("edges");
    const std::size_t ne = in.index("edge count");
    std::vector<std::array<std::size_t, 2>> edges(ne);
    for (std::size_t i = 0; i < ne; ++i) {
      edges[i][0] = in.index("edge vertex");
      edges[i][1] = in.index("edge vertex");
    }
    auto read_loops = [&in](std::size_t count) {
      std::vector<std::vector<std::size_t>> loops(count);
      for (auto & loop : loops) {
        const std::size_t n = in.index("loop length");
        for (std::size_t k = 0; k < n; ++k) {
          loop.push_back(in.index("loop vertex"));
        }
      }
      return loops;
    };
    if (dim == 2) {
      if (in.peek("faces")) {
        in.expect("faces");
        if (in.index("face count") != 0) {
          throw ParseError("2D meshes have no face section (faces are edges)");
        }
      }
      in.expect("cells");
      auto cells = read_loops(in.index("cell count"));
      if (!in.done()) {
        throw ParseError("trailing content after cell list");
      }
      return PolytopalMesh::make_2d(std::move(vertices), std::move(cells), std::move(edges));
    }
    in.expect("faces");
    auto faces = read_loops(in.index("face count"));
    in.expect("cells");
    const std::size_t nc = in.index("cell count");
    std::vector<std::vector<PolytopalMesh::OrientedFace>> cells(nc);
    for (auto & cell : cells) {
      const std::size_t n = in.index("cell face count");
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t f = in.index("cell face");
        const int s = in.sign("face orientation");
        cell.push_back({f, s});
      }
    }
    if (!in.done()) {
      throw ParseError("trailing content after cell list");
    }
    return PolytopalMesh::make_3d(std::move(vertices), std::move(faces), std::move(cells), std::move(edges));
  }

  PolytopalMesh load_mesh(const std::string & path)
  {
    std::ifstream in(path);
    if (!in) {
      throw ParseError("cannot open mesh file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_mesh(buf.str());
  }

  std::string format_mesh(const PolytopalMesh & mesh)
  {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "polymesh-v1\n";
    out << "dimension " << mesh.dimension() << "\n";
    out << "vertices " << mesh.n_vertices() << "\n";
    for (const auto & v : mesh.vertices()) {
      out << v(0) << " " << v(1);
      if (mesh.dimension() == 3) {
        out << " " << v(2);
      }
      out << "\n";
    }
    out << "edges " << mesh.n_edges() << "\n";
    for (const auto & e : mesh.edges()) {
      out << e[0] << " " << e[1] << "\n";
    }
    auto write_loop = [&out](const std::vector<std::size_t> & loop) {
      out << loop.size();
      for (auto v : loop) {
        out << " " << v;
      }
      out << "\n";
    };
    if (mesh.dimension() == 3) {
      out << "faces " << mesh.faces().size() << "\n";
      for (const auto & f : mesh.faces()) {
        write_loop(f);
      }
    }
    out << "cells " << mesh.n_cells() << "\n";
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      if (mesh.dimension() == 2) {
        write_loop(mesh.cell_loop(c));
      } else {
        const auto & cf = mesh.cell_faces(c);
        out << cf.size();
        for (const auto & of : cf) {
          out << " " << of.face << " " << (of.sign > 0 ? "1" : "-1");
        }
        out << "\n";
      }
    }
    return out.str();
  }

  void save_mesh(const PolytopalMesh & mesh, const std::string & path)
  {
    std::ofstream out(path);
    if (!out) {
      throw ParseError("cannot write mesh file '" + path + "'");
    }
    out << format_mesh(mesh);
  }

  //------------------------------------------------------------------------------
  // Geometry
  //------------------------------------------------------------------------------

  FaceGeometry polygon_geometry(const std::vector<Eigen::Vector3d> & points)
  {
    FaceGeometry g;
    g.id = 0;
    g.orientation = 1;
    g.points = points;
    const std::size_t n = points.size();
    Eigen::Vector3d newell = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      newell += points[i].cross(points[(i + 1) % n]);
    }
    g.area = 0.5 * newell.norm();
    g.normal = newell.normalized();
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double total = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double s = 0.5 * (points[i] - points[0]).cross(points[i + 1] - points[0]).dot(g.normal);
      c += s * (points[0] + points[i] + points[i + 1]) / 3.0;
      total += s;
    }
    g.barycenter = c / total;
    g.diameter = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        g.diameter = std::max(g.diameter, (points[i] - points[j]).norm());
      }
    }
    g.e1 = pick_e1(g.normal);
    g.e2 = g.normal.cross(g.e1);
    for (std::size_t i = 0; i < n; ++i) {
      FaceEdge fe;
      fe.edge = i;
      fe.global_edge = i;
      fe.start = points[i];
      fe.end = points[(i + 1) % n];
      fe.length = (fe.end - fe.start).norm();
      fe.midpoint = 0.5 * (fe.start + fe.end);
      fe.tangent = (fe.end - fe.start) / fe.length;
      fe.normal = fe.tangent.cross(g.normal);
      fe.sign = 1;
      g.edges.push_back(fe);
    }
    return g;
  }

  ElementGeometry geometry(const PolytopalMesh & mesh, std::size_t cell)
  {
    if (cell >= mesh.n_cells()) {
      throw std::out_of_range("cell id " + std::to_string(cell) + " out of range");
    }
    ElementGeometry g;
    g.dimension = mesh.dimension();
    g.cell = cell;
    g.vertices = mesh.cell_vertices(cell);

    auto make_edge = [&mesh](std::size_t id) {
      EdgeGeometry e;
      e.id = id;
      const auto & ev = mesh.edge(id);
      e.vertices = {std::min(ev[0], ev[1]), std::max(ev[0], ev[1])};
      const Eigen::Vector3d a = mesh.vertex(e.vertices[0]);
      const Eigen::Vector3d b = mesh.vertex(e.vertices[1]);
      e.length = (b - a).norm();
      e.midpoint = 0.5 * (a + b);
      e.tangent = (b - a) / e.length;
      return e;
    };

    // fills FaceEdge bookkeeping given the local edge lookup
    auto attach_edges = [&mesh](FaceGeometry & face, const std::vector<EdgeGeometry> & edges,
                                const std::map<std::size_t, std::size_t> & local) {
      for (std::size_t i = 0; i < face.loop.size(); ++i) {
        const std::size_t a = face.loop[i];
        const std::size_t b = face.loop[(i + 1) % face.loop.size()];
        const std::size_t id = mesh.edge_id(a, b);
        auto & fe = face.edges[i];
        fe.global_edge = id;
        fe.edge = local.at(id);
        fe.sign = fe.tangent.dot(edges[fe.edge].tangent) > 0 ? 1 : -1;
      }
    };

    if (mesh.dimension() == 2) {
      const auto & loop = mesh.cell_loop(cell);
      std::vector<Eigen::Vector3d> pts;
      for (auto v : loop) {
        pts.push_back(mesh.vertex(v));
      }
      FaceGeometry poly = polygon_geometry(pts);
      poly.id = cell;
      poly.loop = loop;
      std::map<std::size_t, std::size_t> local;
      for (std::size_t i = 0; i < loop.size(); ++i) {
        const std::size_t id = mesh.edge_id(loop[i], loop[(i + 1) % loop.size()]);
        local[id] = i;
        g.edges.push_back(make_edge(id));
      }
      attach_edges(poly, g.edges, local);
      g.measure = poly.area;
      g.diameter = poly.diameter;
      g.barycenter = poly.barycenter;
      g.faces.push_back(std::move(poly));
      return g;
    }

    std::map<std::size_t, std::size_t> local;
    for (auto id : mesh.cell_edges(cell)) {
      local[id] = g.edges.size();
      g.edges.push_back(make_edge(id));
    }
    for (const auto & of : mesh.cell_faces(cell)) {
      auto loop = mesh.face_loop(of.face);
      if (of.sign < 0) {
        std::reverse(loop.begin() + 1, loop.end());
      }
      std::vector<Eigen::Vector3d> pts;
      for (auto v : loop) {
        pts.push_back(mesh.vertex(v));
      }
      FaceGeometry face = polygon_geometry(pts);
      face.id = of.face;
      face.orientation = of.sign;
      face.loop = loop;
      attach_edges(face, g.edges, local);
      g.faces.push_back(std::move(face));
    }
    Eigen::Vector3d c0 = Eigen::Vector3d::Zero();
    for (auto v : g.vertices) {
      c0 += mesh.vertex(v);
    }
    c0 /= double(g.vertices.size());
    double vol = 0.0;
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
    for (const auto & face : g.faces) {
      const std::size_t n = face.points.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d & p = face.points[i];
        const Eigen::Vector3d & q = face.points[(i + 1) % n];
        const double v = (face.barycenter - c0).dot((p - c0).cross(q - c0)) / 6.0;
        vol += v;
        moment += v * (c0 + face.barycenter + p + q) / 4.0;
      }
    }
    g.measure = vol;
    g.barycenter = moment / vol;
    g.diameter = 0.0;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
      for (std::size_t j = i + 1; j < g.vertices.size(); ++j) {
        g.diameter = std::max(g.diameter, (mesh.vertex(g.vertices[i]) - mesh.vertex(g.vertices[j])).norm());
      }
    }
    return g;
  }

  //------------------------------------------------------------------------------
  // Regularity
  //------------------------------------------------------------------------------

  RegularityMetrics regularity_report(const PolytopalMesh & mesh, double gamma_threshold)
  {
    RegularityMetrics r;
    r.min_gamma = std::numeric_limits<double>::infinity();
    r.min_face_ratio = std::numeric_limits<double>::infinity();
    r.min_edge_ratio = std::numeric_limits<double>::infinity();
    r.max_face_count = 0;
    r.max_face_edges = 0;
    r.max_diameter = 0.0;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      const auto g = geometry(mesh, c);
      CellRegularity cr;
      double dmin = std::numeric_limits<double>::infinity();
      cr.min_face_ratio = 1.0;
      cr.min_edge_ratio = 1.0;
      cr.max_face_edges = 0;
      if (g.dimension == 2) {
        const auto & poly = g.polygon();
        for (const auto & e : poly.edges) {
          dmin = std::min(dmin, std::abs((g.barycenter - e.start).dot(e.normal)));
          cr.min_edge_ratio = std::min(cr.min_edge_ratio, e.length / poly.diameter);
        }
        cr.face_count = poly.edges.size();
        cr.max_face_edges = 2;
      } else {
        for (const auto & f : g.faces) {
          dmin = std::min(dmin, std::abs((f.barycenter - g.barycenter).dot(f.normal)));
          cr.min_face_ratio = std::min(cr.min_face_ratio, f.diameter / g.diameter);
          for (const auto & e : f.edges) {
            cr.min_edge_ratio = std::min(cr.min_edge_ratio, e.length / f.diameter);
          }
          cr.max_face_edges = std::max(cr.max_face_edges, f.edges.size());
        }
        cr.face_count = g.faces.size();
      }
      cr.gamma = 2.0 * dmin / g.diameter;
      r.min_gamma = std::min(r.min_gamma, cr.gamma);
      r.min_face_ratio = std::min(r.min_face_ratio, cr.min_face_ratio);
      r.min_edge_ratio = std::min(r.min_edge_ratio, cr.min_edge_ratio);
      r.max_face_count = std::max(r.max_face_count, cr.face_count);
      r.max_face_edges = std::max(r.max_face_edges, cr.max_face_edges);
      r.max_diameter = std::max(r.max_diameter, g.diameter);
      if (cr.gamma < gamma_threshold) {
        r.flagged.push_back(c);
      }
      r.cells.push_back(cr);
    }
    return r;
  }

  //------------------------------------------------------------------------------
  // Families
  //------------------------------------------------------------------------------

  namespace
  {
    std::size_t cells_per_side(double h)
    {
      if (!(h > 0.0) || h > 1.0) {
        throw ValidationError("mesh size h must lie in (0, 1]");
      }
      return std::max<std::size_t>(1, std::size_t(std::lround(1.0 / h)));
    }

    PolytopalMesh squares(std::size_t n, double jitter, std::uint64_t seed)
    {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> U(-1.0, 1.0);
      const double h = 1.0 / double(n);
      std::vector<Eigen::Vector3d> v;
      for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t i = 0; i <= n; ++i) {
          Eigen::Vector3d p(i * h, j * h, 0.0);
          if (jitter > 0.0) {
            const double dx = U(rng);
            const double dy = U(rng);
            if (i > 0 && i < n) {
              p(0) += jitter * h * dx;
            }
            if (j > 0 && j < n) {
              p(1) += jitter * h * dy;
            }
          }
          v.push_back(p);
        }
      }
      auto id = [n](std::size_t i, std::size_t j) { return i + (n + 1) * j; };
      std::vector<std::vector<std::size_t>> cells;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
          cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
        }
      }
      return PolytopalMesh::make_2d(std::move(v), std::move(cells));
    }

    PolytopalMesh hexagons(std::size_t n)
    {
      // Zig-zag rows: interior horizontal lines oscillate by +-delta so that every full cell is a
      // convex hexagon; odd rows are shifted by half a cell and end with quadrilaterals.
      const std::size_t m = std::max<std::size_t>(1, std::size_t(std::lround(2.0 * double(n) / std::sqrt(3.0))));
      const double delta = 1.0 / 6.0;
      const std::size_t np = 2 * n + 1;
      std::vector<Eigen::Vector3d> v;
      for (std::size_t j = 0; j <= m; ++j) {
        for (std::size_t k = 0; k < np; ++k) {
          double y = double(j) / double(m);
          if (j > 0 && j < m) {
            y += delta * (((k + j) % 2 == 0) ? 1.0 : -1.0) / double(m);
          }
          v.emplace_back(double(k) / double(2 * n), y, 0.0);
        }
      }
      auto id = [np](std::size_t j, std::size_t k) { return j * np + k; };
      std::vector<std::vector<std::size_t>> cells;
      for (std::size_t j = 0; j < m; ++j) {
        if (j % 2 == 0) {
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = 2 * i;
            cells.push_back({id(j, k), id(j, k + 1), id(j, k + 2), id(j + 1, k + 2), id(j + 1, k + 1), id(j + 1, k)});
          }
        } else {
          cells.push_back({id(j, 0), id(j, 1), id(j + 1, 1), id(j + 1, 0)});
          for (std::size_t i = 1; i < n; ++i) {
            const std::size_t k = 2 * i - 1;
            cells.push_back({id(j, k), id(j, k + 1), id(j, k + 2), id(j + 1, k + 2), id(j + 1, k + 1), id(j + 1, k)});
          }
          cells.push_back({id(j, 2 * n - 1), id(j, 2 * n), id(j + 1, 2 * n), id(j + 1, 2 * n - 1)});
        }
      }
      return PolytopalMesh::make_2d(std::move(v), std::move(cells));
    }

    PolytopalMesh cubes(std::size_t n, double jitter, std::uint64_t seed)
    {
      const double h = 1.0 / double(n);
      // Grid planes: a_axis . x = r. Interior planes are tilted and shifted so that every face of
      // the distorted grid stays exactly planar.
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> U(-1.0, 1.0);
      struct Plane
      {
        Eigen::Vector3d a;
        double r;
      };
      std::array<std::vector<Plane>, 3> planes;
      for (int ax = 0; ax < 3; ++ax) {
        const int b = (ax + 1) % 3;
        const int c = (ax + 2) % 3;
        for (std::size_t i = 0; i <= n; ++i) {
          Plane p;
          p.a = Eigen::Vector3d::Unit(ax);
          p.r = double(i) * h;
          if (jitter > 0.0 && i > 0 && i < n) {
            const double off = 0.5 * jitter * h * U(rng);
            const double s1 = 0.5 * jitter * h * U(rng);
            const double s2 = 0.5 * jitter * h * U(rng);
            // x_ax = i h + off + s1 (x_b - 1/2) + s2 (x_c - 1/2)
            p.a(b) = -s1;
            p.a(c) = -s2;
            p.r += off - 0.5 * s1 - 0.5 * s2;
          }
          planes[ax].push_back(p);
        }
      }
      auto id = [n](std::size_t i, std::size_t j, std::size_t k) { return i + (n + 1) * (j + (n + 1) * k); };
      std::vector<Eigen::Vector3d> v((n + 1) * (n + 1) * (n + 1));
      for (std::size_t k = 0; k <= n; ++k) {
        for (std::size_t j = 0; j <= n; ++j) {
          for (std::size_t i = 0; i <= n; ++i) {
            Eigen::Matrix3d A;
            A.row(0) = planes[0][i].a.transpose();
            A.row(1) = planes[1][j].a.transpose();
            A.row(2) = planes[2][k].a.transpose();
            const Eigen::Vector3d r(planes[0][i].r, planes[1][j].r, planes[2][k].r);
            v[id(i, j, k)] = A.fullPivLu().solve(r);
          }
        }
      }
      std::vector<std::vector<std::size_t>> faces;
      std::map<std::array<std::size_t, 4>, std::size_t> xf, yf, zf;
      auto add = [&faces](std::map<std::array<std::size_t, 4>, std::size_t> & index, std::array<std::size_t, 4> key,
                          std::vector<std::size_t> loop) {
        index[key] = faces.size();
        faces.push_back(std::move(loop));
      };
      for (std::size_t k = 0; k <= n; ++k) {
        for (std::size_t j = 0; j <= n; ++j) {
          for (std::size_t i = 0; i <= n; ++i) {
            if (j < n && k < n) {
              add(xf, {i, j, k, 0}, {id(i, j, k), id(i, j + 1, k), id(i, j + 1, k + 1), id(i, j, k + 1)});
            }
            if (i < n && k < n) {
              add(yf, {i, j, k, 0}, {id(i, j, k), id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j, k)});
            }
            if (i < n && j < n) {
              add(zf, {i, j, k, 0}, {id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k)});
            }
          }
        }
      }
      std::vector<std::vector<PolytopalMesh::OrientedFace>> cells;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t i = 0; i < n; ++i) {
            cells.push_back({{xf.at({i, j, k, 0}), -1},
                             {xf.at({i + 1, j, k, 0}), 1},
                             {yf.at({i, j, k, 0}), -1},
                             {yf.at({i, j + 1, k, 0}), 1},
                             {zf.at({i, j, k, 0}), -1},
                             {zf.at({i, j, k + 1, 0}), 1}});
          }
        }
      }
      return PolytopalMesh::make_3d(std::move(v), std::move(faces), std::move(cells));
    }
  } // namespace

  int family_dimension(const std::string & family)
  {
    if (family == "squares" || family == "distorted-quads" || family == "hexagons") {
      return 2;
    }
    if (family == "cubes" || family == "distorted-hexes") {
      return 3;
    }
    throw ValidationError("unknown mesh family '" + family + "'");
  }

  PolytopalMesh generate_mesh(const FamilySpec & spec, double h)
  {
    family_dimension(spec.family);
    const std::size_t n = cells_per_side(h);
    const bool distorted = spec.family == "distorted-quads" || spec.family == "distorted-hexes";
    if (distorted && (spec.jitter < 0.0 || spec.jitter >= 0.5)) {
      throw ValidationError("jitter must lie in [0, 0.5)");
    }
    PolytopalMesh mesh;
    try {
      if (spec.family == "squares") {
        mesh = squares(n, 0.0, spec.seed);
      } else if (spec.family == "distorted-quads") {
        mesh = squares(n, spec.jitter, spec.seed);
      } else if (spec.family == "hexagons") {
        mesh = hexagons(n);
      } else if (spec.family == "cubes") {
        mesh = cubes(n, 0.0, spec.seed);
      } else {
        mesh = cubes(n, spec.jitter, spec.seed);
      }
    } catch (const ValidationError & e) {
      throw ValidationError("distortion parameter incompatible with a valid mesh: " + std::string(e.what()));
    }
    if (distorted) {
      const auto reg = regularity_report(mesh, spec.gamma_min);
      if (!reg.flagged.empty()) {
        throw ValidationError("distortion parameter incompatible with gamma_min " + std::to_string(spec.gamma_min)
                              + " (cell " + str(reg.flagged.front()) + " has gamma "
                              + std::to_string(reg.cells[reg.flagged.front()].gamma) + ")");
      }
    }
    return mesh;
  }

  std::vector<PolytopalMesh> generate_family(const FamilySpec & spec)
  {
    std::vector<PolytopalMesh> meshes;
    for (double h : spec.h) {
      meshes.push_back(generate_mesh(spec, h));
    }
    return meshes;
  }

} // namespace vemfacet
