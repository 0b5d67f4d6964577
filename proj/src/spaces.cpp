#include <vemfacet/spaces.hpp>
#include <vemfacet/errors.hpp>
#include <vemfacet/submesh.hpp>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace vemfacet
{

  std::string to_string(SpaceTag space)
  {
    switch (space) {
    case SpaceTag::Face2D:
      return "face2d";
    case SpaceTag::Edge2D:
      return "edge2d";
    case SpaceTag::Face3D:
      return "face3d";
    case SpaceTag::Edge3D:
      return "edge3d";
    }
    return "unknown";
  }

  SpaceTag parse_space(const std::string & name)
  {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto t : {SpaceTag::Face2D, SpaceTag::Edge2D, SpaceTag::Face3D, SpaceTag::Edge3D}) {
      if (s == to_string(t)) {
        return t;
      }
    }
    throw ValidationError("unknown space '" + name + "' (expected face2d, edge2d, face3d or edge3d)");
  }

  namespace
  {
    void check_binding(SpaceTag space, const ElementGeometry & g)
    {
      if (space_dimension(space) != g.dimension) {
        throw std::invalid_argument("space " + to_string(space) + " cannot be used on a " + std::to_string(g.dimension)
                                    + "D element");
      }
    }

    void check(const DofVector & d, const ElementGeometry & g)
    {
      check_binding(d.space, g);
      if (std::size_t(d.values.size()) != dof_count(d.space, g)) {
        throw std::invalid_argument("DOF vector length " + std::to_string(d.values.size()) + " does not match "
                                    + std::to_string(dof_count(d.space, g)) + " DOFs of " + to_string(d.space));
      }
    }

    void check_tag(const DofVector & d, std::initializer_list<SpaceTag> allowed, const char * op)
    {
      for (auto t : allowed) {
        if (d.space == t) {
          return;
        }
      }
      throw std::invalid_argument(std::string(op) + " is not defined for " + to_string(d.space));
    }
  } // namespace

  std::size_t dof_count(SpaceTag space, const ElementGeometry & g)
  {
    check_binding(space, g);
    switch (space) {
    case SpaceTag::Face2D:
    case SpaceTag::Edge2D:
      return g.polygon().edges.size();
    case SpaceTag::Face3D:
      return g.faces.size();
    case SpaceTag::Edge3D:
      return g.edges.size();
    }
    return 0;
  }

  //------------------------------------------------------------------------------
  // Interpolation
  //------------------------------------------------------------------------------

  Eigen::VectorXd polygon_dofs(SpaceTag space, const AnalyticField & field, const FaceGeometry & face,
                               const DofQuadrature & q)
  {
    if (space != SpaceTag::Face2D && space != SpaceTag::Edge2D) {
      throw std::invalid_argument("polygon_dofs expects a 2D space");
    }
    Eigen::VectorXd d(face.edges.size());
    for (std::size_t i = 0; i < face.edges.size(); ++i) {
      const auto & e = face.edges[i];
      const Eigen::Vector3d m = integrate_segment(e.start, e.end, field, q.degree, q.pieces) / e.length;
      d(i) = space == SpaceTag::Face2D ? m.dot(e.normal) : m.dot(e.tangent);
    }
    return d;
  }

  DofVector extract_dofs(SpaceTag space, const AnalyticField & field, const ElementGeometry & g,
                         const DofQuadrature & q)
  {
    check_binding(space, g);
    if (!field.value) {
      throw std::invalid_argument("field has no value callback");
    }
    if (field.dimension != g.dimension && !(field.dimension == 3 && g.dimension == 2)) {
      throw std::invalid_argument("field dimension does not match the space");
    }
    DofVector d;
    d.space = space;
    d.element = g.cell;
    if (space == SpaceTag::Face2D || space == SpaceTag::Edge2D) {
      d.values = polygon_dofs(space, field, g.polygon(), q);
    } else if (space == SpaceTag::Face3D) {
      d.values.resize(g.faces.size());
      for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const auto & f = g.faces[k];
        const auto sm = subtessellate_polygon(f, q.refinement);
        d.values(k) = integrate(sm, field, q.degree).dot(f.normal) / f.area;
      }
    } else {
      d.values.resize(g.edges.size());
      for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto & e = g.edges[k];
        const Eigen::Vector3d a = e.midpoint - 0.5 * e.length * e.tangent;
        const Eigen::Vector3d b = e.midpoint + 0.5 * e.length * e.tangent;
        d.values(k) = integrate_segment(a, b, field, q.degree, q.pieces).dot(e.tangent) / e.length;
      }
    }
    return d;
  }

  DofVector extract_dofs(SpaceTag space, const PolyField & field, const ElementGeometry & g)
  {
    DofQuadrature q;
    q.pieces = 1;
    q.refinement = 0;
    q.degree = max_poly_degree;
    return extract_dofs(space, AnalyticField::from_poly(field), g, q);
  }

  DofVector constant_dofs(SpaceTag space, const Eigen::Vector3d & c, const ElementGeometry & g)
  {
    check_binding(space, g);
    DofVector d;
    d.space = space;
    d.element = g.cell;
    d.values.resize(dof_count(space, g));
    for (Eigen::Index i = 0; i < d.values.size(); ++i) {
      switch (space) {
      case SpaceTag::Face2D:
        d.values(i) = c.dot(g.polygon().edges[i].normal);
        break;
      case SpaceTag::Edge2D:
        d.values(i) = c.dot(g.polygon().edges[i].tangent);
        break;
      case SpaceTag::Face3D:
        d.values(i) = c.dot(g.faces[i].normal);
        break;
      case SpaceTag::Edge3D:
        d.values(i) = c.dot(g.edges[i].tangent);
        break;
      }
    }
    return d;
  }

  //------------------------------------------------------------------------------
  // Polygon closed forms
  //------------------------------------------------------------------------------

  namespace polygon
  {
    double face_div(const FaceGeometry & f, const Eigen::VectorXd & d)
    {
      double s = 0.0;
      for (std::size_t i = 0; i < f.edges.size(); ++i) {
        s += d(i) * f.edges[i].length;
      }
      return s / f.area;
    }

    double edge_rot(const FaceGeometry & f, const Eigen::VectorXd & d) { return face_div(f, d); }

    Eigen::Vector3d face_pi0(const FaceGeometry & f, const Eigen::VectorXd & d)
    {
      // int_F psi_i = int_dF (psi.n) (x_i - xbar_i) since div psi is constant and x - xbar has zero mean
      Eigen::Vector3d s = Eigen::Vector3d::Zero();
      for (std::size_t i = 0; i < f.edges.size(); ++i) {
        s += d(i) * f.edges[i].length * (f.edges[i].midpoint - f.barycenter);
      }
      return s / f.area;
    }

    Eigen::Vector3d edge_pi0(const FaceGeometry & f, const Eigen::VectorXd & d)
    {
      // v = n x psi with psi the Face2D function carrying the same DOFs
      return f.normal.cross(face_pi0(f, d));
    }

    double stabilization(const FaceGeometry & f, const Eigen::VectorXd & d1, const Eigen::VectorXd & d2)
    {
      double s = 0.0;
      for (std::size_t i = 0; i < f.edges.size(); ++i) {
        s += f.edges[i].length * d1(i) * d2(i);
      }
      return f.diameter * s;
    }
  } // namespace polygon

  Eigen::VectorXd face_trace_dofs(const DofVector & d, const ElementGeometry & g, std::size_t k)
  {
    const auto & f = g.faces.at(k);
    Eigen::VectorXd t(f.edges.size());
    for (std::size_t i = 0; i < f.edges.size(); ++i) {
      t(i) = f.edges[i].sign * d.values(f.edges[i].edge);
    }
    return t;
  }

  //------------------------------------------------------------------------------
  // Derived constants
  //------------------------------------------------------------------------------

  double div_constant(const DofVector & d, const ElementGeometry & g)
  {
    check_tag(d, {SpaceTag::Face2D, SpaceTag::Face3D}, "div_constant");
    check(d, g);
    if (d.space == SpaceTag::Face2D) {
      return polygon::face_div(g.polygon(), d.values);
    }
    double s = 0.0;
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
      s += d.values(k) * g.faces[k].area;
    }
    return s / g.measure;
  }

  double rot_constant(const DofVector & d, const ElementGeometry & g)
  {
    check_tag(d, {SpaceTag::Edge2D}, "rot_constant");
    check(d, g);
    return polygon::edge_rot(g.polygon(), d.values);
  }

  DofVector curl_image(const DofVector & d, const ElementGeometry & g)
  {
    check_tag(d, {SpaceTag::Edge3D}, "curl_image");
    check(d, g);
    DofVector c;
    c.space = SpaceTag::Face3D;
    c.element = d.element;
    c.values.resize(g.faces.size());
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
      c.values(k) = polygon::edge_rot(g.faces[k], face_trace_dofs(d, g, k));
    }
    return c;
  }

  //------------------------------------------------------------------------------
  // Projection and stabilization
  //------------------------------------------------------------------------------

  Eigen::Vector3d pi0_ambient(const DofVector & d, const ElementGeometry & g)
  {
    check(d, g);
    switch (d.space) {
    case SpaceTag::Face2D:
      return polygon::face_pi0(g.polygon(), d.values);
    case SpaceTag::Edge2D:
      return polygon::edge_pi0(g.polygon(), d.values);
    case SpaceTag::Face3D: {
      Eigen::Vector3d s = Eigen::Vector3d::Zero();
      for (std::size_t k = 0; k < g.faces.size(); ++k) {
        s += d.values(k) * g.faces[k].area * (g.faces[k].barycenter - g.barycenter);
      }
      return s / g.measure;
    }
    case SpaceTag::Edge3D: {
      // int_K v = -1/2 sum_F [ n_F (m_F . (xF - xE)) - delta_F m_F ],  m_F = int_F v^F
      Eigen::Vector3d s = Eigen::Vector3d::Zero();
      for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const auto & f = g.faces[k];
        const Eigen::Vector3d m = f.area * polygon::edge_pi0(f, face_trace_dofs(d, g, k));
        const Eigen::Vector3d r = f.barycenter - g.barycenter;
        s += f.normal * m.dot(r) - f.normal.dot(r) * m;
      }
      return -0.5 * s / g.measure;
    }
    }
    return Eigen::Vector3d::Zero();
  }

  Eigen::VectorXd pi0(const DofVector & d, const ElementGeometry & g)
  {
    const Eigen::Vector3d p = pi0_ambient(d, g);
    if (space_dimension(d.space) == 2) {
      const auto & f = g.polygon();
      return Eigen::Vector2d(p.dot(f.e1), p.dot(f.e2));
    }
    return p;
  }

  double stabilization(const DofVector & d1, const DofVector & d2, const ElementGeometry & g)
  {
    if (d1.space != d2.space) {
      throw std::invalid_argument("stabilization of DOF vectors from different spaces");
    }
    check(d1, g);
    check(d2, g);
    switch (d1.space) {
    case SpaceTag::Face2D:
    case SpaceTag::Edge2D:
      return polygon::stabilization(g.polygon(), d1.values, d2.values);
    case SpaceTag::Face3D: {
      double s = 0.0;
      for (std::size_t k = 0; k < g.faces.size(); ++k) {
        s += g.faces[k].area * d1.values(k) * d2.values(k);
      }
      return g.diameter * s;
    }
    case SpaceTag::Edge3D: {
      // every edge once per incident face
      double s = 0.0;
      for (const auto & f : g.faces) {
        for (const auto & e : f.edges) {
          s += e.length * d1.values(e.edge) * d2.values(e.edge);
        }
      }
      return g.diameter * g.diameter * s;
    }
    }
    return 0.0;
  }

  double discrete_inner(const DofVector & d1, const DofVector & d2, const ElementGeometry & g)
  {
    const Eigen::Vector3d p1 = pi0_ambient(d1, g);
    const Eigen::Vector3d p2 = pi0_ambient(d2, g);
    DofVector r1 = d1;
    DofVector r2 = d2;
    r1.values -= constant_dofs(d1.space, p1, g).values;
    r2.values -= constant_dofs(d2.space, p2, g).values;
    return g.measure * p1.dot(p2) + stabilization(r1, r2, g);
  }

  namespace
  {
    DofVector unit(SpaceTag space, const ElementGeometry & g, std::size_t i)
    {
      DofVector d;
      d.space = space;
      d.element = g.cell;
      d.values = Eigen::VectorXd::Unit(dof_count(space, g), i);
      return d;
    }

    template <typename Form>
    Eigen::MatrixXd assemble(SpaceTag space, const ElementGeometry & g, Form form)
    {
      const std::size_t n = dof_count(space, g);
      Eigen::MatrixXd M(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          M(i, j) = M(j, i) = form(unit(space, g, i), unit(space, g, j), g);
        }
      }
      return M;
    }
  } // namespace

  Eigen::MatrixXd stabilization_matrix(SpaceTag space, const ElementGeometry & g)
  {
    return assemble(space, g, [](const DofVector & a, const DofVector & b, const ElementGeometry & e) {
      return stabilization(a, b, e);
    });
  }

  Eigen::MatrixXd discrete_inner_matrix(SpaceTag space, const ElementGeometry & g)
  {
    return assemble(space, g, [](const DofVector & a, const DofVector & b, const ElementGeometry & e) {
      return discrete_inner(a, b, e);
    });
  }

  Eigen::MatrixXd pi0_matrix(SpaceTag space, const ElementGeometry & g)
  {
    const std::size_t n = dof_count(space, g);
    Eigen::MatrixXd P(3, n);
    for (std::size_t i = 0; i < n; ++i) {
      P.col(i) = pi0_ambient(unit(space, g, i), g);
    }
    return P;
  }

} // namespace vemfacet
