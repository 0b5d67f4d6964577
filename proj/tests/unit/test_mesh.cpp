#include <gtest/gtest.h>

#include <cmath>

#include <vemfacet/errors.hpp>
#include <vemfacet/mesh.hpp>
#include <vemfacet/submesh.hpp>

#include "test_helpers.hpp"

using namespace vemfacet;

TEST(LoadMesh, UnitSquare)
{
  const auto m = load_mesh(data_file("unit_square.msh"));
  EXPECT_EQ(m.dimension(), 2);
  EXPECT_EQ(m.n_vertices(), 4u);
  EXPECT_EQ(m.n_edges(), 4u);
  EXPECT_EQ(m.n_cells(), 1u);
}

TEST(LoadMesh, UnitCube)
{
  const auto m = load_mesh(data_file("unit_cube.msh"));
  EXPECT_EQ(m.dimension(), 3);
  EXPECT_EQ(m.n_vertices(), 8u);
  EXPECT_EQ(m.n_edges(), 12u);
  EXPECT_EQ(m.n_faces(), 6u);
  EXPECT_EQ(m.n_cells(), 1u);
}

TEST(LoadMesh, ReversedFaceIsNamed)
{
  try {
    load_mesh(data_file("bad_cube.msh"));
    FAIL() << "expected a validation error";
  } catch (const ValidationError & e) {
    EXPECT_NE(std::string(e.what()).find("face 3"), std::string::npos) << e.what();
  }
}

TEST(LoadMesh, MalformedText)
{
  EXPECT_THROW(parse_mesh("polymesh-v1\ndimension 2\nvertices 3\n0 0\n1 0\n"), ParseError);
  EXPECT_THROW(parse_mesh("not-a-mesh\n"), ParseError);
}

TEST(LoadMesh, FormatRoundTrip)
{
  const auto m = family_mesh("distorted-hexes", 0.5);
  const auto back = parse_mesh(format_mesh(m));
  ASSERT_EQ(back.n_vertices(), m.n_vertices());
  for (std::size_t i = 0; i < m.n_vertices(); ++i) {
    EXPECT_EQ(back.vertex(i), m.vertex(i)); // full precision
  }
  EXPECT_EQ(back.n_faces(), m.n_faces());
  EXPECT_EQ(back.n_cells(), m.n_cells());
}

TEST(Families, StructuredCounts)
{
  EXPECT_EQ(family_mesh("squares", 0.25).n_cells(), 16u);
  EXPECT_EQ(family_mesh("cubes", 0.5).n_cells(), 8u);
}

TEST(Families, DistortedQuadsKeepGamma)
{
  FamilySpec spec;
  spec.family = "distorted-quads";
  spec.jitter = 0.2;
  spec.seed = 7;
  const auto m = generate_mesh(spec, 1.0 / 8);
  EXPECT_EQ(m.n_cells(), 64u);
  const auto r = regularity_report(m);
  for (const auto & c : r.cells) {
    EXPECT_GE(c.gamma, 0.3);
  }
  // vertices move by at most jitter * h per coordinate: the diagonal grows by at most 2 * jitter * sqrt(2) h
  EXPECT_LE(r.max_diameter, (1 + 2 * 0.2) * std::sqrt(2.0) / 8);
}

TEST(Families, UnknownFamily)
{
  FamilySpec spec;
  spec.family = "triangles";
  EXPECT_THROW(generate_mesh(spec, 0.5), ValidationError);
}

TEST(Families, DistortedHexFacesPlanar)
{
  const auto m = family_mesh("distorted-hexes", 0.25);
  m.validate(); // planarity within tol_planar
  for (std::size_t c = 0; c < m.n_cells(); ++c) {
    for (const auto & f : geometry(m, c).faces) {
      for (const auto & p : f.points) {
        EXPECT_LE(std::abs((p - f.barycenter).dot(f.normal)), 1e-12);
      }
    }
  }
}

TEST(Geometry, UnitCube)
{
  const auto g = data_element("unit_cube.msh");
  EXPECT_NEAR(g.diameter, std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(g.measure, 1.0, 1e-14);
  EXPECT_NEAR((g.barycenter - Eigen::Vector3d(0.5, 0.5, 0.5)).norm(), 0.0, 1e-14);
}

TEST(Geometry, UnitSquare)
{
  const auto g = data_element("unit_square.msh");
  EXPECT_NEAR(g.polygon().diameter, std::sqrt(2.0), 1e-14);
  EXPECT_NEAR((g.polygon().barycenter - Eigen::Vector3d(0.5, 0.5, 0)).norm(), 0.0, 1e-14);
}

TEST(Geometry, RightTriangle)
{
  const auto g = data_element("triangle.msh");
  EXPECT_NEAR(g.polygon().area, 0.5, 1e-15);
  EXPECT_NEAR((g.polygon().barycenter - Eigen::Vector3d(1.0 / 3, 1.0 / 3, 0)).norm(), 0.0, 1e-15);
}

TEST(Geometry, OrientationConventions)
{
  for (const auto & name : {"cubes", "distorted-hexes"}) {
    const auto m = family_mesh(name, 0.5);
    for (std::size_t c = 0; c < m.n_cells(); ++c) {
      const auto g = geometry(m, c);
      for (const auto & f : g.faces) {
        Eigen::Vector3d loop = Eigen::Vector3d::Zero();
        for (const auto & e : f.edges) {
          EXPECT_NEAR(e.tangent.dot(f.normal), 0.0, 1e-13);
          EXPECT_NEAR((e.normal - e.tangent.cross(f.normal)).norm(), 0.0, 1e-13);
          EXPECT_NEAR(e.tangent.dot(g.edges[e.edge].tangent), double(e.sign), 1e-13);
          // counterclockwise: the outward edge normal points away from the face barycenter
          EXPECT_GT(e.normal.dot(e.midpoint - f.barycenter), 0.0);
          loop += e.length * e.tangent;
          EXPECT_LE(e.length, f.diameter + 1e-14);
        }
        EXPECT_LE(loop.norm(), 1e-12);
        EXPECT_GT(f.normal.dot(f.barycenter - g.barycenter), 0.0); // outward
        EXPECT_LE(f.diameter, g.diameter + 1e-14);
      }
    }
  }
}

TEST(Geometry, InteriorFacesHaveOppositeNormals)
{
  const auto m = family_mesh("distorted-hexes", 0.5);
  std::map<std::size_t, std::vector<Eigen::Vector3d>> normals;
  for (std::size_t c = 0; c < m.n_cells(); ++c) {
    for (const auto & f : geometry(m, c).faces) {
      normals[f.id].push_back(f.normal);
    }
  }
  std::size_t interior = 0;
  for (const auto & [id, n] : normals) {
    ASSERT_LE(n.size(), 2u);
    if (n.size() == 2) {
      ++interior;
      EXPECT_NEAR((n[0] + n[1]).norm(), 0.0, 1e-13) << "face " << id;
    }
  }
  EXPECT_EQ(interior, 12u);
}

TEST(Subtessellate, FanCounts)
{
  const auto sq = data_element("unit_square.msh");
  const auto s0 = subtessellate(sq, 0);
  EXPECT_EQ(s0.n_simplices(), 4u);
  EXPECT_NEAR(s0.measure(), 1.0, 1e-14);
  EXPECT_EQ(subtessellate(sq, 2).n_simplices(), 64u);

  const auto cube = data_element("unit_cube.msh");
  const auto c0 = subtessellate(cube, 0);
  EXPECT_EQ(c0.n_simplices(), 24u);
  EXPECT_NEAR(c0.measure(), 1.0, 1e-14);
}

TEST(Subtessellate, MeasureAndRefinementInvariants)
{
  for (const auto & [family, h] : std::vector<std::pair<std::string, double>>{
         {"distorted-quads", 0.25}, {"hexagons", 0.25}, {"distorted-hexes", 0.5}}) {
    const auto m = family_mesh(family, h);
    for (std::size_t c = 0; c < m.n_cells(); ++c) {
      const auto g = geometry(m, c);
      const auto s0 = subtessellate(g, 0);
      const auto s1 = subtessellate(g, 1);
      EXPECT_NEAR(s0.measure(), g.measure, 1e-12 * g.measure);
      EXPECT_NEAR(s1.measure(), g.measure, 1e-12 * g.measure);
      const std::size_t factor = g.dimension == 2 ? 4 : 8;
      EXPECT_EQ(s1.n_simplices(), factor * s0.n_simplices());
      EXPECT_EQ(s1.boundary.size(), (g.dimension == 2 ? 2 : 4) * s0.boundary.size());
      // every refined boundary facet stays on the parent facet of its ancestor
      std::vector<double> area(g.dimension == 2 ? g.polygon().edges.size() : g.faces.size(), 0.0);
      for (const auto & b : s1.boundary) {
        const auto & x0 = s1.nodes[b.nodes[0]];
        const auto & x1 = s1.nodes[b.nodes[1]];
        if (g.dimension == 2) {
          area[b.face] += (x1 - x0).norm();
        } else {
          area[b.face] += 0.5 * (x1 - x0).cross(s1.nodes[b.nodes[2]] - x0).norm();
          EXPECT_NEAR((x0 - g.faces[b.face].barycenter).dot(g.faces[b.face].normal), 0.0, 1e-12);
        }
      }
      for (std::size_t k = 0; k < area.size(); ++k) {
        const double expect = g.dimension == 2 ? g.polygon().edges[k].length : g.faces[k].area;
        EXPECT_NEAR(area[k], expect, 1e-12);
      }
    }
  }
}

TEST(Regularity, ClosedForms)
{
  const auto sq = regularity_report(load_mesh(data_file("unit_square.msh")));
  EXPECT_NEAR(sq.min_gamma, 1.0 / std::sqrt(2.0), 1e-14);
  const auto cube = regularity_report(load_mesh(data_file("unit_cube.msh")));
  EXPECT_NEAR(cube.min_gamma, 1.0 / std::sqrt(3.0), 1e-14);
}

TEST(Regularity, ThinRectangleIsFlagged)
{
  for (double eps : {0.5, 0.05, 0.01}) {
    const auto m = PolytopalMesh::make_2d({{0, 0, 0}, {1, 0, 0}, {1, eps, 0}, {0, eps, 0}}, {{0, 1, 2, 3}});
    const auto r = regularity_report(m, 0.1);
    EXPECT_NEAR(r.min_gamma, eps / std::sqrt(1 + eps * eps), 1e-14);
    EXPECT_EQ(r.flagged.size(), eps / std::sqrt(1 + eps * eps) < 0.1 ? 1u : 0u);
  }
}

TEST(Regularity, RatiosInUnitInterval)
{
  const auto r = regularity_report(family_mesh("distorted-hexes", 0.25));
  EXPECT_GT(r.min_gamma, 0.0);
  EXPECT_LE(r.min_gamma, 1.0);
  EXPECT_GT(r.min_face_ratio, 0.0);
  EXPECT_LE(r.min_face_ratio, 1.0);
  EXPECT_GT(r.min_edge_ratio, 0.0);
  EXPECT_LE(r.min_edge_ratio, 1.0);
  EXPECT_EQ(r.max_face_count, 6u);
  EXPECT_EQ(r.max_face_edges, 4u);
}
