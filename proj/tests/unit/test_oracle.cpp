#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <vemfacet/oracle.hpp>
#include <vemfacet/spaces.hpp>
#include <vemfacet/studies.hpp>

#include "test_helpers.hpp"

using namespace vemfacet;

namespace
{
  PolyField rotation_field(const Eigen::Vector3d & c)
  {
    Eigen::Matrix3d R;
    R << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    return PolyField::affine(Eigen::Vector3d::Zero(), R, c);
  }
} // namespace

TEST(Oracle, ConstantEdge2DIsReproduced)
{
  const auto g = data_element("unit_square.msh");
  for (int L = 0; L <= 2; ++L) {
    const auto d = constant_dofs(SpaceTag::Edge2D, {1, 0, 0}, g);
    const auto f = reconstruct(d, g, L, false);
    EXPECT_LE(l2_distance(f, PolyField::constant({1, 0, 0})), 1e-12);
    EXPECT_LE((reextract_dofs(f, g).values - d.values).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Oracle, RotationFieldOnSquare)
{
  const auto g = data_element("unit_square.msh");
  const DofVector d{SpaceTag::Edge2D, 0, Eigen::VectorXd::Constant(4, 0.5)};
  const auto f = reconstruct(d, g, 2);
  EXPECT_NEAR(l2_norm(f), 1.0 / std::sqrt(6.0), 1e-10);
  EXPECT_LE(l2_distance(f, rotation_field({0.5, 0.5, 0})), 1e-10);
  EXPECT_NEAR(l2_distance(f, f), 0.0, 1e-14);
}

TEST(Oracle, PositionFieldOnCube)
{
  const auto g = data_element("unit_cube.msh");
  const auto d = extract_dofs(SpaceTag::Face3D, PolyField::position({0.5, 0.5, 0.5}), g);
  const auto f = reconstruct(d, g, 1);
  EXPECT_LE(l2_distance(f, PolyField::position({0.5, 0.5, 0.5})), 1e-10);
  // curl of the reconstruction vanishes
  for (std::size_t s = 0; s < f.value.size(); ++s) {
    EXPECT_LE(f.curl(s).norm(), 1e-9);
  }
}

TEST(Oracle, GramOnSquare)
{
  const auto g = data_element("unit_square.msh");
  const auto G = gram_matrix(SpaceTag::Edge2D, g, 3);
  ASSERT_EQ(G.matrix.rows(), 4);
  EXPECT_LE((G.matrix - G.matrix.transpose()).norm(), 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G.matrix);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  const Eigen::VectorXd c = constant_dofs(SpaceTag::Edge2D, {1, 0, 0}, g).values;
  EXPECT_NEAR(c.dot(G.matrix * c), 1.0, 1e-10);
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(4, 0.5);
  EXPECT_NEAR(r.dot(G.matrix * r), 1.0 / 6.0, 1e-4);
}

TEST(Oracle, RandomRoundTripAndConstraints)
{
  std::mt19937_64 rng(21);
  Oracle oracle;
  const auto hex = data_element("hexagon.msh");
  const auto cell = geometry(family_mesh("distorted-hexes", 1.0), 0);
  for (auto s : {SpaceTag::Face2D, SpaceTag::Edge2D, SpaceTag::Face3D, SpaceTag::Edge3D}) {
    const auto & g = space_dimension(s) == 2 ? hex : cell;
    const int L = space_dimension(s) == 2 ? 2 : 1;
    const DofVector d{s, g.cell, random_vector(rng, Eigen::Index(dof_count(s, g)))};
    const auto f = oracle.reconstruct(d, g, L);
    const auto back = reextract_dofs(f, g);
    EXPECT_LE((back.values - d.values).norm(), 1e-10 * d.values.norm()) << to_string(s);
    EXPECT_LE(constraint_moments(f, g).cwiseAbs().maxCoeff(), 1e-10 * d.values.norm()) << to_string(s);
    EXPECT_TRUE(std::isfinite(f.accuracy));
  }
}

TEST(Oracle, ConstantDivergenceAndRotation)
{
  std::mt19937_64 rng(8);
  const auto g = data_element("hexagon.msh");
  const DofVector df{SpaceTag::Face2D, 0, random_vector(rng, 6)};
  const auto f = reconstruct(df, g, 2, false);
  const double c = div_constant(df, g);
  for (std::size_t s = 0; s < f.value.size(); ++s) {
    EXPECT_NEAR(f.divergence(s), c, 1e-10 * (1 + std::abs(c)));
  }
  const DofVector de{SpaceTag::Edge2D, 0, random_vector(rng, 6)};
  const auto e = reconstruct(de, g, 2, false);
  const double r = rot_constant(de, g);
  for (std::size_t s = 0; s < e.value.size(); ++s) {
    EXPECT_NEAR(e.curl(s).dot(g.polygon().normal), r, 1e-10 * (1 + std::abs(r)));
  }
}

TEST(Oracle, AccuracyDecreasesWithLevel)
{
  std::mt19937_64 rng(12);
  const auto g = data_element("hexagon.msh");
  for (auto s : {SpaceTag::Face2D, SpaceTag::Edge2D}) {
    const DofVector d{s, 0, random_vector(rng, 6)};
    double previous = INFINITY;
    for (int L = 1; L <= 3; ++L) {
      const double a = reconstruct(d, g, L).accuracy;
      EXPECT_LT(a, previous) << to_string(s) << " L=" << L;
      previous = a;
    }
  }
}

TEST(Oracle, CacheReusesSimilarShapes)
{
  const auto m = family_mesh("squares", 0.25);
  std::vector<ElementGeometry> elements;
  for (std::size_t c = 0; c < m.n_cells(); ++c) {
    elements.push_back(geometry(m, c));
  }
  Oracle oracle;
  oracle.prepare(SpaceTag::Edge2D, elements, 2, true, 1);
  EXPECT_EQ(oracle.cache_size(), 2u); // one shape, levels 2 and 1
  // translated and scaled copies give the same field up to the map
  const DofVector d{SpaceTag::Edge2D, 0, Eigen::Vector4d(0.3, -0.2, 0.9, 0.1)};
  const auto a = oracle.reconstruct(d, elements[0], 2, false);
  const auto b = reconstruct(d, elements[0], 2, false);
  EXPECT_LE(l2_distance(a, b), 1e-13);
}
