#ifndef VEMFACET_TEST_HELPERS_HPP
#define VEMFACET_TEST_HELPERS_HPP

#include <map>
#include <random>
#include <string>

#include <vemfacet/mesh.hpp>

#ifndef VEMFACET_TEST_DATA
#define VEMFACET_TEST_DATA "tests/data"
#endif

inline std::string data_file(const std::string & name) { return std::string(VEMFACET_TEST_DATA) + "/" + name; }

inline vemfacet::ElementGeometry data_element(const std::string & name, std::size_t cell = 0)
{
  static std::map<std::string, vemfacet::PolytopalMesh> meshes;
  auto it = meshes.find(name);
  if (it == meshes.end()) {
    it = meshes.emplace(name, vemfacet::load_mesh(data_file(name))).first;
  }
  return vemfacet::geometry(it->second, cell);
}

inline vemfacet::PolytopalMesh family_mesh(const std::string & family, double h, double jitter = 0.2)
{
  vemfacet::FamilySpec spec;
  spec.family = family;
  spec.jitter = jitter;
  return vemfacet::generate_mesh(spec, h);
}

inline Eigen::VectorXd random_vector(std::mt19937_64 & rng, Eigen::Index n)
{
  std::normal_distribution<double> N;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = N(rng);
  }
  return v;
}

#endif
