#ifndef VEMFACET_SUBMESH_HPP
#define VEMFACET_SUBMESH_HPP

#include <array>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include <vemfacet/mesh.hpp>

namespace vemfacet
{

  /// Conforming simplex tessellation of one mesh element (or of one polygon).
  ///
  /// Level 0 is the fan from the star centre (the barycentre); level L is obtained by L uniform
  /// red refinements. Simplices are positively oriented: tetrahedra have positive volume, triangles
  /// are counterclockwise with respect to the polygon normal.
  struct SimplexSubmesh
  {
    static constexpr std::size_t none = std::numeric_limits<std::size_t>::max();

    struct BoundaryFacet
    {
      std::array<std::size_t, 3> nodes; ///< 2 nodes in 2D (third is `none`)
      std::size_t simplex;
      std::size_t face; ///< index of the parent facet: ElementGeometry::faces (3D) or polygon edge (2D)
    };

    int dimension = 0;
    std::size_t cell = 0;
    int level = 0;
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ(); ///< polygon normal (2D only)
    std::vector<Eigen::Vector3d> nodes;
    std::vector<std::array<std::size_t, 4>> simplices; ///< 3 nodes in 2D (fourth is `none`)
    std::vector<BoundaryFacet> boundary;
    /// ancestors[l][s]: index of the level-l simplex containing simplex s (l = 0..level).
    std::vector<std::vector<std::size_t>> ancestors;
    /// per node: bit k set if the node lies on parent facet k
    std::vector<std::uint64_t> facet_mask;

    std::size_t n_simplices() const { return simplices.size(); }
    std::size_t vertices_per_simplex() const { return std::size_t(dimension) + 1; }
    /// Signed measure of simplex s (w.r.t. `normal` in 2D).
    double simplex_measure(std::size_t s) const;
    Eigen::Vector3d simplex_centroid(std::size_t s) const;
    double measure() const;
    /// Minimum over simplices of a normalised quality (1 for the regular simplex).
    double min_quality() const;
  };

  /// Fan tessellation of a 3D element (L = 0) refined `level` times.
  /// Throws ValidationError if the barycentre does not see some face.
  SimplexSubmesh subtessellate(const ElementGeometry & geometry, int level);
  SimplexSubmesh subtessellate(const PolytopalMesh & mesh, std::size_t cell, int level);

  /// Fan tessellation of a planar polygon (2D cell or face of a 3D cell), refined `level` times.
  SimplexSubmesh subtessellate_polygon(const FaceGeometry & polygon, int level);

  /// One uniform red refinement (4 children per triangle, 8 per tetrahedron).
  SimplexSubmesh refine(const SimplexSubmesh & submesh);

} // namespace vemfacet

#endif
