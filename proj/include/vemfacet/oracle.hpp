#ifndef VEMFACET_ORACLE_HPP
#define VEMFACET_ORACLE_HPP

#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include <vemfacet/calculus.hpp>
#include <vemfacet/spaces.hpp>
#include <vemfacet/submesh.hpp>

namespace vemfacet
{

  /// A virtual function materialised on the sub-tessellation of its element.
  ///
  /// The field is affine on every simplex: v(x) = value[s] + gradient[s] (x - centroid[s]).
  struct SubmeshField
  {
    SpaceTag space = SpaceTag::Face3D;
    std::size_t element = 0;
    int level = 0;
    std::shared_ptr<const SimplexSubmesh> submesh;
    std::vector<Eigen::Vector3d> value;
    std::vector<Eigen::Matrix3d> gradient; ///< gradient(i, j) = d v_i / d x_j
    /// L2 distance to the level-(L-1) reconstruction (NaN when unavailable).
    double accuracy = std::numeric_limits<double>::quiet_NaN();

    Eigen::Vector3d evaluate(std::size_t simplex, const Eigen::Vector3d & x) const;
    /// Evaluates at x by locating the containing simplex (first match on shared facets).
    Eigen::Vector3d operator()(const Eigen::Vector3d & x) const;
    double divergence(std::size_t simplex) const { return gradient[simplex].trace(); }
    Eigen::Vector3d curl(std::size_t simplex) const;
    Eigen::Vector3d integral() const;
  };

  struct GramMatrix
  {
    SpaceTag space = SpaceTag::Face3D;
    std::size_t element = 0;
    int level = 0;
    Eigen::MatrixXd matrix;
    /// max |G_L - G_{L-1}| relative to max |G_L| (NaN when unavailable).
    double accuracy = std::numeric_limits<double>::quiet_NaN();
  };

  /// Reconstruction engine.
  ///
  /// Reconstructions are linear in the DOFs, so the engine computes one field per unit DOF vector
  /// and combines them. The basis depends only on the shape of the element, so it is cached per
  /// normalised geometry (translation and scaling leave the DOFs of a pulled-back function unchanged).
  /// Safe for concurrent use.
  class Oracle
  {
  public:
    explicit Oracle(bool cache = true) : m_use_cache(cache) {}

    /// Reconstruction at level L; with `estimate` also solves at L-1 to fill the accuracy field.
    SubmeshField reconstruct(const DofVector & d, const ElementGeometry & g, int level, bool estimate = true);
    GramMatrix gram_matrix(SpaceTag space, const ElementGeometry & g, int level, bool estimate = true);
    /// Reconstructions of the unit DOF vectors at level L.
    std::vector<SubmeshField> basis(SpaceTag space, const ElementGeometry & g, int level);

    /// Builds the cached bases needed for these elements (levels L and, with `estimate`, L-1).
    /// Each distinct shape is built from its first element in the given order, so results do not
    /// depend on the thread count.
    void prepare(SpaceTag space, const std::vector<ElementGeometry> & elements, int level, bool estimate,
                 unsigned threads);

    std::size_t cache_size() const;

    struct Basis; // normalised per-shape data

  private:
    std::shared_ptr<const Basis> lookup(SpaceTag space, const ElementGeometry & g, int level);

    bool m_use_cache;
    mutable std::mutex m_mutex;
    std::map<std::vector<long long>, std::shared_ptr<const Basis>> m_cache;
  };

  /// One-off reconstruction (no caching).
  SubmeshField reconstruct(const DofVector & d, const ElementGeometry & g, int level, bool estimate = true);
  GramMatrix gram_matrix(SpaceTag space, const ElementGeometry & g, int level, bool estimate = true);

  double l2_inner(const SubmeshField & a, const SubmeshField & b);
  double l2_norm(const SubmeshField & f);
  /// Exact L2 distance of two reconstructions of the same element (levels may differ).
  double l2_distance(const SubmeshField & a, const SubmeshField & b);
  /// Composite quadrature of the given degree on the submesh of `a`.
  double l2_distance(const SubmeshField & a, const AnalyticField & b, int degree = 6);
  double l2_distance(const SubmeshField & a, const PolyField & b);

  /// DOFs of a reconstruction computed from its boundary traces (exact for piecewise affine fields).
  DofVector reextract_dofs(const SubmeshField & f, const ElementGeometry & g);

  /// Enhancing-constraint moments of a reconstruction: Face2D int psi . x_F^perp, Edge2D int v . x_F,
  /// Face3D int psi . (x_E x e_j), Edge3D int curl v . (x_E x e_j).
  Eigen::VectorXd constraint_moments(const SubmeshField & f, const ElementGeometry & g);

  /// Second moment matrix int_T y y^T, y = x - centroid (triangle or tetrahedron).
  Eigen::Matrix3d second_moment(const SimplexSubmesh & sm, std::size_t s);

} // namespace vemfacet

#endif
