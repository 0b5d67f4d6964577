#ifndef VEMFACET_SPACES_HPP
#define VEMFACET_SPACES_HPP

#include <string>

#include <Eigen/Dense>

#include <vemfacet/calculus.hpp>
#include <vemfacet/mesh.hpp>

namespace vemfacet
{

  /// The four lowest-order virtual element spaces.
  ///
  /// Face2D / Edge2D live on a polygon (a 2D cell, or a face of a 3D cell); Face3D / Edge3D on a
  /// polyhedron.
  enum class SpaceTag
  {
    Face2D,
    Edge2D,
    Face3D,
    Edge3D
  };

  std::string to_string(SpaceTag space);
  /// Accepts "face2d", "edge2d", "face3d", "edge3d" (case-insensitive). Throws ValidationError.
  SpaceTag parse_space(const std::string & name);
  inline int space_dimension(SpaceTag s) { return (s == SpaceTag::Face2D || s == SpaceTag::Edge2D) ? 2 : 3; }
  inline bool is_face_space(SpaceTag s) { return s == SpaceTag::Face2D || s == SpaceTag::Face3D; }

  /// DOF values of one virtual function on one element.
  ///
  ///  - Face2D: average of psi . n_e per polygon edge (outward in-plane normal), loop order;
  ///  - Edge2D: average of v . t_e per polygon edge (counterclockwise tangent), loop order;
  ///  - Face3D: average of psi . n_F per face (outward normal), cell face order;
  ///  - Edge3D: average of v . t~_e per edge (global tangent), ascending global edge id.
  struct DofVector
  {
    SpaceTag space = SpaceTag::Face3D;
    std::size_t element = 0;
    Eigen::VectorXd values;
  };

  std::size_t dof_count(SpaceTag space, const ElementGeometry & g);

  /// Quadrature used for the DOFs of analytic fields.
  struct DofQuadrature
  {
    int degree = 10;     ///< Gauss rule exactness
    int pieces = 4;      ///< segments per edge
    int refinement = 1;  ///< red refinements of the face fan
  };

  /// The interpolation operator at DOF level.
  DofVector extract_dofs(SpaceTag space, const AnalyticField & field, const ElementGeometry & g,
                         const DofQuadrature & q = {});
  DofVector extract_dofs(SpaceTag space, const PolyField & field, const ElementGeometry & g);
  /// DOFs of a 2D space on an arbitrary (possibly 3D-embedded) polygon.
  Eigen::VectorXd polygon_dofs(SpaceTag space, const AnalyticField & field, const FaceGeometry & face,
                               const DofQuadrature & q = {});

  /// DOFs of the constant field c (ambient coordinates).
  DofVector constant_dofs(SpaceTag space, const Eigen::Vector3d & c, const ElementGeometry & g);

  double div_constant(const DofVector & d, const ElementGeometry & g);
  double rot_constant(const DofVector & d, const ElementGeometry & g);
  /// Face3D DOFs of curl v for an Edge3D function v.
  DofVector curl_image(const DofVector & d, const ElementGeometry & g);

  /// L2 projection onto constants: 2 components in the polygon frame (2D spaces) or 3 (3D spaces).
  Eigen::VectorXd pi0(const DofVector & d, const ElementGeometry & g);
  /// Same, always as an ambient 3-vector.
  Eigen::Vector3d pi0_ambient(const DofVector & d, const ElementGeometry & g);

  double stabilization(const DofVector & d1, const DofVector & d2, const ElementGeometry & g);
  /// |K| Pi0 d1 . Pi0 d2 + S((I - Pi0) d1, (I - Pi0) d2).
  double discrete_inner(const DofVector & d1, const DofVector & d2, const ElementGeometry & g);

  // Matrices in the DOF basis.
  Eigen::MatrixXd stabilization_matrix(SpaceTag space, const ElementGeometry & g);
  Eigen::MatrixXd discrete_inner_matrix(SpaceTag space, const ElementGeometry & g);
  /// Rows: ambient components of Pi0.
  Eigen::MatrixXd pi0_matrix(SpaceTag space, const ElementGeometry & g);

  // Polygon-level closed forms for the 2D spaces (DOFs in loop order, as in DofVector).
  namespace polygon
  {
    double face_div(const FaceGeometry & f, const Eigen::VectorXd & d);
    double edge_rot(const FaceGeometry & f, const Eigen::VectorXd & d);
    Eigen::Vector3d face_pi0(const FaceGeometry & f, const Eigen::VectorXd & d);
    Eigen::Vector3d edge_pi0(const FaceGeometry & f, const Eigen::VectorXd & d);
    double stabilization(const FaceGeometry & f, const Eigen::VectorXd & d1, const Eigen::VectorXd & d2);
  } // namespace polygon

  /// DOFs of the Edge2D trace on face k of a 3D element, from Edge3D DOFs.
  Eigen::VectorXd face_trace_dofs(const DofVector & edge3d, const ElementGeometry & g, std::size_t k);

} // namespace vemfacet

#endif
