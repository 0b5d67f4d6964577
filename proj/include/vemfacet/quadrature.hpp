#ifndef VEMFACET_QUADRATURE_HPP
#define VEMFACET_QUADRATURE_HPP

#include <vector>

#include <Eigen/Dense>

namespace vemfacet
{

  /// Highest polynomial degree integrated exactly by the simplex rules.
  inline constexpr int max_rule_degree = 10;

  struct QuadraturePoint
  {
    Eigen::Vector3d x;
    double w;
  };

  using QuadratureRule = std::vector<QuadraturePoint>;

  /// Gauss-Jacobi nodes/weights on [0,1] for the weight (1-u)^alpha (Golub-Welsch).
  /// Exact for polynomials of degree 2n-1 against that weight.
  void gauss_jacobi_01(int n, int alpha, std::vector<double> & nodes, std::vector<double> & weights);

  // Collapsed-coordinate rules, exact up to `degree`. Weights sum to the simplex measure.
  // Throws std::invalid_argument for degree outside [0, max_rule_degree].
  QuadratureRule segment_rule(const Eigen::Vector3d & a, const Eigen::Vector3d & b, int degree);
  QuadratureRule triangle_rule(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c,
                               int degree);
  QuadratureRule tetrahedron_rule(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c,
                                  const Eigen::Vector3d & d, int degree);

  double triangle_area(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c);
  double tetrahedron_volume(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c,
                            const Eigen::Vector3d & d);

} // namespace vemfacet

#endif
