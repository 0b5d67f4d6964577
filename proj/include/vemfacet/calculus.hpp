#ifndef VEMFACET_CALCULUS_HPP
#define VEMFACET_CALCULUS_HPP

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include <vemfacet/mesh.hpp>
#include <vemfacet/submesh.hpp>

namespace vemfacet
{

  /// Highest total degree of a PolyField.
  inline constexpr int max_poly_degree = 2;

  /// Scalar (1 component) or vector (3 components) polynomial of total degree <= 2 in y = x - center.
  ///
  /// Coefficients are stored per component against the monomials
  /// 1, y0, y1, y2, y0^2, y0 y1, y0 y2, y1^2, y1 y2, y2^2.
  class PolyField
  {
  public:
    static constexpr int n_monomials = 10;
    using Coefficients = Eigen::Matrix<double, Eigen::Dynamic, n_monomials>;

    explicit PolyField(int components = 3, const Eigen::Vector3d & center = Eigen::Vector3d::Zero());

    static PolyField constant(const Eigen::Vector3d & c, const Eigen::Vector3d & center = Eigen::Vector3d::Zero());
    static PolyField scalar_constant(double c, const Eigen::Vector3d & center = Eigen::Vector3d::Zero());
    /// The field x - center.
    static PolyField position(const Eigen::Vector3d & center);
    /// v(x) = a + B (x - center)
    static PolyField affine(const Eigen::Vector3d & a, const Eigen::Matrix3d & B, const Eigen::Vector3d & center);

    int components() const { return int(m_coeffs.rows()); }
    int degree() const;
    const Eigen::Vector3d & center() const { return m_center; }
    Coefficients & coefficients() { return m_coeffs; }
    const Coefficients & coefficients() const { return m_coeffs; }

    Eigen::VectorXd operator()(const Eigen::Vector3d & x) const;
    /// Partial derivative with respect to x_k.
    PolyField derivative(int k) const;
    /// Directional derivative along e.
    PolyField derivative(const Eigen::Vector3d & e) const;
    /// Same polynomial expanded about another center.
    PolyField recentered(const Eigen::Vector3d & center) const;
    PolyField component(int i) const;

    PolyField operator+(const PolyField & other) const;
    PolyField operator-(const PolyField & other) const;
    PolyField operator*(double s) const;

  private:
    Coefficients m_coeffs;
    Eigen::Vector3d m_center;
  };

  /// Product of two scalar fields (degree must stay <= 2).
  PolyField multiply(const PolyField & a, const PolyField & b);
  /// Pointwise dot product of two vector fields (degree must stay <= 2).
  PolyField dot(const PolyField & a, const PolyField & b);
  /// Pointwise cross product of two vector fields.
  PolyField cross(const PolyField & a, const PolyField & b);

  /// Orthonormal frame of a face: the differential operators rot_F, curl_F, div_F act in (e1, e2).
  struct FaceFrame
  {
    Eigen::Vector3d e1;
    Eigen::Vector3d e2;
    Eigen::Vector3d normal;

    static FaceFrame of(const FaceGeometry & face) { return {face.e1, face.e2, face.normal}; }
  };

  enum class DiffOp
  {
    grad,
    div,
    curl,
    rot_F,
    curl_F,
    div_F,
    grad_F
  };

  /// Exact differentiation. rot_F v = -d2 v1 + d1 v2 and curl_F p = (d2 p, -d1 p) in the face frame
  /// (returned as ambient vectors). Throws std::invalid_argument on a dimensional mismatch or a
  /// missing frame for face operators.
  PolyField apply_diff(DiffOp op, const PolyField & f, const FaceFrame * frame = nullptr);

  /// Smooth user field R^3 -> R^3 (2D fields leave the third component zero).
  struct AnalyticField
  {
    std::string name;
    int dimension = 3; ///< 2 or 3
    std::function<Eigen::Vector3d(const Eigen::Vector3d &)> value;
    std::function<double(const Eigen::Vector3d &)> div;           ///< optional
    std::function<Eigen::Vector3d(const Eigen::Vector3d &)> curl; ///< optional; in 2D only the z-part (rot) matters
    double regularity = 1.0;                                      ///< label s in (1/2, 1]

    static AnalyticField from_poly(const PolyField & f, const std::string & name = "poly");
  };

  struct SelfTestResult
  {
    bool ok;
    double max_relative_error;
  };

  /// Compares the derivative callbacks against central differences with step 1e-5 * length.
  SelfTestResult self_test(const AnalyticField & field, std::uint64_t seed, int samples = 16, double length = 1.0,
                           double tol = 1e-6);

  //------------------------------------------------------------------------------
  // Integration
  //------------------------------------------------------------------------------

  /// Exact integral of a polynomial over a 3D element or a 2D cell (fan decomposition). Returns one
  /// value per component.
  Eigen::VectorXd integrate(const ElementGeometry & element, const PolyField & f, int degree = max_poly_degree);
  Eigen::VectorXd integrate(const FaceGeometry & face, const PolyField & f, int degree = max_poly_degree);
  Eigen::VectorXd integrate_segment(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const PolyField & f,
                                    int degree = max_poly_degree);

  /// Composite rule of the given degree on every simplex of the submesh.
  Eigen::Vector3d integrate(const SimplexSubmesh & submesh, const AnalyticField & f, int degree);
  double integrate(const SimplexSubmesh & submesh, const std::function<double(const Eigen::Vector3d &)> & f,
                   int degree);
  /// Composite rule over a segment split into `pieces` equal parts.
  Eigen::Vector3d integrate_segment(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const AnalyticField & f,
                                    int degree, int pieces = 1);

} // namespace vemfacet

#endif
