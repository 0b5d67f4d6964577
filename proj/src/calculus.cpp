#include <vemfacet/calculus.hpp>
#include <vemfacet/quadrature.hpp>

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace vemfacet
{

  namespace
  {
    constexpr std::array<std::array<int, 3>, PolyField::n_monomials> exponents{{
      {0, 0, 0},
      {1, 0, 0},
      {0, 1, 0},
      {0, 0, 1},
      {2, 0, 0},
      {1, 1, 0},
      {1, 0, 1},
      {0, 2, 0},
      {0, 1, 1},
      {0, 0, 2},
    }};

    int monomial_index(int p0, int p1, int p2)
    {
      for (int m = 0; m < PolyField::n_monomials; ++m) {
        if (exponents[m][0] == p0 && exponents[m][1] == p1 && exponents[m][2] == p2) {
          return m;
        }
      }
      return -1;
    }

    int total_degree(int m) { return exponents[m][0] + exponents[m][1] + exponents[m][2]; }

    void require_same_center(const PolyField & a, const PolyField & b)
    {
      if (!(a.center() - b.center()).isZero(0.0)) {
        throw std::invalid_argument("polynomial fields expanded about different centers");
      }
    }

    // scalar field a . v for a 3-component field v
    PolyField project(const PolyField & v, const Eigen::Vector3d & e)
    {
      PolyField p(1, v.center());
      p.coefficients() = e.transpose() * v.coefficients();
      return p;
    }

    PolyField stack(const PolyField & a, const PolyField & b, const PolyField & c)
    {
      PolyField v(3, a.center());
      v.coefficients().row(0) = a.coefficients().row(0);
      v.coefficients().row(1) = b.coefficients().row(0);
      v.coefficients().row(2) = c.coefficients().row(0);
      return v;
    }

    // outer product e * p for a scalar p
    PolyField times_vector(const PolyField & p, const Eigen::Vector3d & e)
    {
      PolyField v(3, p.center());
      v.coefficients() = e * p.coefficients().row(0);
      return v;
    }
  } // namespace

  PolyField::PolyField(int components, const Eigen::Vector3d & center)
      : m_coeffs(Coefficients::Zero(components, n_monomials)), m_center(center)
  {
    if (components != 1 && components != 3) {
      throw std::invalid_argument("polynomial fields have 1 or 3 components");
    }
  }

  PolyField PolyField::constant(const Eigen::Vector3d & c, const Eigen::Vector3d & center)
  {
    PolyField f(3, center);
    f.m_coeffs.col(0) = c;
    return f;
  }

  PolyField PolyField::scalar_constant(double c, const Eigen::Vector3d & center)
  {
    PolyField f(1, center);
    f.m_coeffs(0, 0) = c;
    return f;
  }

  PolyField PolyField::position(const Eigen::Vector3d & center)
  {
    return affine(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity(), center);
  }

  PolyField PolyField::affine(const Eigen::Vector3d & a, const Eigen::Matrix3d & B, const Eigen::Vector3d & center)
  {
    PolyField f(3, center);
    f.m_coeffs.col(0) = a;
    f.m_coeffs.block(0, 1, 3, 3) = B;
    return f;
  }

  int PolyField::degree() const
  {
    int d = 0;
    for (int m = 0; m < n_monomials; ++m) {
      if (!m_coeffs.col(m).isZero(0.0)) {
        d = std::max(d, total_degree(m));
      }
    }
    return d;
  }

  Eigen::VectorXd PolyField::operator()(const Eigen::Vector3d & x) const
  {
    const Eigen::Vector3d y = x - m_center;
    Eigen::Matrix<double, n_monomials, 1> mono;
    mono << 1.0, y(0), y(1), y(2), y(0) * y(0), y(0) * y(1), y(0) * y(2), y(1) * y(1), y(1) * y(2), y(2) * y(2);
    return m_coeffs * mono;
  }

  PolyField PolyField::derivative(int k) const
  {
    PolyField d(components(), m_center);
    for (int m = 0; m < n_monomials; ++m) {
      const int p = exponents[m][k];
      if (p == 0) {
        continue;
      }
      auto e = exponents[m];
      e[k] -= 1;
      d.m_coeffs.col(monomial_index(e[0], e[1], e[2])) += double(p) * m_coeffs.col(m);
    }
    return d;
  }

  PolyField PolyField::derivative(const Eigen::Vector3d & e) const
  {
    return derivative(0) * e(0) + derivative(1) * e(1) + derivative(2) * e(2);
  }

  PolyField PolyField::component(int i) const
  {
    PolyField c(1, m_center);
    c.m_coeffs.row(0) = m_coeffs.row(i);
    return c;
  }

  PolyField PolyField::recentered(const Eigen::Vector3d & center) const
  {
    // y = y' + delta with y' = x - center
    const Eigen::Vector3d delta = center - m_center;
    std::array<PolyField, 3> y{PolyField(1, center), PolyField(1, center), PolyField(1, center)};
    for (int k = 0; k < 3; ++k) {
      y[k].m_coeffs(0, 0) = delta(k);
      y[k].m_coeffs(0, 1 + k) = 1.0;
    }
    PolyField out(components(), center);
    for (int m = 0; m < n_monomials; ++m) {
      PolyField mono = PolyField::scalar_constant(1.0, center);
      for (int k = 0; k < 3; ++k) {
        for (int p = 0; p < exponents[m][k]; ++p) {
          mono = multiply(mono, y[k]);
        }
      }
      out.m_coeffs += m_coeffs.col(m) * mono.m_coeffs.row(0);
    }
    return out;
  }

  PolyField PolyField::operator+(const PolyField & other) const
  {
    require_same_center(*this, other);
    if (components() != other.components()) {
      throw std::invalid_argument("component count mismatch");
    }
    PolyField r(*this);
    r.m_coeffs += other.m_coeffs;
    return r;
  }

  PolyField PolyField::operator-(const PolyField & other) const { return *this + other * -1.0; }

  PolyField PolyField::operator*(double s) const
  {
    PolyField r(*this);
    r.m_coeffs *= s;
    return r;
  }

  PolyField multiply(const PolyField & a, const PolyField & b)
  {
    require_same_center(a, b);
    if (a.components() != 1 || b.components() != 1) {
      throw std::invalid_argument("multiply expects scalar fields");
    }
    PolyField r(1, a.center());
    for (int i = 0; i < PolyField::n_monomials; ++i) {
      for (int j = 0; j < PolyField::n_monomials; ++j) {
        const double c = a.coefficients()(0, i) * b.coefficients()(0, j);
        if (c == 0.0) {
          continue;
        }
        const int m = monomial_index(exponents[i][0] + exponents[j][0], exponents[i][1] + exponents[j][1],
                                     exponents[i][2] + exponents[j][2]);
        if (m < 0) {
          throw std::invalid_argument("product exceeds the maximum polynomial degree " + std::to_string(max_poly_degree));
        }
        r.coefficients()(0, m) += c;
      }
    }
    return r;
  }

  PolyField dot(const PolyField & a, const PolyField & b)
  {
    if (a.components() != 3 || b.components() != 3) {
      throw std::invalid_argument("dot expects vector fields");
    }
    PolyField r = PolyField::scalar_constant(0.0, a.center());
    for (int k = 0; k < 3; ++k) {
      r = r + multiply(a.component(k), b.component(k));
    }
    return r;
  }

  PolyField cross(const PolyField & a, const PolyField & b)
  {
    if (a.components() != 3 || b.components() != 3) {
      throw std::invalid_argument("cross expects vector fields");
    }
    auto m = [&](int i, int j) { return multiply(a.component(i), b.component(j)); };
    return stack(m(1, 2) - m(2, 1), m(2, 0) - m(0, 2), m(0, 1) - m(1, 0));
  }

  PolyField apply_diff(DiffOp op, const PolyField & f, const FaceFrame * frame)
  {
    const bool face_op = op == DiffOp::rot_F || op == DiffOp::curl_F || op == DiffOp::div_F || op == DiffOp::grad_F;
    if (face_op && frame == nullptr) {
      throw std::invalid_argument("face operator requires a face frame");
    }
    const bool scalar_in = op == DiffOp::grad || op == DiffOp::curl_F || op == DiffOp::grad_F;
    if (scalar_in != (f.components() == 1)) {
      throw std::invalid_argument("operator applied to a field of the wrong dimension");
    }
    switch (op) {
    case DiffOp::grad:
      return stack(f.derivative(0), f.derivative(1), f.derivative(2));
    case DiffOp::div:
      return f.component(0).derivative(0) + f.component(1).derivative(1) + f.component(2).derivative(2);
    case DiffOp::curl:
      return stack(f.component(2).derivative(1) - f.component(1).derivative(2),
                   f.component(0).derivative(2) - f.component(2).derivative(0),
                   f.component(1).derivative(0) - f.component(0).derivative(1));
    case DiffOp::rot_F:
      return project(f, frame->e2).derivative(frame->e1) - project(f, frame->e1).derivative(frame->e2);
    case DiffOp::div_F:
      return project(f, frame->e1).derivative(frame->e1) + project(f, frame->e2).derivative(frame->e2);
    case DiffOp::curl_F:
      return times_vector(f.derivative(frame->e2), frame->e1) - times_vector(f.derivative(frame->e1), frame->e2);
    case DiffOp::grad_F:
      return times_vector(f.derivative(frame->e1), frame->e1) + times_vector(f.derivative(frame->e2), frame->e2);
    }
    throw std::invalid_argument("unknown operator");
  }

  AnalyticField AnalyticField::from_poly(const PolyField & f, const std::string & name)
  {
    if (f.components() != 3) {
      throw std::invalid_argument("analytic fields are vector valued");
    }
    AnalyticField a;
    a.name = name;
    a.dimension = 3;
    a.value = [f](const Eigen::Vector3d & x) -> Eigen::Vector3d { return f(x); };
    const PolyField d = apply_diff(DiffOp::div, f);
    const PolyField c = apply_diff(DiffOp::curl, f);
    a.div = [d](const Eigen::Vector3d & x) { return d(x)(0); };
    a.curl = [c](const Eigen::Vector3d & x) -> Eigen::Vector3d { return c(x); };
    return a;
  }

  SelfTestResult self_test(const AnalyticField & field, std::uint64_t seed, int samples, double length, double tol)
  {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, length);
    const double h = 1e-5 * length;
    const int dim = field.dimension;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      Eigen::Vector3d x(U(rng), U(rng), dim == 3 ? U(rng) : 0.0);
      // J(i,k) = d v_i / d x_k
      Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
      for (int k = 0; k < dim; ++k) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e(k) = h;
        J.col(k) = (field.value(x + e) - field.value(x - e)) / (2.0 * h);
      }
      const double scale = std::max(J.norm(), field.value(x).norm() / length) + 1e-300;
      if (field.div) {
        const double fd = J.trace();
        worst = std::max(worst, std::abs(fd - field.div(x)) / scale);
      }
      if (field.curl) {
        Eigen::Vector3d fd(J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1));
        Eigen::Vector3d an = field.curl(x);
        if (dim == 2) {
          fd.head<2>().setZero();
          an.head<2>().setZero();
        }
        worst = std::max(worst, (fd - an).norm() / scale);
      }
    }
    return {worst <= tol, worst};
  }

  //------------------------------------------------------------------------------
  // Integration
  //------------------------------------------------------------------------------

  namespace
  {
    void check_rule_degree(const PolyField & f, int degree)
    {
      if (degree > max_rule_degree) {
        throw std::invalid_argument("quadrature degree " + std::to_string(degree) + " unsupported");
      }
      if (degree < f.degree()) {
        throw std::invalid_argument("rule degree below the polynomial degree");
      }
    }
  } // namespace

  Eigen::VectorXd integrate(const FaceGeometry & face, const PolyField & f, int degree)
  {
    check_rule_degree(f, degree);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(f.components());
    const std::size_t n = face.points.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto & q : triangle_rule(face.barycenter, face.points[i], face.points[(i + 1) % n], degree)) {
        r += q.w * f(q.x);
      }
    }
    return r;
  }

  Eigen::VectorXd integrate(const ElementGeometry & element, const PolyField & f, int degree)
  {
    if (element.dimension == 2) {
      return integrate(element.polygon(), f, degree);
    }
    check_rule_degree(f, degree);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(f.components());
    for (const auto & face : element.faces) {
      const std::size_t n = face.points.size();
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto & q :
             tetrahedron_rule(element.barycenter, face.barycenter, face.points[i], face.points[(i + 1) % n], degree)) {
          r += q.w * f(q.x);
        }
      }
    }
    return r;
  }

  Eigen::VectorXd integrate_segment(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const PolyField & f,
                                    int degree)
  {
    check_rule_degree(f, degree);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(f.components());
    for (const auto & q : segment_rule(a, b, degree)) {
      r += q.w * f(q.x);
    }
    return r;
  }

  double integrate(const SimplexSubmesh & sm, const std::function<double(const Eigen::Vector3d &)> & f, int degree)
  {
    double r = 0.0;
    for (const auto & t : sm.simplices) {
      const QuadratureRule rule = sm.dimension == 2
                                    ? triangle_rule(sm.nodes[t[0]], sm.nodes[t[1]], sm.nodes[t[2]], degree)
                                    : tetrahedron_rule(sm.nodes[t[0]], sm.nodes[t[1]], sm.nodes[t[2]], sm.nodes[t[3]], degree);
      for (const auto & q : rule) {
        r += q.w * f(q.x);
      }
    }
    return r;
  }

  Eigen::Vector3d integrate(const SimplexSubmesh & sm, const AnalyticField & f, int degree)
  {
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (const auto & t : sm.simplices) {
      const QuadratureRule rule = sm.dimension == 2
                                    ? triangle_rule(sm.nodes[t[0]], sm.nodes[t[1]], sm.nodes[t[2]], degree)
                                    : tetrahedron_rule(sm.nodes[t[0]], sm.nodes[t[1]], sm.nodes[t[2]], sm.nodes[t[3]], degree);
      for (const auto & q : rule) {
        r += q.w * f.value(q.x);
      }
    }
    return r;
  }

  Eigen::Vector3d integrate_segment(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const AnalyticField & f,
                                    int degree, int pieces)
  {
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (int p = 0; p < pieces; ++p) {
      const Eigen::Vector3d s0 = a + (b - a) * (double(p) / pieces);
      const Eigen::Vector3d s1 = a + (b - a) * (double(p + 1) / pieces);
      for (const auto & q : segment_rule(s0, s1, degree)) {
        r += q.w * f.value(q.x);
      }
    }
    return r;
  }

} // namespace vemfacet
