#include <vemfacet/quadrature.hpp>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vemfacet
{

  void gauss_jacobi_01(int n, int alpha, std::vector<double> & nodes, std::vector<double> & weights)
  {
    // Jacobi matrix for weight (1-x)^alpha on [-1,1], beta = 0.
    const double a = alpha;
    const double b = 0.0;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      const double s = 2.0 * k + a + b;
      if (k == 0) {
        J(0, 0) = (b - a) / (a + b + 2.0);
      } else {
        J(k, k) = (b * b - a * a) / (s * (s + 2.0));
      }
      if (k + 1 < n) {
        const double m = k + 1;
        const double t = 2.0 * m + a + b;
        const double off = std::sqrt(4.0 * m * (m + a) * (m + b) * (m + a + b) / (t * t * (t + 1.0) * (t - 1.0)));
        J(k, k + 1) = off;
        J(k + 1, k) = off;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    // mu0 = int_{-1}^{1} (1-x)^alpha dx
    const double mu0 = std::pow(2.0, a + 1.0) / (a + 1.0);
    nodes.resize(n);
    weights.resize(n);
    for (int k = 0; k < n; ++k) {
      const double x = eig.eigenvalues()(k);
      const double v0 = eig.eigenvectors()(0, k);
      nodes[k] = 0.5 * (x + 1.0);
      weights[k] = mu0 * v0 * v0 / std::pow(2.0, a + 1.0);
    }
  }

  namespace
  {
    struct ReferenceRules
    {
      // points in collapsed reference coordinates, weights normalised to sum 1
      std::array<std::vector<std::pair<double, double>>, max_rule_degree + 1> segment;
      std::array<std::vector<std::pair<Eigen::Vector2d, double>>, max_rule_degree + 1> triangle;
      std::array<std::vector<std::pair<Eigen::Vector3d, double>>, max_rule_degree + 1> tetrahedron;

      ReferenceRules()
      {
        for (int deg = 0; deg <= max_rule_degree; ++deg) {
          const int n = std::max(1, (deg + 2) / 2);
          std::vector<double> x0, w0, x1, w1, x2, w2;
          gauss_jacobi_01(n, 0, x0, w0);
          gauss_jacobi_01(n, 1, x1, w1);
          gauss_jacobi_01(n, 2, x2, w2);
          for (int i = 0; i < n; ++i) {
            segment[deg].emplace_back(x0[i], w0[i]);
          }
          // triangle: xi = u, eta = v (1-u); jacobian (1-u); reference area 1/2
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              triangle[deg].emplace_back(Eigen::Vector2d(x1[i], x0[j] * (1.0 - x1[i])), 2.0 * w1[i] * w0[j]);
            }
          }
          // tetrahedron: jacobian (1-u)^2 (1-v); reference volume 1/6
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              for (int k = 0; k < n; ++k) {
                const double u = x2[i];
                const double v = x1[j];
                const double w = x0[k];
                tetrahedron[deg].emplace_back(Eigen::Vector3d(u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)),
                                              6.0 * w2[i] * w1[j] * w0[k]);
              }
            }
          }
        }
      }
    };

    const ReferenceRules & reference_rules()
    {
      static const ReferenceRules rules;
      return rules;
    }

    void check_degree(int degree)
    {
      if (degree < 0 || degree > max_rule_degree) {
        throw std::invalid_argument("quadrature degree " + std::to_string(degree) + " unsupported (max "
                                    + std::to_string(max_rule_degree) + ")");
      }
    }
  } // namespace

  double triangle_area(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c)
  {
    return 0.5 * (b - a).cross(c - a).norm();
  }

  double tetrahedron_volume(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c,
                            const Eigen::Vector3d & d)
  {
    return std::abs((b - a).dot((c - a).cross(d - a))) / 6.0;
  }

  QuadratureRule segment_rule(const Eigen::Vector3d & a, const Eigen::Vector3d & b, int degree)
  {
    check_degree(degree);
    const double len = (b - a).norm();
    QuadratureRule rule;
    for (const auto & [u, w] : reference_rules().segment[degree]) {
      rule.push_back({a + u * (b - a), w * len});
    }
    return rule;
  }

  QuadratureRule triangle_rule(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c,
                               int degree)
  {
    check_degree(degree);
    const double area = triangle_area(a, b, c);
    QuadratureRule rule;
    for (const auto & [p, w] : reference_rules().triangle[degree]) {
      rule.push_back({a + p(0) * (b - a) + p(1) * (c - a), w * area});
    }
    return rule;
  }

  QuadratureRule tetrahedron_rule(const Eigen::Vector3d & a, const Eigen::Vector3d & b, const Eigen::Vector3d & c,
                                  const Eigen::Vector3d & d, int degree)
  {
    check_degree(degree);
    const double vol = tetrahedron_volume(a, b, c, d);
    QuadratureRule rule;
    for (const auto & [p, w] : reference_rules().tetrahedron[degree]) {
      rule.push_back({a + p(0) * (b - a) + p(1) * (c - a) + p(2) * (d - a), w * vol});
    }
    return rule;
  }

} // namespace vemfacet
