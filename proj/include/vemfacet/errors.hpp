#ifndef VEMFACET_ERRORS_HPP
#define VEMFACET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vemfacet
{

  /// Malformed input text (mesh files, configs, DOF files).
  class ParseError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// Input is well formed but violates a geometric or structural invariant.
  class ValidationError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// A local solve failed or an accuracy check did not converge.
  class NumericalError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

} // namespace vemfacet

#endif
