#include "saferec/rng.hpp"

#include <cmath>

#include "saferec/error.hpp"
#include "saferec/stats.hpp"

namespace saferec {

double Rng::normal() { return normal_quantile(uniform_open01()); }

double Rng::gamma(double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "InvalidParameter", "gamma needs shape, scale > 0");
  if (shape < 1.0) {
    // Boost to shape+1 and correct with a power of a uniform.
    const double u = uniform_open01();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

}  // namespace saferec
