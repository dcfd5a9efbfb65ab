#include "ictn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace ictn {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                  double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  std::vector<double> base = x0.values();
  const Shape shape = x0.shape();

  Tensor probe = Tensor::from_data(shape, base, /*requires_grad=*/true);
  Tensor y = f(probe);
  if (y.size() != 1)
    throw std::invalid_argument("grad_check: function must return a scalar, got shape " +
                                shape_str(y.shape()));
  y.backward();
  const std::vector<double> analytic = probe.grad();

  double worst = 0.0;
  {
    NoGradGuard no_grad;
    std::vector<double> bumped = base;
    for (std::size_t i = 0; i < base.size(); ++i) {
      bumped[i] = base[i] + eps;
      const double up = f(Tensor::from_data(shape, bumped)).value();
      bumped[i] = base[i] - eps;
      const double down = f(Tensor::from_data(shape, bumped)).value();
      bumped[i] = base[i];
      const double cd = (up - down) / (2.0 * eps);
      const double denom = std::max({std::fabs(analytic[i]), std::fabs(cd), 1e-12});
      worst = std::max(worst, std::fabs(analytic[i] - cd) / denom);
    }
  }
  return worst;
}

}  // namespace ictn
