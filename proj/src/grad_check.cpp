#include "ducd/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ducd {
namespace {

double rel_err(double analytic, double numeric) {
  return std::fabs(analytic - numeric) /
         std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
}

double eval_scalar(const std::function<Tensor()>& f) {
  NoGradGuard ng;
  return f().item();
}

double run_check(const std::function<Tensor()>& f, Tensor& param,
                 const std::vector<std::size_t>& coords, double h) {
  const double v1 = eval_scalar(f);
  const double v2 = eval_scalar(f);
  if (v1 != v2)
    throw ValueError(
        "grad_check: function is not deterministic (two evaluations differ)");

  param.set_requires_grad(true);
  param.zero_grad();
  backward(f());
  if (!param.has_grad())
    throw ValueError("grad_check: no gradient reached the checked tensor");
  std::vector<double> analytic(param.grad_values());

  double worst = 0.0;
  double* data = param.data();
  for (std::size_t i : coords) {
    const double orig = data[i];
    data[i] = orig + h;
    const double fp = eval_scalar(f);
    data[i] = orig - h;
    const double fm = eval_scalar(f);
    data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h) {
  std::vector<std::size_t> coords(static_cast<std::size_t>(x.numel()));
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  auto closure = [&f, &x]() { return f(x); };
  return run_check(closure, x, coords, h);
}

double grad_check_coords(const std::function<Tensor()>& f, Tensor param,
                         const std::vector<std::size_t>& coords, double h) {
  return run_check(f, param, coords, h);
}

}  // namespace ducd
