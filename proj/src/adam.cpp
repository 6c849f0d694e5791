#include <cmath>

#include "ducd/train.hpp"

namespace ducd {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamStore& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto n = params.entries()[i].second.values().size();
      m_[i].assign(n, 0.0);
      v_[i].assign(n, 0.0);
    }
  }
  if (m_.size() != params.size())
    throw TrainError("adam: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params.entries()[i];
    if (!p.has_grad())
      throw TrainError(cat("adam: missing gradient for parameter '", name,
                           "'"));
    double* w = p.data();
    const double* g = p.grad();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const auto n = p.values().size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace ducd
