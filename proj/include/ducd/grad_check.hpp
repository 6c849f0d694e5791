#pragma once

#include <functional>
#include <vector>

#include "ducd/tensor.hpp"

namespace ducd {

// Central-difference gradient verification.
//
// Evaluates f twice up front and throws ValueError if the results differ
// (f must be deterministic). Returns the max over coordinates of
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h = 1e-5);

// Same check for a parameter captured inside f, restricted to the given
// flat coordinates. Used for whole-model checks where perturbing every
// parameter would be wasteful.
double grad_check_coords(const std::function<Tensor()>& f, Tensor param,
                         const std::vector<std::size_t>& coords,
                         double h = 1e-5);

}  // namespace ducd
