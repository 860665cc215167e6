#pragma once

#include <Eigen/Core>

#include "kmf/surface.hpp"

namespace kmf_test {

// spectral transfer of a sphere potential onto a finer grid (same function,
// independent quadrature)
inline kmf::Potential refine_to(const kmf::SurfacePtr& fine, const kmf::Potential& u) {
  const auto& coarse = *u.surface;
  auto coef = coarse.sht->analyze(u.values);
  Eigen::VectorXd v(fine->num_nodes());
  for (int i = 0; i < fine->num_nodes(); ++i)
    v[i] = coarse.sht->evaluate(coef, fine->node_cos_theta(i), fine->node_phi(i));
  return {fine, std::move(v)};
}

}  // namespace kmf_test
