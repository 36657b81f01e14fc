#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbqg/model.hpp"

namespace cbqg {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, double lr,
               const AdamHyper& hyper = {});

/// Adam over every parameter of a model.
class Adam {
 public:
  Adam(std::vector<NamedTensor>& params, double lr, AdamHyper hyper = {});
  void step();

 private:
  std::vector<NamedTensor>* params_;
  std::vector<AdamMoments> states_;
  double lr_;
  AdamHyper hyper_;
};

}  // namespace cbqg
