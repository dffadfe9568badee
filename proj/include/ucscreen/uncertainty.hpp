#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <variant>
#include <vector>

#include "ucscreen/network.hpp"

namespace ucscreen {

// Per-bus forecasted net demand, MW. Negative entries are allowed (net
// demand under renewables).
struct Forecast {
  Eigen::VectorXd load;  // dense bus order

  void validate(const Network& net) const;
  double total() const { return load.sum(); }
};

// Interval uncertainty: realized demand lies in [beta1*l, beta2*l]
// elementwise on the uncertain nodes; elsewhere both factors are 1.
struct BoxUncertainty {
  Eigen::VectorXd beta1;  // per bus, <= 1 on uncertain nodes, 1 elsewhere
  Eigen::VectorXd beta2;  // per bus, >= 1 on uncertain nodes, 1 elsewhere
  std::vector<int> uncertain_nodes;  // dense bus indices

  void validate(const Network& net) const;
  static BoxUncertainty uniform(const Network& net, double beta1, double beta2,
                                const std::vector<int>& uncertain_nodes);
};

// Gaussian forecast errors with diagonal covariance, plus the risk levels
// and recourse participation factors used by the deterministic equivalent.
struct GaussianUncertainty {
  Eigen::VectorXd sigma2;   // per-bus variance, MW^2
  double epsilon_x = 0.05;  // generation-bound risk level
  double epsilon_f = 0.05;  // flow-limit risk level
  Eigen::VectorXd alpha;    // per-generator participation, sums to 1

  void validate(const Network& net) const;
  double sigma_omega() const;  // sqrt(1' Sigma 1)
  // Std dev of the flow on each line under the recourse policy.
  Eigen::VectorXd sigma_flow(const Network& net, const PtdfMatrix& ptdf) const;

  // Uniform participation 1/|G| over participating generators with nonzero
  // capacity, zero elsewhere.
  static GaussianUncertainty uniform_alpha(const Network& net,
                                           const Eigen::VectorXd& sigma2,
                                           double epsilon_x, double epsilon_f);
};

using UncertaintyModel = std::variant<BoxUncertainty, GaussianUncertainty>;

// Inverse standard normal CDF by bisection on an erf-based CDF, accurate to
// 1e-10. p must lie in (0, 1).
double normal_quantile(double p);

// Deterministic RNG. The mt19937_64 engine is pinned bit-exact by the
// standard; the distributions are hand-rolled because the library ones are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  ~Rng();
  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  Rng(Rng&&) noexcept;
  Rng& operator=(Rng&&) noexcept;

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // Box-Muller, mean 0, sd 1

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace ucscreen
