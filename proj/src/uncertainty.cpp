#include "ucscreen/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ucscreen {

void Forecast::validate(const Network& net) const {
  if (load.size() != net.num_buses())
    throw ValidationError("forecast length does not match bus count");
  if (!load.allFinite()) throw ValidationError("forecast has non-finite entries");
}

void BoxUncertainty::validate(const Network& net) const {
  const int n = net.num_buses();
  if (beta1.size() != n || beta2.size() != n)
    throw ValidationError("box factors must have one entry per bus");
  std::vector<char> uncertain(n, 0);
  for (int b : uncertain_nodes) {
    if (b < 0 || b >= n) throw ValidationError("uncertain node index out of range");
    uncertain[b] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (uncertain[i]) {
      if (beta1[i] > 1.0 + 1e-12 || beta2[i] < 1.0 - 1e-12)
        throw ValidationError("box requires beta1 <= 1 <= beta2 on uncertain nodes");
    } else if (beta1[i] != 1.0 || beta2[i] != 1.0) {
      throw ValidationError("box factors must be 1 on certain nodes");
    }
  }
}

BoxUncertainty BoxUncertainty::uniform(const Network& net, double b1, double b2,
                                       const std::vector<int>& uncertain_nodes) {
  BoxUncertainty u;
  const int n = net.num_buses();
  u.beta1.setOnes(n);
  u.beta2.setOnes(n);
  u.uncertain_nodes = uncertain_nodes;
  for (int b : uncertain_nodes) {
    if (b < 0 || b >= n) throw ValidationError("uncertain node index out of range");
    u.beta1[b] = b1;
    u.beta2[b] = b2;
  }
  u.validate(net);
  return u;
}

void GaussianUncertainty::validate(const Network& net) const {
  if (sigma2.size() != net.num_buses())
    throw ValidationError("sigma2 must have one entry per bus");
  if ((sigma2.array() < 0.0).any())
    throw ValidationError("variances must be >= 0");
  if (!(epsilon_x > 0.0 && epsilon_x < 0.5) || !(epsilon_f > 0.0 && epsilon_f < 0.5))
    throw ValidationError("risk levels must lie in (0, 0.5)");
  if (alpha.size() != net.num_gens())
    throw ValidationError("alpha must have one entry per generator");
  if ((alpha.array() < -1e-12).any())
    throw ValidationError("participation factors must be >= 0");
  if (std::abs(alpha.sum() - 1.0) > 1e-9)
    throw ValidationError("participation factors must sum to 1");
}

double GaussianUncertainty::sigma_omega() const {
  return std::sqrt(sigma2.sum());
}

Eigen::VectorXd GaussianUncertainty::sigma_flow(const Network& net,
                                                const PtdfMatrix& ptdf) const {
  // Per-bus total participation, so multiple generators on one bus behave
  // like the single aggregated unit the flow formula assumes.
  Eigen::VectorXd alpha_bus = Eigen::VectorXd::Zero(net.num_buses());
  for (int g = 0; g < net.num_gens(); ++g)
    alpha_bus[net.bus_index(net.generators[g].bus)] += alpha[g];

  const double s2_omega = sigma2.sum();
  Eigen::VectorXd out(net.num_lines());
  for (int j = 0; j < net.num_lines(); ++j) {
    double v = 0.0;
    for (int i = 0; i < net.num_buses(); ++i) {
      const double a = ptdf(j, i);
      v += a * a * (sigma2[i] + alpha_bus[i] * alpha_bus[i] * s2_omega);
    }
    out[j] = std::sqrt(v);
  }
  return out;
}

GaussianUncertainty GaussianUncertainty::uniform_alpha(const Network& net,
                                                       const Eigen::VectorXd& sigma2,
                                                       double epsilon_x,
                                                       double epsilon_f) {
  GaussianUncertainty u;
  u.sigma2 = sigma2;
  u.epsilon_x = epsilon_x;
  u.epsilon_f = epsilon_f;
  u.alpha.setZero(net.num_gens());
  int participating = 0;
  for (int g = 0; g < net.num_gens(); ++g)
    if (net.generators[g].participates && net.generators[g].pmax > 0.0)
      ++participating;
  if (participating == 0)
    throw ValidationError("no participating generator with nonzero capacity");
  for (int g = 0; g < net.num_gens(); ++g)
    if (net.generators[g].participates && net.generators[g].pmax > 0.0)
      u.alpha[g] = 1.0 / participating;
  u.validate(net);
  return u;
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("normal_quantile requires p in (0,1)");
  double lo = -40.0, hi = 40.0;
  // Bisection to 1e-10; ~60 iterations.
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct Rng::Impl {
  std::mt19937_64 engine;
  bool have_spare = false;
  double spare = 0.0;
};

Rng::Rng(std::uint64_t seed) : impl_(new Impl) { impl_->engine.seed(seed); }
Rng::~Rng() { delete impl_; }
Rng::Rng(Rng&& other) noexcept : impl_(other.impl_) { other.impl_ = nullptr; }
Rng& Rng::operator=(Rng&& other) noexcept {
  std::swap(impl_, other.impl_);
  return *this;
}

double Rng::uniform() {
  // 53 random bits -> [0, 1)
  return (impl_->engine() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (impl_->have_spare) {
    impl_->have_spare = false;
    return impl_->spare;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  impl_->spare = r * std::sin(a);
  impl_->have_spare = true;
  return r * std::cos(a);
}

}  // namespace ucscreen
