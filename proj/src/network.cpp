#include "ucscreen/network.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

namespace ucscreen {

int Network::bus_index(int external_id) const {
  for (int i = 0; i < num_buses(); ++i)
    if (buses[i] == external_id) return i;
  return -1;
}

bool Network::is_connected() const {
  const int n = num_buses();
  if (n == 0) return false;
  std::vector<std::vector<int>> adj(n);
  for (const Branch& br : branches) {
    const int f = bus_index(br.from_bus), t = bus_index(br.to_bus);
    if (f < 0 || t < 0) return false;
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

void Network::validate() const {
  if (buses.empty()) throw ValidationError("network has no buses");
  std::set<int> ids(buses.begin(), buses.end());
  if (static_cast<int>(ids.size()) != num_buses())
    throw ValidationError("duplicate bus id");
  if (!ids.count(reference_bus))
    throw ValidationError("reference_bus " + std::to_string(reference_bus) +
                          " is not a declared bus");
  for (size_t j = 0; j < branches.size(); ++j) {
    const Branch& br = branches[j];
    std::ostringstream where;
    where << "branch " << j << " (" << br.from_bus << "," << br.to_bus << ")";
    if (!ids.count(br.from_bus) || !ids.count(br.to_bus))
      throw ValidationError(where.str() + ": endpoint is not a declared bus");
    if (!(br.reactance > 0.0) || !std::isfinite(br.reactance))
      throw ValidationError(where.str() + ": reactance must be > 0");
    if (!(br.limit > 0.0))
      throw ValidationError(where.str() + ": flow limit must be > 0");
  }
  for (size_t g = 0; g < generators.size(); ++g) {
    const Generator& gen = generators[g];
    if (!ids.count(gen.bus))
      throw ValidationError("generator " + std::to_string(g) +
                            ": bus is not declared");
    if (gen.pmin > gen.pmax)
      throw ValidationError("generator " + std::to_string(g) + ": pmin > pmax");
    if (!std::isfinite(gen.pmin) || !std::isfinite(gen.pmax) ||
        !std::isfinite(gen.cost))
      throw ValidationError("generator " + std::to_string(g) +
                            ": non-finite field");
  }
  for (int b : buses) {
    bool has = false;
    for (const Generator& gen : generators)
      if (gen.bus == b) { has = true; break; }
    if (!has)
      throw ValidationError("bus " + std::to_string(b) +
                            " has no generation variable (call "
                            "ensure_generator_per_bus after construction)");
  }
  if (!is_connected()) throw ValidationError("branch graph is not connected");
}

void ensure_generator_per_bus(Network& net) {
  for (int b : net.buses) {
    bool has = false;
    for (const Generator& g : net.generators)
      if (g.bus == b) { has = true; break; }
    if (!has)
      net.generators.push_back(Generator{b, 0.0, 0.0, 0.0, false});
  }
}

namespace {

// Susceptance Laplacian of the branch graph, dense bus order.
Eigen::MatrixXd susceptance_matrix(const Network& net) {
  const int n = net.num_buses();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const double y = 1.0 / br.reactance;
    B(f, f) += y;
    B(t, t) += y;
    B(f, t) -= y;
    B(t, f) -= y;
  }
  return B;
}

}  // namespace

PtdfMatrix compute_ptdf(const Network& net) {
  net.validate();
  const int n = net.num_buses();
  const int ref = net.reference_index();
  const Eigen::MatrixXd B = susceptance_matrix(net);

  // Drop the reference row/column, factor once, solve for all unit injections.
  std::vector<int> keep;
  keep.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != ref) keep.push_back(i);
  Eigen::MatrixXd Br(n - 1, n - 1);
  for (int r = 0; r < n - 1; ++r)
    for (int c = 0; c < n - 1; ++c) Br(r, c) = B(keep[r], keep[c]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Br);
  const double rcond_proxy = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(rcond_proxy > 1e-12))
    throw ValidationError("reduced susceptance matrix is singular");

  // theta(:, i): angles for 1 MW injected at non-reference bus i.
  const Eigen::MatrixXd theta_red =
      lu.solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < n - 1; ++c)
    for (int r = 0; r < n - 1; ++r) theta(keep[r], keep[c]) = theta_red(r, c);

  PtdfMatrix out;
  out.reference_index = ref;
  out.factors.setZero(net.num_lines(), n);
  for (int j = 0; j < net.num_lines(); ++j) {
    const Branch& br = net.branches[j];
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    for (int i = 0; i < n; ++i)
      out.factors(j, i) = (theta(f, i) - theta(t, i)) / br.reactance;
  }
  return out;
}

Eigen::VectorXd angle_flows(const Network& net, const Eigen::VectorXd& injections) {
  const int n = net.num_buses();
  if (injections.size() != n) throw ValidationError("injection vector length");
  if (std::abs(injections.sum()) > 1e-6 * std::max(1.0, injections.cwiseAbs().maxCoeff()))
    throw ValidationError("injections must sum to zero");
  const int ref = net.reference_index();
  const Eigen::MatrixXd B = susceptance_matrix(net);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (i != ref) keep.push_back(i);
  Eigen::MatrixXd Br(n - 1, n - 1);
  Eigen::VectorXd pr(n - 1);
  for (int r = 0; r < n - 1; ++r) {
    pr[r] = injections[keep[r]];
    for (int c = 0; c < n - 1; ++c) Br(r, c) = B(keep[r], keep[c]);
  }
  const Eigen::VectorXd theta_red = Br.partialPivLu().solve(pr);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < n - 1; ++r) theta[keep[r]] = theta_red[r];

  Eigen::VectorXd flows(net.num_lines());
  for (int j = 0; j < net.num_lines(); ++j) {
    const Branch& br = net.branches[j];
    flows[j] = (theta[net.bus_index(br.from_bus)] - theta[net.bus_index(br.to_bus)]) /
               br.reactance;
  }
  return flows;
}

}  // namespace ucscreen
