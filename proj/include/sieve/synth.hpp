#ifndef SIEVE_SYNTH_HPP
#define SIEVE_SYNTH_HPP

#include <functional>

#include "sieve/train.hpp"

namespace sieve {

using Frontier = std::function<double(const std::vector<double>&)>;

Frontier cobb_douglas_frontier(std::vector<double> alpha, double scale = 1.0);
Frontier ces_frontier(CesParams p);
Frontier network_frontier(NetworkSpec net);  // predict_outputs of a fixed net

// Inputs uniform on box^K (interior of the positive orthant), outputs on the
// frontier plus centered Gaussian noise truncated at zero. Deterministic per
// seed.
Dataset sample_production(const Frontier& f, int n_inputs, int n, double noise_sd,
                          unsigned seed, double box_lo = 0.5, double box_hi = 2.0);

// Random-utility simulation by sequential nest sampling along root-to-leaf
// transition shares. Utilities are the sampled x row itself (identity
// binding) unless a custom map is given.
Dataset simulate_choices(const NetworkSpec& net, int n, unsigned seed, double u_lo = -2.0,
                         double u_hi = 2.0,
                         const std::function<std::vector<double>(const std::vector<double>&)>&
                             utility = nullptr);

}  // namespace sieve

#endif
