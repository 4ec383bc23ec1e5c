#ifndef SIEVE_JACOBIAN_HPP
#define SIEVE_JACOBIAN_HPP

#include <vector>

#include "sieve/network.hpp"

namespace sieve {

// Triplet-form sparse matrix. Entry (i, j) of the state Jacobian holds
// d upsilon_j / d h_i, so apply() accumulates pullbacks of a state cotangent.
struct SparseJacobian {
    int rows = 0, cols = 0;
    std::vector<int> r, c;
    std::vector<double> val;

    void add(int i, int j, double v) {
        if (v == 0.0) return;
        r.push_back(i);
        c.push_back(j);
        val.push_back(v);
    }
    // out_i = sum_j (i,j) g_j
    std::vector<double> apply(const std::vector<double>& g) const;
    // out_j = sum_i (i,j) g_i
    std::vector<double> apply_transpose(const std::vector<double>& g) const;
    double frobenius_norm() const;
};

// Free-parameter indexing: one slot per unfrozen scalar, node-major.
struct ParamIndex {
    enum Kind { beta, beta0, rho, tau };
    struct Entry {
        int s, k, kind, l;  // l used for beta entries
    };
    std::vector<Entry> entries;

    int size() const { return static_cast<int>(entries.size()); }
    static ParamIndex build(const NetworkSpec& net);
};

std::vector<double> get_params(const NetworkSpec& net, const ParamIndex& ix);
void set_params(NetworkSpec& net, const ParamIndex& ix, const std::vector<double>& theta);

// Jacobian of the activation map with respect to the hidden states, evaluated
// at a solved state vector. Rows of pinned coordinates (layer-0 prices and
// top-layer quantities for production; leaf utilities and the root reach
// probability for choice) are zero, since those components are data.
SparseJacobian jacobian_states(const NetworkSpec& net, const StateVector& h);

// Jacobian with respect to the free parameters: (i, j) = d upsilon_j / d theta_i.
SparseJacobian jacobian_params(const NetworkSpec& net, const StateVector& h,
                               const ParamIndex& ix);

// sum_{q=0}^{Q} J^q g by repeated sparse products.
std::vector<double> neumann_apply(const SparseJacobian& J, const std::vector<double>& g, int Q);

// Truncation chosen at run time: at least q_min terms, then stop once the
// running terms fall below tol relative to the input scale (cap applies).
std::vector<double> neumann_apply_adaptive(const SparseJacobian& J,
                                           const std::vector<double>& g, int q_min,
                                           double tol, int cap, int* q_used);

// Growth-ratio power iteration ||J v_k|| / ||v_k||; decays to zero on
// nilpotent maps and approaches the dominant singular direction otherwise.
double spectral_bound(const SparseJacobian& J, int iters);

// Smallest Q with lambda^(Q+1) / (1 - lambda) <= tol, capped; -1 when the
// series is not guaranteed convergent (lambda >= 1 - 1e-6).
int truncation_order(double lambda, double tol, int cap = 200);

// Neumann order that makes the truncation exact on an acyclic (choice)
// network: the longest dependency chain of the two-pass recursion.
int exact_truncation_order(const NetworkSpec& net);

struct ImplicitOptions {
    int Q = -1;               // -1: adaptive from spectral_bound
    double tol = 1e-10;       // gradient tail tolerance for the adaptive rule
    int power_iters = 60;
    int q_cap = 200;
};

// Gradient of a loss with state cotangent grad_h through the fixed point:
// Upsilon_theta * (I - Upsilon_h)^{-1} grad_h, the inverse applied as a
// truncated Neumann series (dense solve fallback when the series is not
// convergent).
std::vector<double> implicit_gradient(const NetworkSpec& net, const StateVector& h,
                                      const std::vector<double>& grad_h, const ParamIndex& ix,
                                      const ImplicitOptions& opt = {});

// (I - J) x = g via dense LU; the fallback path for spectral estimates >= 1.
std::vector<double> solve_series_direct(const SparseJacobian& J, const std::vector<double>& g);

}  // namespace sieve

#endif
