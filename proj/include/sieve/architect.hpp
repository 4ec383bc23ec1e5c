#ifndef SIEVE_ARCHITECT_HPP
#define SIEVE_ARCHITECT_HPP

#include <functional>

#include "sieve/network.hpp"
#include "sieve/train.hpp"

namespace sieve {

struct SupportPoint {
    std::vector<double> y;
    std::vector<double> w;
};

// Two-stage universal production approximator: M*Q perfect-complement
// first-layer technologies with capacity intercepts spanning the support
// points, convexified by a fixed 0/1 linear second layer. First-layer shares
// stay trainable; the structural pattern is frozen.
NetworkSpec build_two_stage_production(const std::vector<SupportPoint>& points);

// Four-layer CNL network approximating a positive, nondecreasing, degree-1
// homogeneous generating function from below: grid-anchored max nests, a
// tessellation-sparse averaging layer (all size-M subsets behind the dense
// flag), and a max root.
NetworkSpec build_cnl_grid_approximator(
    const std::function<double(const std::vector<double>&)>& F0, int M, int L,
    bool dense_subsets = false);

// Sparse-stage architecture: S stacked three-layer blocks with widths
// (3 d*, Q, 1); each block reads only d* selected inputs; the middle-layer
// shares are the free parameters (at most 3 S d* Q of them).
NetworkSpec build_sp_ces(int S, int d_star, int Q, int input_dim);

// Separable-stage architecture: S stacked four-layer blocks with widths
// (Q, 1, Q, 1); tau frozen to 1 in layers 1-3, rho = tau = 1 frozen in layers
// 2 and 4; blocks are self-contained.
NetworkSpec build_4l_ces(int S, int input_dim, int Q);

// Smooth two-layer constant-returns sieve used by the width-rule estimation
// experiments: `width` CES nodes under a linear assembly node.
NetworkSpec build_ces_sieve(int input_dim, int width, unsigned seed);

// Per-direction frontier maxima of a dataset, the documented extraction rule
// for auto-building two-stage networks from data.
std::vector<SupportPoint> extract_support_points(const Dataset& data, int count);

int param_count(const NetworkSpec& net);     // unfrozen parameters W
double vc_bound(int W);                      // 2 W ln(2e)
int sieve_width(int n, int d);               // round((n / ln n)^(d/(4+d)))

}  // namespace sieve

#endif
