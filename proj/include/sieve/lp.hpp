#ifndef SIEVE_LP_HPP
#define SIEVE_LP_HPP

#include <vector>

namespace sieve {

// Dense primal simplex for small LPs
//   max c'w  s.t.  A w <= b,  lo <= w <= up
// with b >= 0 (the all-lower-bound point must be feasible). Upper bounds may
// be +inf. Row count is expected to be tiny; the basis inverse is
// refactorized on every pivot.
struct LpResult {
    bool optimal = false;
    bool unbounded = false;
    double value = 0.0;
    std::vector<double> w;
};

LpResult solve_lp(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                  const std::vector<double>& b, const std::vector<double>& lo,
                  const std::vector<double>& up);

}  // namespace sieve

#endif
