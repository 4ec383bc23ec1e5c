#ifndef SIEVE_NUMERIC_HPP
#define SIEVE_NUMERIC_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sieve {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

// Substitution-coefficient branch thresholds. Raw powers lose precision or
// overflow near the singular values, so the closed-form limits take over.
constexpr double kRhoLinearEps = 1e-9;   // |rho-1|  -> perfect substitutes
constexpr double kRhoCobbEps = 1e-6;     // |rho|    -> Cobb-Douglas limit
constexpr double kRhoLeontief = -30.0;   // rho <    -> perfect complements
constexpr double kRhoMaxBranch = 30.0;   // rho >=   -> max/argmax (choice nets)

constexpr double kProbFloor = 1e-12;

// Thrown when a production target cannot be met (capacity bound, negative
// discretionary requirement, resource shortfall).
class FeasibilityError : public std::runtime_error {
public:
    explicit FeasibilityError(const std::string& what) : std::runtime_error(what) {}
};

class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// log(sum_i exp(a[i])) with the usual max shift. Entries equal to -inf are
// skipped; returns -inf when all are.
inline double log_sum_exp(const std::vector<double>& a) {
    double m = kNegInf;
    for (double x : a) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : a) {
        if (x != kNegInf) s += std::exp(x - m);
    }
    return m + std::log(s);
}

inline double sqr(double x) { return x * x; }

inline bool nearly_equal(double a, double b, double rel, double abs_floor = 1e-300) {
    double scale = std::max({std::fabs(a), std::fabs(b), abs_floor});
    return std::fabs(a - b) <= rel * scale;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace sieve

#endif
