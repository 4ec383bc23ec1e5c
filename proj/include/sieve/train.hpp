#ifndef SIEVE_TRAIN_HPP
#define SIEVE_TRAIN_HPP

#include <string>
#include <vector>

#include "sieve/jacobian.hpp"
#include "sieve/network.hpp"

namespace sieve {

enum class Optimizer { plain_gradient, momentum, adaptive_moment };

struct TrainConfig {
    double lr = 0.05;
    int batch = 0;  // 0 = full batch
    int epochs = 100;
    Optimizer optimizer = Optimizer::adaptive_moment;
    double bound_b = 0.0;  // B > 0 clips production predictions at 2B
    double rho_min = -10.0;
    double rho_max = 30.0;
    double tau_min = 0.05;
    unsigned seed = 1;
    int convergence_window = 0;  // early stop after this many stale epochs (0 = off)
    double val_split = 0.2;
    bool halve_on_increase = true;
    bool reproducible = true;  // fixed reduction order
    double solve_tol = 1e-10;
    int neumann_q = -1;  // -1: adaptive / exact

    double momentum_decay = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

// Complete-case observation table. Choice data carries 0-based labels;
// production data carries continuous outcomes and optionally observed input
// prices per row.
struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> y;
    std::vector<int> label;
    std::vector<std::vector<double>> price;

    int n() const { return static_cast<int>(x.size()); }
    bool is_choice() const { return !label.empty(); }
    void check() const;
};

double loss_squared(const std::vector<double>& y, const std::vector<double>& v_top,
                    std::vector<double>* grad_v = nullptr);
double loss_nll(int label, const std::vector<double>& pi_top,
                std::vector<double>* grad_pi = nullptr);

// Componentwise projection onto the constraint set: beta >= 0, production rho
// in [rho_min, 1] and tau in (0, 1], choice rho in [1, rho_max]. Returns the
// number of clamped entries; idempotent.
int project(std::vector<double>& theta, const ParamIndex& ix, NetKind kind,
            const TrainConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double grad_norm = 0.0;
    int proj_count = 0;
};

struct FitResult {
    NetworkSpec net;
    std::vector<EpochStats> history;
};

FitResult fit(const NetworkSpec& net, const Dataset& data, const TrainConfig& cfg);

struct Metrics {
    double mean_loss = 0.0;
    double accuracy = 0.0;                // choice only
    std::vector<double> calibration;      // choice: mean predicted - empirical
    std::vector<double> rmse;             // production: per output
};

Metrics evaluate(const NetworkSpec& net, const Dataset& data, double bound_b = 0.0);

std::string format_epoch(const EpochStats& st);

}  // namespace sieve

#endif
