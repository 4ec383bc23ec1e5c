#ifndef SIEVE_NETWORK_HPP
#define SIEVE_NETWORK_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sieve/ces.hpp"
#include "sieve/numeric.hpp"

namespace sieve {

enum class NetKind { production, choice };

// Per-neuron parameters. For production networks a node at layer s >= 1 has
// beta over the K_{s-1} goods of the layer below plus the intercept beta0,
// a substitution coefficient rho <= 1 and homogeneity degree tau <= 1. For
// choice networks a node at layer s <= S-1 has allocation weights beta over
// its K_{s+1} children and a nesting coefficient rho >= 1; beta0/tau unused.
struct NodeParams {
    std::vector<double> beta;
    double beta0 = 0.0;
    double rho = 1.0;
    double tau = 1.0;
};

struct NodeFrozen {
    std::vector<std::uint8_t> beta;
    bool beta0 = true;
    bool rho = false;
    bool tau = false;
};

struct NetworkSpec {
    NetKind kind = NetKind::production;
    std::vector<int> widths;  // K_0..K_S
    // nodes[s]: parameterized nodes of layer s. Production uses s = 1..S
    // (nodes[0] stays empty), choice uses s = 0..S-1 (nodes[S] stays empty).
    std::vector<std::vector<NodeParams>> nodes;
    std::vector<std::vector<NodeFrozen>> frozen;

    std::vector<double> output_dir;  // production: output direction u (size K_S)
    double pi0 = 0.0;                // price of the non-discretionary input
    int price_lattice = 0;           // predict lattice resolution; 0 = auto

    int depth() const { return static_cast<int>(widths.size()) - 1; }
    int n_inputs() const { return widths.front(); }
    int n_outputs() const { return widths.back(); }
    bool has_node_layer(int s) const {
        return s >= 0 && s < static_cast<int>(nodes.size()) && !nodes[s].empty();
    }

    CesParams ces_at(int s, int k) const {
        const NodeParams& n = nodes[s][k];
        return CesParams{n.beta, n.beta0, n.rho, n.tau};
    }
};

// Hidden states h = (pi, v) for every node, layer-major with pi first within
// each layer.
struct StateVector {
    std::vector<int> widths;
    std::vector<int> base;    // offset of layer s block
    std::vector<double> data; // [pi(s,0..K_s), v(s,0..K_s)] per layer

    StateVector() = default;
    explicit StateVector(const std::vector<int>& w) : widths(w) {
        base.resize(w.size());
        int off = 0;
        for (size_t s = 0; s < w.size(); ++s) {
            base[s] = off;
            off += 2 * w[s];
        }
        data.assign(off, 0.0);
    }

    int pi_index(int s, int k) const { return base[s] + k; }
    int v_index(int s, int k) const { return base[s] + widths[s] + k; }
    double& pi(int s, int k) { return data[pi_index(s, k)]; }
    double& v(int s, int k) { return data[v_index(s, k)]; }
    double pi(int s, int k) const { return data[pi_index(s, k)]; }
    double v(int s, int k) const { return data[v_index(s, k)]; }
    int size() const { return static_cast<int>(data.size()); }
    int n_layers() const { return static_cast<int>(widths.size()); }
};

// Structural validation; returns every violated invariant, never throws.
std::vector<std::string> validate(const NetworkSpec& net);

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 500;
    double damping = 0.5;
    bool enforce_input_feasibility = true;  // production: implied demand must fit x
    double feasibility_slack = 1e-7;        // relative slack on that check
};

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;
    int clamps = 0;  // clamped infeasible intermediate targets on the last sweep
};

// Solves the equilibrium states. Choice networks: x carries the systematic
// utilities (y_target, if nonempty, overrides); exactly one leaf-to-root
// inclusive-value pass and one root-to-leaf reach pass. Production networks:
// v at the top layer is pinned to y_target, pi at layer 0 to p (ones when
// absent), and demand/price sweeps iterate with damping until the sup-norm
// state change drops below tol. `warm`, when given, seeds the iteration.
StateVector solve_states(const NetworkSpec& net, const std::vector<double>& x,
                         const std::vector<double>* p, const std::vector<double>& y_target,
                         const SolveOptions& opt = {}, SolveReport* report = nullptr,
                         const StateVector* warm = nullptr);

// Sup-norm fixed-point residual ||h - upsilon(h)||_inf, recomputed from the
// activation maps (pinned coordinates excluded).
double state_residual(const NetworkSpec& net, const StateVector& h,
                      const std::vector<double>& x, const std::vector<double>* p,
                      const std::vector<double>& y_target);

// upsilon(h) at fixed h for a production network; pinned coordinates are
// copied through unchanged.
StateVector apply_maps(const NetworkSpec& net, const StateVector& h);

struct PredictInfo {
    double scale = 0.0;               // lambda: output level along output_dir
    std::vector<double> price_arg;    // argmin price vector of the dual search
    double unit_cost = 0.0;           // C(output_dir; price_arg)
    StateVector states;               // states of the solve at the argmin
    bool lp_path = false;
};

// Model prediction: choice networks return the leaf choice probabilities;
// production networks return the largest output along output_dir that the
// inputs x support. Two-stage perfect-complement/perfect-substitute networks
// are evaluated exactly as a small LP; smooth networks through the dual price
// lattice (see README).
std::vector<double> predict_outputs(const NetworkSpec& net, const std::vector<double>& x,
                                    const std::vector<double>* p = nullptr,
                                    PredictInfo* info = nullptr);

// Unit production cost C(scale * output_dir; prices) and the implied layer-0
// demand, via a state solve. Used by predict and by the training gradient.
struct CostEval {
    double cost = 0.0;
    std::vector<double> demand;        // layer-0 factor demand
    std::vector<double> top_prices;    // marginal costs of the outputs
    StateVector states;
};
CostEval production_cost(const NetworkSpec& net, const std::vector<double>& prices,
                         double scale, const SolveOptions& opt = {},
                         const StateVector* warm = nullptr);

// Largest scale along output_dir whose production cost stays within the
// budget: solves C(scale * u; prices) = budget by safeguarded Newton with
// warm-started state solves. Returns 0 for a nonpositive budget.
double production_scale_for_budget(const NetworkSpec& net, const std::vector<double>& prices,
                                   double budget, const SolveOptions& opt = {},
                                   CostEval* ce_out = nullptr);

// Deterministic strictly positive price candidates on the unit simplex.
std::vector<std::vector<double>> price_lattice(int dim, int resolution);
int default_lattice_resolution(const NetworkSpec& net);

bool is_two_stage_polytope(const NetworkSpec& net);
bool is_constant_returns(const NetworkSpec& net);

// Versioned human-readable serialization; save -> load -> save is
// byte-identical.
std::string save_network(const NetworkSpec& net);
NetworkSpec load_network(const std::string& text);
void save_network_file(const NetworkSpec& net, const std::string& path);
NetworkSpec load_network_file(const std::string& path);

}  // namespace sieve

#endif
