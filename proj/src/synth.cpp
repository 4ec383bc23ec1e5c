#include "sieve/synth.hpp"

#include <cmath>
#include <random>

#include "sieve/cnl.hpp"

namespace sieve {

Frontier cobb_douglas_frontier(std::vector<double> alpha, double scale) {
    return [alpha = std::move(alpha), scale](const std::vector<double>& x) {
        require(x.size() == alpha.size(), "cobb_douglas: dimension mismatch");
        double ln = std::log(scale);
        for (size_t l = 0; l < x.size(); ++l) ln += alpha[l] * std::log(x[l]);
        return std::exp(ln);
    };
}

Frontier ces_frontier(CesParams p) {
    return [p = std::move(p)](const std::vector<double>& x) { return eval_ces(x, p); };
}

Frontier network_frontier(NetworkSpec net) {
    return [net = std::move(net)](const std::vector<double>& x) {
        return predict_outputs(net, x).front();
    };
}

Dataset sample_production(const Frontier& f, int n_inputs, int n, double noise_sd,
                          unsigned seed, double box_lo, double box_hi) {
    require(n >= 1, "sample_production: n must be >= 1");
    require(noise_sd >= 0.0, "sample_production: negative noise_sd");
    require(box_lo > 0.0 && box_hi > box_lo, "sample_production: bad input box");
    Dataset d;
    d.x.resize(n);
    d.y.resize(n);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ux(box_lo, box_hi);
    std::normal_distribution<double> un(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        d.x[i].resize(n_inputs);
        for (double& v : d.x[i]) v = ux(rng);
        double y = f(d.x[i]);
        if (noise_sd > 0.0) y += noise_sd * un(rng);
        d.y[i] = {std::max(y, 0.0)};
    }
    return d;
}

Dataset simulate_choices(const NetworkSpec& net, int n, unsigned seed, double u_lo,
                         double u_hi,
                         const std::function<std::vector<double>(const std::vector<double>&)>&
                             utility) {
    require(net.kind == NetKind::choice, "simulate_choices: choice network expected");
    {
        const auto diags = validate(net);
        require(diags.empty(), "simulate_choices: invalid network");
    }
    const int S = net.depth();
    const int M = net.widths[S];
    Dataset d;
    d.x.resize(n);
    d.label.resize(n);
    std::mt19937 xrng(seed);
    std::uniform_real_distribution<double> ux(u_lo, u_hi);
    for (int i = 0; i < n; ++i) {
        d.x[i].resize(M);
        for (double& v : d.x[i]) v = ux(xrng);
        const std::vector<double> U = utility ? utility(d.x[i]) : d.x[i];
        const auto v = inclusive_values(net, U);
        // root-to-leaf path through the transition shares; per-row derived
        // seed (splitmix64 mix) keeps rows independent of each other
        std::uint64_t z = (static_cast<std::uint64_t>(seed) << 32) ^
                          (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(i) + 1));
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        std::mt19937 prng(static_cast<unsigned>(z));
        std::uniform_real_distribution<double> uu(0.0, 1.0);
        int node = 0;
        for (int s = 0; s < S; ++s) {
            const auto t = cnl_node_transitions(net.nodes[s][node], v[s + 1]);
            double r = uu(prng);
            int next = static_cast<int>(t.size()) - 1;
            double acc = 0.0;
            for (size_t l = 0; l < t.size(); ++l) {
                acc += t[l];
                if (r <= acc) {
                    next = static_cast<int>(l);
                    break;
                }
            }
            node = next;
        }
        d.label[i] = node;
    }
    return d;
}

}  // namespace sieve
