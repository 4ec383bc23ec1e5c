#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sieve/cnl.hpp"

using namespace sieve;

namespace {

NetworkSpec one_layer_logit(int M) {
    NetworkSpec net;
    net.kind = NetKind::choice;
    net.widths = {1, M};
    net.nodes.resize(2);
    net.frozen.resize(2);
    net.nodes[0].push_back({std::vector<double>(M, 1.0), 0, 1.0, 1.0});
    net.frozen[0].push_back({std::vector<std::uint8_t>(M, 0), true, false, true});
    return net;
}

// Two nests {0,1} with rho = 2 and {2}, root rho = 1, all beta = 1.
NetworkSpec nested_example() {
    NetworkSpec net;
    net.kind = NetKind::choice;
    net.widths = {1, 2, 3};
    net.nodes.resize(3);
    net.frozen.resize(3);
    net.nodes[0].push_back({{1.0, 1.0}, 0, 1.0, 1.0});
    net.nodes[1].push_back({{1.0, 1.0, 0.0}, 0, 2.0, 1.0});
    net.nodes[1].push_back({{0.0, 0.0, 1.0}, 0, 1.0, 1.0});
    for (int s = 0; s < 2; ++s) {
        for (const auto& n : net.nodes[s]) {
            net.frozen[s].push_back(
                {std::vector<std::uint8_t>(n.beta.size(), 0), true, false, true});
        }
    }
    return net;
}

NetworkSpec random_cnl(std::mt19937& rng, int M, int S) {
    std::uniform_real_distribution<double> ubeta(0.2, 2.0);
    std::uniform_real_distribution<double> urho(1.0, 5.0);
    std::uniform_int_distribution<int> uw(2, std::max(2, M));
    NetworkSpec net;
    net.kind = NetKind::choice;
    net.widths.assign(S + 1, 1);
    for (int s = 1; s < S; ++s) net.widths[s] = uw(rng);
    net.widths[S] = M;
    net.nodes.resize(S + 1);
    net.frozen.resize(S + 1);
    for (int s = 0; s < S; ++s) {
        const int child = net.widths[s + 1];
        for (int k = 0; k < net.widths[s]; ++k) {
            NodeParams n;
            n.beta.resize(child);
            for (int l = 0; l < child; ++l) n.beta[l] = ubeta(rng);
            n.rho = urho(rng);
            net.nodes[s].push_back(n);
            net.frozen[s].push_back(
                {std::vector<std::uint8_t>(child, 0), true, false, true});
        }
    }
    return net;
}

std::vector<double> softmax(const std::vector<double>& u) {
    std::vector<double> e(u.size());
    double m = u[0];
    for (double x : u) m = std::max(m, x);
    double s = 0;
    for (size_t i = 0; i < u.size(); ++i) s += (e[i] = std::exp(u[i] - m));
    for (double& x : e) x /= s;
    return e;
}

}  // namespace

TEST_CASE("eval_generating pinned examples") {
    auto net = one_layer_logit(2);
    CHECK(eval_generating(net, {1, 3}) == doctest::Approx(4.0).epsilon(1e-12));

    auto nested = nested_example();
    CHECK(eval_generating(nested, {1, 1, 1}) ==
          doctest::Approx(std::sqrt(2.0) + 1.0).epsilon(1e-12));

    // degree-1 homogeneity
    const double f1 = eval_generating(nested, {0.7, 1.4, 2.2});
    const double f3 = eval_generating(nested, {2.1, 4.2, 6.6});
    CHECK(f3 == doctest::Approx(3.0 * f1).epsilon(1e-12));

    CHECK_THROWS_AS(eval_generating(nested, {1.0, 0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("inclusive value node examples") {
    NodeParams n{{1.0, 1.0}, 0, 1.0, 1.0};
    CHECK(cnl_node_value(n, {0, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    n.rho = 2.0;
    CHECK(cnl_node_value(n, {0, 0}) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
    n.rho = kPosInf;
    CHECK(cnl_node_value(n, {1, 3}) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("reach probabilities: symmetry, nested example, degenerate chain") {
    auto net = one_layer_logit(2);
    auto probs = ccp(net, {0, 0});
    CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-12));

    auto nested = nested_example();
    probs = ccp(nested, {0, 0, 0});
    CHECK(probs[0] == doctest::Approx(0.292893218813452).epsilon(1e-9));
    CHECK(probs[1] == doctest::Approx(0.292893218813452).epsilon(1e-9));
    CHECK(probs[2] == doctest::Approx(0.414213562373095).epsilon(1e-9));

    // one positive weight per row -> all mass on the unique path
    NetworkSpec chain;
    chain.kind = NetKind::choice;
    chain.widths = {1, 2, 2};
    chain.nodes.resize(3);
    chain.frozen.resize(3);
    chain.nodes[0].push_back({{1.0, 0.0}, 0, 1.5, 1.0});
    chain.nodes[1].push_back({{0.0, 1.0}, 0, 2.0, 1.0});
    chain.nodes[1].push_back({{1.0, 1.0}, 0, 1.0, 1.0});
    for (int s = 0; s < 2; ++s) {
        for (const auto& n : chain.nodes[s]) {
            chain.frozen[s].push_back(
                {std::vector<std::uint8_t>(n.beta.size(), 0), true, false, true});
        }
    }
    probs = ccp(chain, {0.3, -0.8});
    CHECK(probs[0] == doctest::Approx(0.0));
    CHECK(probs[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ccp reduces to softmax for one ρ=1 layer") {
    auto net = one_layer_logit(2);
    auto probs = ccp(net, {0.0, std::log(3.0)});
    CHECK(probs[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(0.75).epsilon(1e-12));

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> uu(-3, 3);
    auto big = one_layer_logit(5);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> U(5);
        for (double& u : U) u = uu(rng);
        const auto got = ccp(big, U);
        const auto want = softmax(U);
        for (int m = 0; m < 5; ++m) CHECK(std::fabs(got[m] - want[m]) <= 1e-12);
    }
}

TEST_CASE("ccp_direct pinned examples") {
    auto sum_f = [](const std::vector<double>& w) {
        double s = 0;
        for (double x : w) s += x;
        return s;
    };
    auto mu = ccp_direct(sum_f, {0.0, std::log(3.0)}, 1.0);
    CHECK(mu[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(mu[1] == doctest::Approx(0.75).epsilon(1e-6));

    auto prod_f = [](const std::vector<double>& w) { return w[0] * w[1]; };
    mu = ccp_direct(prod_f, {0.4, -1.1}, 2.0);
    CHECK(mu[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(mu[1] == doctest::Approx(0.5).epsilon(1e-6));

    auto nested = nested_example();
    auto gen = [&](const std::vector<double>& w) { return eval_generating(nested, w); };
    mu = ccp_direct(gen, {0, 0, 0}, 1.0);
    const auto rec = ccp(nested, {0, 0, 0});
    for (int m = 0; m < 3; ++m) CHECK(std::fabs(mu[m] - rec[m]) <= 1e-6);

    auto bad = [](const std::vector<double>&) { return -1.0; };
    CHECK_THROWS_AS(ccp_direct(bad, {0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("recursive and McFadden-form probabilities agree on random networks") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> um(2, 5), us(1, 3);
    std::uniform_real_distribution<double> uu(-1.5, 1.5);
    for (int rep = 0; rep < 100; ++rep) {
        const int M = um(rng), S = us(rng);
        auto net = random_cnl(rng, M, S);
        std::vector<double> U(M);
        for (double& u : U) u = uu(rng);
        const auto p_rec = ccp(net, U);
        auto gen = [&](const std::vector<double>& w) { return eval_generating(net, w); };
        const auto p_dir = ccp_direct(gen, U, 1.0);
        double sum = 0.0;
        for (int m = 0; m < M; ++m) {
            CHECK(std::fabs(p_rec[m] - p_dir[m]) <= 1e-6);
            sum += p_rec[m];
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("layer conservation and translation invariance") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> uu(-2, 2);
    for (int rep = 0; rep < 30; ++rep) {
        auto net = random_cnl(rng, 4, 3);
        std::vector<double> U(4);
        for (double& u : U) u = uu(rng);
        const auto st = choice_states(net, U);
        for (const auto& layer : st.pi) {
            double s = 0;
            for (double p : layer) s += p;
            CHECK(std::fabs(s - 1.0) <= 1e-12);
        }
        const double c = uu(rng);
        std::vector<double> Uc = U;
        for (double& u : Uc) u += c;
        const auto p0 = ccp(net, U);
        const auto p1 = ccp(net, Uc);
        for (size_t m = 0; m < p0.size(); ++m) CHECK(std::fabs(p0[m] - p1[m]) <= 1e-10);
    }
}

TEST_CASE("max-branch nesting uses deterministic lowest-index ties") {
    NodeParams n{{1.0, 1.0}, 0, kPosInf, 1.0};
    const auto t = cnl_node_transitions(n, {0.5, 0.5});
    CHECK(t[0] == 1.0);
    CHECK(t[1] == 0.0);
    NodeParams n35{{1.0, 1.0}, 0, 35.0, 1.0};  // finite but above the branch cutoff
    const auto t2 = cnl_node_transitions(n35, {0.2, 0.9});
    CHECK(t2[1] == 1.0);
}

TEST_CASE("marginal adapter evaluation") {
    CHECK(marginal_adapter_eval({1.0}, 0.7) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(marginal_adapter_eval({0.5, 0.5}, 2.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(marginal_adapter_eval({-1.0}, 2.0) == doctest::Approx(1e-12));
    CHECK_THROWS_AS(marginal_adapter_eval({}, 1.0), std::invalid_argument);
}
