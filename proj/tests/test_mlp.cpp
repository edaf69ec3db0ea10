#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "osrue/mlp.hpp"

using namespace osrue;

namespace {

struct Toy {
    std::vector<NormalizedKl> x;
    std::vector<Label> y;
};

// correct iff kl1n + kl2n > 0, with a margin so the set is separable.
Toy toy_set(std::uint64_t seed, std::size_t n = 200) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Toy t;
    while (t.x.size() < n) {
        const double a = u(rng), b = u(rng);
        if (std::abs(a + b) < 0.1) continue;
        t.x.push_back({a, b});
        t.y.push_back(a + b > 0 ? Label::correct : Label::error);
    }
    return t;
}

}  // namespace

TEST(Mlp, ZeroNetworkPredictsHalf) {
    const MlpCalibrator net;
    EXPECT_EQ(holue::mlp_predict(net, 0.0, 0.0), 0.5);
    EXPECT_EQ(holue::mlp_predict(net, 3.0, -7.0), 0.5);
}

TEST(Mlp, GradientMatchesCentralDifferences) {
    const auto toy = toy_set(3, 40);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto net = MlpCalibrator::random(seed, MlpHyper{});
        const auto g = net.gradient(toy.x, toy.y);
        auto p = net.flat();
        ASSERT_EQ(g.size(), p.size());
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            net.set_flat(p);
            const double up = net.loss(toy.x, toy.y);
            p[i] = keep - h;
            net.set_flat(p);
            const double down = net.loss(toy.x, toy.y);
            p[i] = keep;
            net.set_flat(p);
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-3, std::abs(fd) + std::abs(g[i])));
        }
        EXPECT_LT(worst, 1e-6) << seed;
    }
}

TEST(Mlp, LearnsSeparableToy) {
    const auto toy = toy_set(11);
    const auto net = holue::fit_mlp(toy.x, toy.y, MlpHyper{}, 0);
    int right = 0;
    for (std::size_t i = 0; i < toy.x.size(); ++i) {
        const double p = holue::mlp_predict(net, toy.x[i].kl1n, toy.x[i].kl2n);
        right += (p > 0.5) == (toy.y[i] == Label::correct);
    }
    EXPECT_GE(right / static_cast<double>(toy.x.size()), 0.99);
    EXPECT_GT(holue::mlp_predict(net, 1.5, 1.5), 0.9);
    EXPECT_LT(holue::mlp_predict(net, -1.5, -1.5), 0.1);
}

TEST(Mlp, OutputInOpenUnitInterval) {
    const auto net = MlpCalibrator::random(9, MlpHyper{1.0, 0.0, 0, 3.0});
    for (double a : {-100.0, -1.0, 0.0, 1.0, 100.0})
        for (double b : {-100.0, 0.0, 100.0}) {
            const double p = holue::mlp_predict(net, a, b);
            EXPECT_TRUE(p > 0.0 && p < 1.0) << a << " " << b;
        }
}

TEST(Mlp, Deterministic) {
    const auto toy = toy_set(5);
    MlpHyper h;
    h.epochs = 300;
    const auto a = holue::fit_mlp(toy.x, toy.y, h, 17);
    const auto b = holue::fit_mlp(toy.x, toy.y, h, 17);
    EXPECT_EQ(a.flat(), b.flat());
    EXPECT_NE(a.flat(), holue::fit_mlp(toy.x, toy.y, h, 18).flat());
    EXPECT_EQ(a.seed(), 17u);
}

TEST(Mlp, TrainingErrors) {
    const std::vector<NormalizedKl> x = {{0, 0}, {1, 1}};
    const std::vector<Label> same = {Label::correct, Label::correct};
    try {
        holue::fit_mlp(x, same, MlpHyper{}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::training);
    }
    const std::vector<NormalizedKl> bad = {{0, NAN}, {1, 1}};
    const std::vector<Label> mixed = {Label::correct, Label::error};
    EXPECT_THROW(holue::fit_mlp(bad, mixed, MlpHyper{}, 0), Error);
}
