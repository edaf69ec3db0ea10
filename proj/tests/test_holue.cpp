#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "osrue/holue.hpp"

using namespace osrue;

namespace {

UnitVector axis(std::size_t d, std::size_t i, double sign = 1.0) {
    std::vector<double> v(d, 0.0);
    v[i] = sign;
    return UnitVector(v);
}

GalleryModel single_class(double kappa = 1.0, double beta = 0.5) {
    return GalleryModel(Gallery({"a"}, {axis(3, 0)}), kappa, beta);
}

GalleryModel random_model(std::size_t k, std::size_t d, double kappa, double beta, std::mt19937_64& rng) {
    std::vector<std::string> ids;
    std::vector<UnitVector> means;
    for (std::size_t c = 0; c < k; ++c) {
        ids.push_back("c" + std::to_string(c));
        means.push_back(vmf::detail::uniform_direction(d, rng));
    }
    return GalleryModel(Gallery(ids, means), kappa, beta);
}

}  // namespace

TEST(ScaledPosterior, TemperatureOneIsPosterior) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto m = random_model(1 + i % 9, 2 + i % 7, 0.5 + i, 0.5, rng);
        const ProbabilisticEmbedding pe(vmf::detail::uniform_direction(m.gallery().dim(), rng), 10.0);
        const auto a = holue::scaled_gallery_posterior(m, pe, 1.0);
        const auto b = gallery::posterior(m, pe.mean);
        for (std::size_t c = 0; c < a.num_classes(); ++c) EXPECT_NEAR(a.gallery_probs[c], b.gallery_probs[c], 1e-12);
        EXPECT_NEAR(a.oog_prob, b.oog_prob, 1e-12);
    }
}

TEST(ScaledPosterior, HandExampleAtTemperatureTwo) {
    const ProbabilisticEmbedding pe(axis(3, 0), 5.0);
    const auto p = holue::scaled_gallery_posterior(single_class(), pe, 2.0);
    EXPECT_NEAR(p.gallery_probs[0], 0.603311023754601, 1e-12);
    EXPECT_NEAR(p.oog_prob, 1 - 0.603311023754601, 1e-12);
}

TEST(ScaledPosterior, HighTemperatureFlattens) {
    std::mt19937_64 rng(2);
    const auto m = random_model(4, 5, 30.0, 0.5, rng);
    const ProbabilisticEmbedding pe(m.gallery().means()[0], 10.0);
    const auto p = holue::scaled_gallery_posterior(m, pe, 1e6);
    for (double v : p.gallery_probs) EXPECT_NEAR(v, 0.2, 1e-4);
    EXPECT_NEAR(p.oog_prob, 0.2, 1e-4);
}

TEST(ScaledPosterior, NormalizedOverTemperatures) {
    std::mt19937_64 rng(3);
    const auto m = random_model(30, 16, 200.0, 0.5, rng);
    const ProbabilisticEmbedding pe(m.gallery().means()[2], 50.0);
    for (double t : {0.1, 0.5, 1.0, 3.0, 20.0, 100.0}) {
        const auto p = holue::scaled_gallery_posterior(m, pe, t);
        double s = p.oog_prob;
        for (double v : p.gallery_probs) s += v;
        EXPECT_NEAR(s, 1.0, 1e-9) << t;
    }
    EXPECT_THROW(holue::scaled_gallery_posterior(m, pe, 0.0), Error);
}

TEST(KlComponents, HandValues) {
    const auto kl = holue::kl_components(single_class(), {axis(3, 0), 5.0}, 1.0);
    EXPECT_NEAR(kl.kl1, 0.2330765224674005, 1e-12);
    EXPECT_NEAR(kl.kl2, 0.542678464217978, 1e-12);
    EXPECT_EQ(kl.temperature, 1.0);
}

TEST(KlComponents, FlatGalleryHasNoGalleryTerm) {
    const auto kl = holue::kl_components(single_class(1e-12), {axis(3, 1), 5.0}, 1.0);
    EXPECT_NEAR(kl.kl1, 0.0, 1e-12);
}

TEST(KlComponents, Kl2IncreasesWithConcentration) {
    std::mt19937_64 rng(4);
    const auto m = random_model(10, 8, 20.0, 0.5, rng);
    const auto mu = vmf::detail::draw_vmf({m.gallery().means()[1], 20.0}, rng);
    for (double t : {1.0, 5.0, 20.0}) {
        double prev = -INFINITY;
        for (double k : {1.0, 2.0, 5.0, 10.0, 50.0}) {
            const double kl2 = holue::kl_components(m, {mu, k}, t).kl2;
            EXPECT_GT(kl2, prev) << t << " " << k;
            prev = kl2;
        }
    }
    const auto one = single_class();
    EXPECT_GT(holue::kl_components(one, {axis(3, 0), 10.0}, 1.0).kl2,
              holue::kl_components(one, {axis(3, 0), 5.0}, 1.0).kl2);
}

TEST(KlComponents, FullKlNonNegativeWhenNoOutOfGalleryMass) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) {
        // beta must sit far below every class density, not just be small
        const auto m = random_model(2 + i % 5, 4, 5.0 + i, 1e-300, rng);
        const ProbabilisticEmbedding pe(vmf::detail::uniform_direction(4, rng), 3.0);
        EXPECT_GE(holue::kl_components(m, pe, 1.0).kl1, -1e-12);
    }
}

TEST(FitStats, Examples) {
    const std::vector<KlComponents> a = {{1, 0}, {2, 1}, {3, 5}};
    const auto s = holue::fit_stats(a);
    EXPECT_DOUBLE_EQ(s.mean1, 2.0);
    EXPECT_DOUBLE_EQ(s.std1, 1.0);

    const std::vector<KlComponents> b = {{0, 1}, {0, 2}, {4, 3}, {4, 4}};
    const auto t = holue::fit_stats(b);
    EXPECT_DOUBLE_EQ(t.mean1, 2.0);
    EXPECT_NEAR(t.std1, 2.3094, 1e-4);
    EXPECT_NEAR(t.std1, std::sqrt(16.0 / 3.0), 1e-15);
}

TEST(FitStats, Errors) {
    const std::vector<KlComponents> constant = {{1, 7}, {2, 7}, {3, 7}};
    const std::vector<KlComponents> one = {{1, 7}};
    for (const auto* v : {&constant, &one}) {
        try {
            holue::fit_stats(*v);
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::calibration);
        }
    }
}

TEST(Normalize, Examples) {
    const CalibrationStats s{1.5, 0.5, -2.0, 4.0};
    EXPECT_DOUBLE_EQ(holue::normalize({1.5, -2.0}, s).kl1n, 0.0);
    EXPECT_DOUBLE_EQ(holue::normalize({2.0, -2.0}, s).kl1n, 1.0);
    EXPECT_DOUBLE_EQ(holue::normalize({1.5, -10.0}, s).kl2n, -2.0);
}

TEST(HolueSum, Examples) {
    EXPECT_EQ(holue::holue_sum(0, 0), 0.0);
    EXPECT_EQ(holue::holue_sum(1, -1), 0.0);
    EXPECT_EQ(holue::holue_sum(0.5, 0.25), 0.75);
}
