#pragma once

// Synthetic open-set recognition data: identities on the sphere with planted
// near-duplicate pairs and per-sample quality, plus the gallery/probe and
// validation/test split that turns them into an evaluation protocol.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "osrue/error.hpp"
#include "osrue/gallery.hpp"
#include "osrue/vmf.hpp"

namespace osrue {

struct SynthConfig {
    int d = 16;
    int n_identities = 500;
    double oog_fraction = 0.2;
    int samples_min = 2;
    int samples_max = 6;
    // Spread of an identity's samples around its mean before observation
    // noise; nullopt means every sample is centred exactly on the mean.
    std::optional<double> class_kappa;
    double quality_lo = 200.0;
    double quality_hi = 400.0;
    double ambiguity = 0.0;
    double val_fraction = 0.3;
    std::uint64_t seed = 7;

    void validate() const {
        if (d < 2) throw Error(Errc::schema, "d must be >= 2");
        if (n_identities < 1) throw Error(Errc::schema, "n_identities must be >= 1");
        if (!(oog_fraction >= 0.0 && oog_fraction < 1.0))
            throw Error(Errc::schema, "oog_fraction must lie in [0, 1)");
        if (samples_min < 1 || samples_max < samples_min)
            throw Error(Errc::schema, "samples_per_identity must satisfy 1 <= min <= max");
        if (class_kappa && !(*class_kappa > 0.0))
            throw Error(Errc::schema, "class_kappa must be > 0");
        if (!(quality_lo > 0.0) || quality_hi < quality_lo)
            throw Error(Errc::schema, "quality_kappa_range must satisfy 0 < low <= high");
        if (!(ambiguity >= 0.0 && ambiguity <= 1.0))
            throw Error(Errc::schema, "ambiguity must lie in [0, 1]");
        if (!(val_fraction >= 0.0 && val_fraction < 1.0))
            throw Error(Errc::schema, "val_fraction must lie in [0, 1)");
    }
};

enum class Split { validation, test };

struct SyntheticSample {
    UnitVector vector;
    double kappa;
    std::vector<double> pfe_sigma2;
    double sf_scale;
};

struct SyntheticIdentity {
    std::string id;
    UnitVector mean;
    std::vector<SyntheticSample> samples;
};

struct SampleStore {
    int d = 0;
    std::uint64_t seed = 0;
    std::vector<SyntheticIdentity> identities;
    std::vector<std::pair<std::size_t, std::size_t>> planted_pairs;

    std::size_t num_samples() const {
        std::size_t n = 0;
        for (const auto& id : identities) n += id.samples.size();
        return n;
    }
};

struct ProbeRecord {
    std::string probe_id;
    std::optional<std::string> class_id;  // nullopt: non-mated
    UnitVector vector;
    std::optional<double> kappa;
    std::optional<std::vector<double>> pfe_sigma2;
    std::optional<double> sf_scale;
    Split split = Split::test;

    bool mated() const noexcept { return class_id.has_value(); }
};

struct OsrProtocol {
    Gallery gallery;
    std::vector<ProbeRecord> probes;
    std::uint64_t generator_seed = 0;
    std::uint64_t protocol_seed = 0;

    int dim() const { return static_cast<int>(gallery.dim()); }
};

namespace protocol {

inline std::string identity_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "id%06zu", i);
    return buf;
}

inline std::string probe_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%07zu", i);
    return buf;
}

// Cosine of a planted pair of identity means.
inline constexpr double kPlantedCosLo = 0.95;
inline constexpr double kPlantedCosHi = 0.99;

inline SampleStore gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const auto d = static_cast<std::size_t>(cfg.d);
    const auto n = static_cast<std::size_t>(cfg.n_identities);

    SampleStore store;
    store.d = cfg.d;
    store.seed = cfg.seed;
    std::vector<UnitVector> means;
    means.reserve(n);
    for (std::size_t i = 0; i < n; ++i) means.push_back(vmf::detail::uniform_direction(d, rng));

    // Plant the first round(ambiguity * floor(n/2)) pairs of a shuffled pairing.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_pairs = static_cast<std::size_t>(std::llround(cfg.ambiguity * static_cast<double>(n / 2)));
    std::uniform_real_distribution<double> planted_cos(kPlantedCosLo, kPlantedCosHi);
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t a = perm[2 * p];
        const std::size_t b = perm[2 * p + 1];
        const double c = planted_cos(rng);
        auto t = vmf::detail::gaussian_vector(d, rng);
        const double proj = numeric::dot(t, means[a].coords());
        for (std::size_t i = 0; i < d; ++i) t[i] -= proj * means[a][i];
        const double tn = numeric::norm2(t);
        const double s = std::sqrt(1.0 - c * c) / tn;
        std::vector<double> v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = c * means[a][i] + s * t[i];
        means[b] = UnitVector::normalized(std::move(v));
        store.planted_pairs.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(store.planted_pairs.begin(), store.planted_pairs.end());

    std::uniform_int_distribution<int> count(cfg.samples_min, cfg.samples_max);
    std::uniform_real_distribution<double> log_quality(std::log(cfg.quality_lo), std::log(cfg.quality_hi));
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    store.identities.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticIdentity ident{identity_id(i), means[i], {}};
        const int m = count(rng);
        for (int k = 0; k < m; ++k) {
            const double kappa =
                cfg.quality_lo == cfg.quality_hi ? cfg.quality_lo : std::exp(log_quality(rng));
            UnitVector centre = cfg.class_kappa
                                    ? vmf::detail::draw_vmf({means[i], *cfg.class_kappa}, rng)
                                    : means[i];
            UnitVector observed = vmf::detail::draw_vmf({centre, kappa}, rng);
            std::vector<double> sigma2(d);
            for (double& s2 : sigma2) s2 = (1.0 + jitter(rng)) / kappa;
            ident.samples.push_back({std::move(observed), kappa, std::move(sigma2), std::log(kappa)});
        }
        store.identities.push_back(std::move(ident));
    }
    return store;
}

/// Splits identities into in-gallery and out-of-gallery, builds gallery
/// templates from half of each in-gallery identity's samples, and assigns
/// the remaining samples as single-sample probes.
inline OsrProtocol build_protocol(const SampleStore& store, double oog_fraction, double val_fraction,
                                  std::uint64_t seed) {
    if (store.identities.empty()) throw Error(Errc::schema, "empty sample store");
    if (!(oog_fraction >= 0.0 && oog_fraction < 1.0))
        throw Error(Errc::schema, "oog_fraction must lie in [0, 1)");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw Error(Errc::schema, "val_fraction must lie in [0, 1)");
    std::mt19937_64 rng(seed);
    const std::size_t n = store.identities.size();

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_oog = static_cast<std::size_t>(std::llround(oog_fraction * static_cast<double>(n)));
    std::vector<bool> in_gallery(n, false);
    for (std::size_t r = n_oog; r < n; ++r) in_gallery[perm[r]] = true;
    // Singletons cannot supply both a gallery template and a probe.
    for (std::size_t i = 0; i < n; ++i)
        if (store.identities[i].samples.size() < 2) in_gallery[i] = false;

    std::vector<std::string> class_ids;
    std::vector<UnitVector> means;
    std::vector<ProbeRecord> mated, nonmated;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ident = store.identities[i];
        std::vector<std::size_t> order(ident.samples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        auto as_probe = [&](const SyntheticSample& s, std::optional<std::string> cls) {
            return ProbeRecord{"", std::move(cls), s.vector, s.kappa, s.pfe_sigma2, s.sf_scale, Split::test};
        };
        if (!in_gallery[i]) {
            for (std::size_t k : order) nonmated.push_back(as_probe(ident.samples[k], std::nullopt));
            continue;
        }
        const std::size_t n_gallery = (order.size() + 1) / 2;
        std::vector<UnitVector> tmpl;
        for (std::size_t k = 0; k < n_gallery; ++k) tmpl.push_back(ident.samples[order[k]].vector);
        class_ids.push_back(ident.id);
        means.push_back(gallery::aggregate_template(tmpl));
        for (std::size_t k = n_gallery; k < order.size(); ++k)
            mated.push_back(as_probe(ident.samples[order[k]], ident.id));
    }
    if (class_ids.empty()) throw Error(Errc::schema, "protocol has no in-gallery identities");

    // Validation/test split, stratified by mated/non-mated.
    auto assign_split = [&](std::vector<ProbeRecord>& probes) {
        std::vector<std::size_t> idx(probes.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(probes.size())));
        for (std::size_t r = 0; r < n_val; ++r) probes[idx[r]].split = Split::validation;
    };
    assign_split(mated);
    assign_split(nonmated);

    std::vector<ProbeRecord> probes;
    probes.reserve(mated.size() + nonmated.size());
    for (auto& p : mated) probes.push_back(std::move(p));
    for (auto& p : nonmated) probes.push_back(std::move(p));
    // Ids carry no hint of mated status; they also break score ties.
    std::shuffle(probes.begin(), probes.end(), rng);
    for (std::size_t i = 0; i < probes.size(); ++i) probes[i].probe_id = probe_id(i);

    return OsrProtocol{Gallery(std::move(class_ids), std::move(means)), std::move(probes), store.seed, seed};
}

/// Shipped scenarios: "ambiguous" plants near-duplicate identities at uniform
/// high quality, "degraded" spreads sample quality, "mixed" does both.
inline std::optional<SynthConfig> preset(std::string_view name) {
    SynthConfig c;
    if (name == "ambiguous") {
        c.ambiguity = 0.3;
        c.quality_lo = 200.0;
        c.quality_hi = 400.0;
    } else if (name == "degraded") {
        c.ambiguity = 0.0;
        c.quality_lo = 2.0;
        c.quality_hi = 500.0;
    } else if (name == "mixed") {
        c.ambiguity = 0.3;
        c.quality_lo = 2.0;
        c.quality_hi = 500.0;
    } else {
        return std::nullopt;
    }
    return c;
}

inline OsrProtocol generate(const SynthConfig& cfg) {
    return build_protocol(gen_synthetic(cfg), cfg.oog_fraction, cfg.val_fraction, cfg.seed);
}

}  // namespace protocol
}  // namespace osrue
