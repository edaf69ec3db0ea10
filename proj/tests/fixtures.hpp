#pragma once

#include <vector>

#include "osrue/protocol.hpp"

// Two enrolled classes; mated probes sit on their class mean and non-mated
// probes stay at cosine <= 0.8, so any sensible threshold makes no errors. 0.8 keeps the
// FPIR threshold above the smallest tau the K = 2, d = 3 model can express.
inline osrue::OsrProtocol zero_error_protocol() {
    using namespace osrue;
    const Gallery g({"a", "b"}, {UnitVector({1, 0, 0}), UnitVector({0, 1, 0})});
    std::vector<ProbeRecord> probes;
    auto add = [&](std::optional<std::string> cls, std::vector<double> v, Split split) {
        const auto id = protocol::probe_id(probes.size());
        probes.push_back({id, std::move(cls), UnitVector::normalized(std::move(v)), 50.0 + probes.size(),
                          std::vector<double>{0.02, 0.02, 0.02}, 4.0, split});
    };
    for (Split s : {Split::validation, Split::test}) {
        for (int i = 0; i < 4; ++i) add("a", {1, 0, 0}, s), add("b", {0, 1, 0}, s);
        add(std::nullopt, {0, 0, 1}, s);
        add(std::nullopt, {0.8, 0, 0.6}, s);
        add(std::nullopt, {0, -1, 0}, s);
        add(std::nullopt, {-0.3, 0.4, 0.866}, s);
    }
    return OsrProtocol{g, std::move(probes), 0, 0};
}

inline osrue::SynthConfig tiny_config() {
    osrue::SynthConfig c;
    c.n_identities = 80;
    c.d = 8;
    c.ambiguity = 0.3;
    c.quality_lo = 5.0;
    c.quality_hi = 300.0;
    return c;
}
