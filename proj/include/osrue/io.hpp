#pragma once

// On-disk formats. A bundle is a directory with manifest.json and
// records.jsonl (one embedding record per line, keys sorted, doubles printed
// with 17 significant digits so that every value reads back bit-exactly).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "osrue/error.hpp"
#include "osrue/holue.hpp"
#include "osrue/mlp.hpp"
#include "osrue/protocol.hpp"

namespace osrue::io {

using nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRecordsFile = "records.jsonl";

inline std::string format_double(double v) {
    if (!std::isfinite(v)) throw Error(Errc::schema, "cannot serialize a non-finite number");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string_view split_name(Split s) { return s == Split::validation ? "validation" : "test"; }

namespace detail {

inline void append_array(std::string& out, std::span<const double> values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    out += ']';
}

inline void append_optional(std::string& out, const std::optional<double>& v) {
    out += v ? format_double(*v) : "null";
}

inline std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace detail

struct EmbeddingRecord {
    std::string template_id;
    std::optional<std::string> subject_id;
    bool gallery = false;
    Split split = Split::test;
    std::vector<double> vector;
    std::optional<double> kappa;
    std::optional<std::vector<double>> pfe_sigma2;
    std::optional<double> sf_scale;
};

/// Canonical single-line form; keys in lexicographic order.
inline std::string serialize_record(const EmbeddingRecord& r) {
    std::string out = "{\"kappa\":";
    detail::append_optional(out, r.kappa);
    out += ",\"pfe_sigma2\":";
    if (r.pfe_sigma2) detail::append_array(out, *r.pfe_sigma2);
    else out += "null";
    out += ",\"role\":";
    out += r.gallery ? "\"gallery\"" : "\"probe\"";
    out += ",\"sf_scale\":";
    detail::append_optional(out, r.sf_scale);
    out += ",\"split\":\"";
    out += split_name(r.split);
    out += "\",\"subject_id\":";
    out += r.subject_id ? detail::quoted(*r.subject_id) : "null";
    out += ",\"template_id\":";
    out += detail::quoted(r.template_id);
    out += ",\"vector\":";
    detail::append_array(out, r.vector);
    out += '}';
    return out;
}

inline std::vector<EmbeddingRecord> to_records(const OsrProtocol& p) {
    std::vector<EmbeddingRecord> out;
    const auto& g = p.gallery;
    for (std::size_t c = 0; c < g.size(); ++c) {
        const auto& v = g.means()[c].coords();
        out.push_back({g.class_ids()[c], g.class_ids()[c], true, Split::test, {v.begin(), v.end()},
                       std::nullopt, std::nullopt, std::nullopt});
    }
    for (const auto& pr : p.probes) {
        const auto& v = pr.vector.coords();
        out.push_back({pr.probe_id, pr.class_id, false, pr.split, {v.begin(), v.end()}, pr.kappa,
                       pr.pfe_sigma2, pr.sf_scale});
    }
    std::sort(out.begin(), out.end(), [](const EmbeddingRecord& a, const EmbeddingRecord& b) {
        if (a.gallery != b.gallery) return a.gallery;
        return a.template_id < b.template_id;
    });
    return out;
}

inline json manifest_json(const OsrProtocol& p) {
    std::size_t mated = 0, validation = 0;
    for (const auto& pr : p.probes) {
        mated += pr.mated();
        validation += pr.split == Split::validation;
    }
    json m;
    m["schema_version"] = kSchemaVersion;
    m["d"] = p.dim();
    m["counts"] = {{"gallery", p.gallery.size()},
                   {"probes", p.probes.size()},
                   {"mated_probes", mated},
                   {"nonmated_probes", p.probes.size() - mated},
                   {"validation", validation},
                   {"test", p.probes.size() - validation}};
    m["seeds"] = {{"generator", p.generator_seed}, {"protocol", p.protocol_seed}};
    return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error(Errc::io, "write to " + path.string() + " failed");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_bundle(const OsrProtocol& p, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
    std::string records;
    for (const auto& r : to_records(p)) {
        records += serialize_record(r);
        records += '\n';
    }
    write_text(dir / kRecordsFile, records);
    write_text(dir / kManifestFile, manifest_json(p).dump(2) + "\n");
}

namespace detail {

[[noreturn]] inline void schema_error(std::size_t line, const std::string& what) {
    throw Error(Errc::schema, std::string(kRecordsFile) + ":" + std::to_string(line) + ": " + what);
}

inline std::optional<double> optional_number(const json& j, const char* key, std::size_t line) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) schema_error(line, std::string(key) + " must be a number or null");
    return v.get<double>();
}

inline std::vector<double> number_array(const json& v, const char* key, std::size_t line) {
    if (!v.is_array()) schema_error(line, std::string(key) + " must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) schema_error(line, std::string(key) + " holds a non-number");
        out.push_back(x.get<double>());
    }
    return out;
}

inline EmbeddingRecord parse_record(const std::string& text, std::size_t line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        schema_error(line, e.what());
    }
    static const std::set<std::string> keys = {"kappa", "pfe_sigma2", "role", "sf_scale",
                                               "split", "subject_id", "template_id", "vector"};
    if (!j.is_object() || j.size() != keys.size()) schema_error(line, "record must have exactly the 8 fields");
    for (const auto& [k, _] : j.items())
        if (!keys.count(k)) schema_error(line, "unknown field " + k);

    EmbeddingRecord r;
    if (!j["template_id"].is_string()) schema_error(line, "template_id must be a string");
    r.template_id = j["template_id"].get<std::string>();
    if (j["subject_id"].is_string()) r.subject_id = j["subject_id"].get<std::string>();
    else if (!j["subject_id"].is_null()) schema_error(line, "subject_id must be a string or null");
    const auto& role = j["role"];
    if (role == "gallery") r.gallery = true;
    else if (role != "probe") schema_error(line, "role must be gallery or probe");
    const auto& split = j["split"];
    if (split == "validation") r.split = Split::validation;
    else if (split != "test") schema_error(line, "split must be validation or test");
    r.vector = number_array(j["vector"], "vector", line);
    r.kappa = optional_number(j, "kappa", line);
    r.sf_scale = optional_number(j, "sf_scale", line);
    if (!j["pfe_sigma2"].is_null()) r.pfe_sigma2 = number_array(j["pfe_sigma2"], "pfe_sigma2", line);
    if (r.gallery && !r.subject_id) schema_error(line, "gallery record without subject_id");
    return r;
}

// Unit-norm policy on load: within 1e-9 taken as is, within 1e-6 rescaled
// silently, within 1e-3 rescaled with a warning, otherwise rejected.
inline UnitVector load_vector(std::vector<double> v, const std::string& id,
                              std::vector<std::string>* warnings) {
    const double n = numeric::norm2(v);
    const double dev = std::abs(n - 1.0);
    if (dev <= UnitVector::kTolerance) return UnitVector(std::move(v));
    if (dev <= 1e-3) {
        if (dev > 1e-6 && warnings)
            warnings->push_back("record " + id + ": norm " + format_double(n) + " renormalized");
        return UnitVector::normalized(std::move(v));
    }
    throw Error(Errc::non_unit_vector, "record " + id + " has norm " + format_double(n));
}

}  // namespace detail

/// Reads and validates a bundle. Renormalization notices go to `warnings`.
inline OsrProtocol read_bundle(const std::filesystem::path& dir,
                               std::vector<std::string>* warnings = nullptr) {
    json manifest;
    try {
        manifest = json::parse(read_text(dir / kManifestFile));
    } catch (const json::exception& e) {
        throw Error(Errc::schema, std::string(kManifestFile) + ": " + e.what());
    }
    if (!manifest.is_object() || manifest.value("schema_version", json()) != kSchemaVersion)
        throw Error(Errc::schema, "manifest schema_version must be \"1\"");
    if (!manifest.contains("d") || !manifest["d"].is_number_integer() || manifest["d"].get<int>() < 2)
        throw Error(Errc::schema, "manifest d must be an integer >= 2");
    const auto d = manifest["d"].get<std::size_t>();

    std::vector<EmbeddingRecord> records;
    {
        std::istringstream in(read_text(dir / kRecordsFile));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            records.push_back(detail::parse_record(line, lineno));
        }
    }
    std::sort(records.begin(), records.end(), [](const EmbeddingRecord& a, const EmbeddingRecord& b) {
        if (a.gallery != b.gallery) return a.gallery;
        return a.template_id < b.template_id;
    });

    std::set<std::string> seen_templates;
    std::vector<std::string> class_ids;
    std::vector<UnitVector> means;
    std::vector<ProbeRecord> probes;
    for (const auto& r : records) {
        if (!seen_templates.insert(r.template_id).second)
            throw Error(Errc::duplicate_id, "template_id " + r.template_id + " appears twice");
        if (r.vector.size() != d)
            throw Error(Errc::dimension_mismatch, "record " + r.template_id + " has " +
                                                      std::to_string(r.vector.size()) + " coordinates, manifest d=" +
                                                      std::to_string(d));
        auto v = detail::load_vector(r.vector, r.template_id, warnings);
        if (r.gallery) {
            class_ids.push_back(*r.subject_id);
            means.push_back(std::move(v));
        } else {
            probes.push_back({r.template_id, r.subject_id, std::move(v), r.kappa, r.pfe_sigma2, r.sf_scale, r.split});
        }
    }
    if (class_ids.empty()) throw Error(Errc::schema, "bundle has no gallery records");
    Gallery gallery(std::move(class_ids), std::move(means));
    const std::set<std::string> enrolled(gallery.class_ids().begin(), gallery.class_ids().end());
    for (const auto& p : probes)
        if (p.class_id && !enrolled.count(*p.class_id))
            throw Error(Errc::schema, "probe " + p.probe_id + " names unknown class " + *p.class_id);

    OsrProtocol proto{std::move(gallery), std::move(probes), 0, 0};
    if (manifest.contains("seeds")) {
        proto.generator_seed = manifest["seeds"].value("generator", std::uint64_t{0});
        proto.protocol_seed = manifest["seeds"].value("protocol", std::uint64_t{0});
    }
    const json expected = manifest_json(proto)["counts"];
    if (manifest.value("counts", json()) != expected)
        throw Error(Errc::schema, "manifest counts do not match records: expected " + expected.dump());
    return proto;
}

// ---- synthetic generator configuration -------------------------------------

/// Parses a generator config. A "preset" key selects the base configuration;
/// the remaining keys override it.
inline SynthConfig parse_synth_config(const json& j, SynthConfig base = {}) {
    if (!j.is_object()) throw Error(Errc::schema, "config must be a JSON object");
    static const std::set<std::string> keys = {
        "preset", "d", "n_identities", "oog_fraction", "samples_per_identity", "class_kappa",
        "quality_kappa_range", "ambiguity", "val_fraction", "seed"};
    for (const auto& [k, _] : j.items())
        if (!keys.count(k)) throw Error(Errc::schema, "unknown config key " + k);
    SynthConfig c = base;
    try {
        if (j.contains("preset")) {
            const auto name = j["preset"].get<std::string>();
            const auto p = protocol::preset(name);
            if (!p) throw Error(Errc::schema, "unknown preset " + name);
            c = *p;
        }
        if (j.contains("d")) c.d = j["d"].get<int>();
        if (j.contains("n_identities")) c.n_identities = j["n_identities"].get<int>();
        if (j.contains("oog_fraction")) c.oog_fraction = j["oog_fraction"].get<double>();
        if (j.contains("samples_per_identity")) {
            const auto& s = j["samples_per_identity"];
            if (s.is_array()) {
                if (s.size() != 2) throw Error(Errc::schema, "samples_per_identity needs [min, max]");
                c.samples_min = s[0].get<int>();
                c.samples_max = s[1].get<int>();
            } else {
                c.samples_min = c.samples_max = s.get<int>();
            }
        }
        if (j.contains("class_kappa")) {
            if (j["class_kappa"].is_null()) c.class_kappa.reset();
            else c.class_kappa = j["class_kappa"].get<double>();
        }
        if (j.contains("quality_kappa_range")) {
            const auto& q = j["quality_kappa_range"];
            if (!q.is_array() || q.size() != 2) throw Error(Errc::schema, "quality_kappa_range needs [low, high]");
            c.quality_lo = q[0].get<double>();
            c.quality_hi = q[1].get<double>();
        }
        if (j.contains("ambiguity")) c.ambiguity = j["ambiguity"].get<double>();
        if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json synth_config_json(const SynthConfig& c) {
    json j;
    j["d"] = c.d;
    j["n_identities"] = c.n_identities;
    j["oog_fraction"] = c.oog_fraction;
    j["samples_per_identity"] = {c.samples_min, c.samples_max};
    j["class_kappa"] = c.class_kappa ? json(*c.class_kappa) : json();
    j["quality_kappa_range"] = {c.quality_lo, c.quality_hi};
    j["ambiguity"] = c.ambiguity;
    j["val_fraction"] = c.val_fraction;
    j["seed"] = c.seed;
    return j;
}

// ---- calibrator ------------------------------------------------------------

inline json calibrator_json(const MlpCalibrator& net, const CalibrationStats& stats) {
    json j;
    j["layer_sizes"] = MlpCalibrator::kSizes;
    json layers = json::array();
    for (const auto& l : net.layers()) layers.push_back({{"weights", l.weights}, {"biases", l.biases}});
    j["layers"] = layers;
    j["stats"] = {{"mean1", stats.mean1}, {"std1", stats.std1}, {"mean2", stats.mean2}, {"std2", stats.std2}};
    const auto& h = net.hyper();
    j["hyper"] = {{"learning_rate", h.learning_rate},
                  {"momentum", h.momentum},
                  {"epochs", h.epochs},
                  {"init_range", h.init_range}};
    j["seed"] = net.seed();
    return j;
}

inline std::pair<MlpCalibrator, CalibrationStats> parse_calibrator(const json& j) {
    try {
        if (j.at("layer_sizes").get<std::vector<std::size_t>>() !=
            std::vector<std::size_t>(MlpCalibrator::kSizes.begin(), MlpCalibrator::kSizes.end()))
            throw Error(Errc::schema, "unsupported calibrator layer sizes");
        MlpCalibrator net;
        const auto& layers = j.at("layers");
        if (layers.size() != net.layers().size()) throw Error(Errc::schema, "calibrator layer count");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto w = layers[l].at("weights").get<std::vector<double>>();
            auto b = layers[l].at("biases").get<std::vector<double>>();
            auto& dst = net.layers()[l];
            if (w.size() != dst.weights.size() || b.size() != dst.biases.size())
                throw Error(Errc::schema, "calibrator layer shape");
            dst.weights = std::move(w);
            dst.biases = std::move(b);
        }
        const auto& h = j.at("hyper");
        net.set_training_record({h.at("learning_rate").get<double>(), h.at("momentum").get<double>(),
                                 h.at("epochs").get<int>(), h.at("init_range").get<double>()},
                                j.at("seed").get<std::uint64_t>());
        const auto& s = j.at("stats");
        CalibrationStats stats{s.at("mean1").get<double>(), s.at("std1").get<double>(),
                               s.at("mean2").get<double>(), s.at("std2").get<double>()};
        return {std::move(net), stats};
    } catch (const json::exception& e) {
        throw Error(Errc::schema, std::string("calibrator: ") + e.what());
    }
}

}  // namespace osrue::io
