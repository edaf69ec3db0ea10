#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace osrue {

enum class Errc {
    invalid_dimension,
    domain,
    dimension_mismatch,
    degenerate_template,
    unreachable_threshold,
    calibration,
    training,
    curve_truncation,
    undefined_prr,
    schema,
    non_unit_vector,
    duplicate_id,
    io,
    oracle_domain,
    oracle_failure,
};

inline std::string_view errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_dimension: return "invalid-dimension";
        case Errc::domain: return "domain";
        case Errc::dimension_mismatch: return "dimension-mismatch";
        case Errc::degenerate_template: return "degenerate-template";
        case Errc::unreachable_threshold: return "unreachable-threshold";
        case Errc::calibration: return "calibration";
        case Errc::training: return "training";
        case Errc::curve_truncation: return "curve-truncation";
        case Errc::undefined_prr: return "undefined-prr";
        case Errc::schema: return "schema";
        case Errc::non_unit_vector: return "non-unit-vector";
        case Errc::duplicate_id: return "duplicate-id";
        case Errc::io: return "io";
        case Errc::oracle_domain: return "oracle-domain";
        case Errc::oracle_failure: return "oracle-failure";
    }
    return "unknown";
}

// Every failure in the library is reported through this one exception type;
// callers branch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace osrue
