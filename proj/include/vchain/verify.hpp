#pragma once

#include <string>

#include "vchain/chain.hpp"
#include "vchain/query.hpp"
#include "vchain/vo.hpp"

namespace vchain {

/// Verification outcome. On rejection, `reason` is one of the stable codes
/// below and `detail` pins the offending height/entry.
struct VerifyReport {
    bool accepted = false;
    std::string reason; // empty when accepted
    std::string detail;
    uint64_t pairings = 0; // Miller loop evaluations
    uint64_t disjoint_checks = 0;
    uint64_t digest_recomputes = 0;
    uint64_t blocks_covered = 0;
    size_t vo_bytes = 0;
    double elapsed_ms = 0;

    std::string to_text() const;
    std::string to_json() const;
};

namespace reject {
inline constexpr const char* bad_proof = "bad proof";
inline constexpr const char* root_mismatch = "root mismatch";
inline constexpr const char* gap = "gap";
inline constexpr const char* nonmatching_result = "non-matching returned object";
inline constexpr const char* foreign_object = "foreign object";
inline constexpr const char* clause_forgery = "clause forgery";
inline constexpr const char* malformed = "malformed";
} // namespace reject

/// Full light-client verification of a time-window query answer against
/// block headers: Merkle/skip-root reconstruction, disjointness proofs,
/// clause certification, local match checks, and window tiling. Touches
/// only headers, the query, R, the VO, and public parameters.
VerifyReport verify_window(const LightView& view, const QuerySpec& q,
                           const std::vector<TemporalObject>& results,
                           const VerificationObject& vo);

/// Subscription-span variant: covers blocks [lo, hi] with no temporal
/// filtering inside them.
VerifyReport verify_span(const LightView& view, const QuerySpec& q, uint64_t lo, uint64_t hi,
                         const std::vector<TemporalObject>& results,
                         const VerificationObject& vo);

} // namespace vchain
