#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vchain/transform.hpp"

namespace vchain {

/// Parsed query, before chain-specific quantization/encoding.
///
///   window=[1000,2000] range=[(0,3),(6,4)] bool="Sedan" AND ("Benz" OR "BMW")
///
/// range uses the corner form [alpha, beta] with one tuple per corner;
/// the 1-D shorthand range=[a,b] is accepted. Open upper ends may be
/// written `inf` and are clamped to the dimension maximum at compile
/// time. Subscription queries omit window=.
struct QuerySpec {
    std::optional<std::pair<uint64_t, uint64_t>> window;
    std::vector<std::pair<double, double>> range; // per-dim (lo, hi); hi may be +inf
    CnfCondition bool_cond;

    bool has_range() const { return !range.empty(); }
    std::string canonical_text() const;
};

QuerySpec parse_query_text(const std::string& text);

} // namespace vchain
