#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/rng.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Method selector
// ---------------------------------------------------------------------------

enum class ResampleKind : std::uint8_t { None, RandomUnder, NearMiss3, Smote };

struct ResampleMethod {
    ResampleKind kind = ResampleKind::None;
    int k = 0;                    // neighbor count: 3 for NearMiss3, 2 for Smote
    std::optional<double> ratio;  // Smote only; empty = balance the classes

    static ResampleMethod none() { return {ResampleKind::None, 0, std::nullopt}; }
    static ResampleMethod random_under() { return {ResampleKind::RandomUnder, 0, std::nullopt}; }
    static ResampleMethod nearmiss3() { return {ResampleKind::NearMiss3, 3, std::nullopt}; }
    static ResampleMethod smote(std::optional<double> ratio = std::nullopt) {
        if (ratio && !(*ratio > 0.0)) throw InvalidConfig("smote ratio must be positive");
        return {ResampleKind::Smote, 2, ratio};
    }
};

inline const char* resample_name(ResampleKind k) {
    switch (k) {
        case ResampleKind::None: return "none";
        case ResampleKind::RandomUnder: return "random_under";
        case ResampleKind::NearMiss3: return "nearmiss3";
        case ResampleKind::Smote: return "smote";
    }
    throw InternalError("invalid resample kind");
}

inline std::optional<ResampleKind> resample_from_name(std::string_view name) {
    for (ResampleKind k : {ResampleKind::None, ResampleKind::RandomUnder,
                           ResampleKind::NearMiss3, ResampleKind::Smote})
        if (resample_name(k) == name) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace detail {

inline double sq_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct ClassSplit {
    std::vector<std::size_t> minority;
    std::vector<std::size_t> majority;
    std::uint8_t minority_label = 1;
};

// Splits rows by class; the smaller class is the minority (the positive class
// on a tie, which is the interesting one in this domain).
inline ClassSplit split_classes(const BinaryDataset& data) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        (data.labels[r] ? pos : neg).push_back(r);
    if (pos.empty() || neg.empty())
        throw EmptyClass("resampling requires both classes non-empty");
    ClassSplit s;
    if (pos.size() <= neg.size()) {
        s.minority = std::move(pos);
        s.majority = std::move(neg);
        s.minority_label = 1;
    } else {
        s.minority = std::move(neg);
        s.majority = std::move(pos);
        s.minority_label = 0;
    }
    return s;
}

inline BinaryDataset take_rows(const BinaryDataset& data, std::vector<std::size_t> rows) {
    std::sort(rows.begin(), rows.end());
    BinaryDataset out;
    out.width = data.width;
    out.values.reserve(rows.size() * data.width);
    for (std::size_t r : rows) out.append_row(data.row(r), data.labels[r], data.row_ids[r]);
    return out;
}

// Indices of the k nearest rows of `pool` to `query`, ties broken by
// ascending pool position.
inline std::vector<std::size_t> k_nearest(const BinaryDataset& data, std::size_t query,
                                          const std::vector<std::size_t>& pool, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i] == query) continue;
        d.emplace_back(sq_distance(data.row(query), data.row(pool[i])), i);
    }
    k = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random undersampling
// ---------------------------------------------------------------------------

// Keeps every minority row and a uniform without-replacement sample of the
// majority of equal size.  Output preserves the input row order.
inline BinaryDataset random_undersample(const BinaryDataset& data, std::uint64_t seed) {
    auto split = detail::split_classes(data);
    Rng rng(derive_seed(seed, "undersample"));
    auto picks = rng.sample_without_replacement(split.majority.size(), split.minority.size());
    std::vector<std::size_t> keep = split.minority;
    for (std::size_t p : picks) keep.push_back(split.majority[p]);
    return detail::take_rows(data, std::move(keep));
}

// ---------------------------------------------------------------------------
// NearMiss-3
// ---------------------------------------------------------------------------

// Two stages over Euclidean distances on the raw encoded matrix:
//   1. candidates = union over minority points of their k=3 nearest majority
//      neighbors;
//   2. keep the candidates whose mean distance to their own 3 nearest
//      minority points is largest, down to minority count.
// Deterministic: all ties resolve by ascending row index.
inline BinaryDataset nearmiss3(const BinaryDataset& data, int k = 3) {
    if (k < 1) throw InvalidConfig("nearmiss3 requires k >= 1");
    auto split = detail::split_classes(data);

    std::vector<char> is_candidate(split.majority.size(), 0);
    for (std::size_t m : split.minority)
        for (std::size_t idx : detail::k_nearest(data, m, split.majority,
                                                 static_cast<std::size_t>(k)))
            is_candidate[idx] = 1;

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < split.majority.size(); ++i)
        if (is_candidate[i]) candidates.push_back(split.majority[i]);

    // Mean distance from each candidate to its 3 nearest minority points.
    std::vector<std::pair<double, std::size_t>> scored;  // (-mean distance, row)
    scored.reserve(candidates.size());
    for (std::size_t c : candidates) {
        auto nn = detail::k_nearest(data, c, split.minority, static_cast<std::size_t>(k));
        double mean = 0.0;
        for (std::size_t i : nn)
            mean += std::sqrt(detail::sq_distance(data.row(c), data.row(split.minority[i])));
        mean /= static_cast<double>(nn.size());
        scored.emplace_back(-mean, c);
    }
    std::sort(scored.begin(), scored.end());  // largest mean first, then by row index

    std::vector<std::size_t> keep = split.minority;
    std::size_t take = std::min(split.minority.size(), scored.size());
    for (std::size_t i = 0; i < take; ++i) keep.push_back(scored[i].second);
    return detail::take_rows(data, std::move(keep));
}

// ---------------------------------------------------------------------------
// SMOTE (regular, k = 2)
// ---------------------------------------------------------------------------

// Origin of one synthetic row, exposed so geometry is testable.
struct SmoteRecord {
    std::size_t base_row;      // row index in the input dataset
    std::size_t neighbor_row;  // row index in the input dataset
    double u;                  // interpolation coefficient in [0, 1)
};

struct SmoteResult {
    BinaryDataset data;
    std::vector<SmoteRecord> synthetic;  // one per appended row, in append order
};

// Appends round((ratio - 1) * minority) synthetic minority rows, so a ratio
// equal to majority/minority balances the classes exactly.  Synthetic row s
// is based on minority row s % n_min (round robin); its randomness derives
// from (seed, minority row, round), independent of every other row.
inline SmoteResult smote_detailed(const BinaryDataset& data, std::optional<double> ratio,
                                  std::uint64_t seed, int k = 2) {
    if (k < 1) throw InvalidConfig("smote requires k >= 1");
    auto split = detail::split_classes(data);
    const std::size_t n_min = split.minority.size();
    if (n_min < 2) throw TooFewMinority("smote requires at least 2 minority rows");

    const double r = ratio.value_or(static_cast<double>(split.majority.size()) /
                                    static_cast<double>(n_min));
    if (!(r > 0.0)) throw InvalidConfig("smote ratio must be positive");
    const auto n_syn = static_cast<std::size_t>(
        std::max<long long>(0, std::llround((r - 1.0) * static_cast<double>(n_min))));

    // k nearest minority neighbors of each minority row, ties by index.
    std::vector<std::vector<std::size_t>> neighbors(n_min);
    for (std::size_t i = 0; i < n_min; ++i) {
        auto nn = detail::k_nearest(data, split.minority[i], split.minority,
                                    static_cast<std::size_t>(k));
        for (std::size_t j : nn) neighbors[i].push_back(split.minority[j]);
    }

    SmoteResult out;
    out.data.width = data.width;
    out.data.values = data.values;
    out.data.labels = data.labels;
    out.data.row_ids = data.row_ids;

    std::vector<double> row(data.width);
    for (std::size_t s = 0; s < n_syn; ++s) {
        const std::size_t mi = s % n_min;
        const std::size_t round = s / n_min;
        Rng rng(derive_seed(seed, "smote", static_cast<std::uint64_t>(mi),
                            static_cast<std::uint64_t>(round)));
        const std::size_t base = split.minority[mi];
        const auto& nn = neighbors[mi];
        const std::size_t pick = nn[rng.index(nn.size())];
        const double u = rng.uniform01();
        for (std::size_t f = 0; f < data.width; ++f)
            row[f] = data.at(base, f) + u * (data.at(pick, f) - data.at(base, f));
        out.data.append_row(row, split.minority_label, kSyntheticRowId);
        out.synthetic.push_back({base, pick, u});
    }
    return out;
}

inline BinaryDataset smote(const BinaryDataset& data, std::optional<double> ratio,
                           std::uint64_t seed, int k = 2) {
    return smote_detailed(data, ratio, seed, k).data;
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

inline BinaryDataset apply_resample(const BinaryDataset& data, const ResampleMethod& method,
                                    std::uint64_t seed) {
    switch (method.kind) {
        case ResampleKind::None: return data;
        case ResampleKind::RandomUnder: return random_undersample(data, seed);
        case ResampleKind::NearMiss3: return nearmiss3(data, method.k ? method.k : 3);
        case ResampleKind::Smote: return smote(data, method.ratio, seed, method.k ? method.k : 2);
    }
    throw InternalError("invalid resample kind");
}

}  // namespace lastmile
