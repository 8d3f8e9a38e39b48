#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"
#include "lastmile/rng.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Generator configuration
// ---------------------------------------------------------------------------

// One antecedent atom of a planted association: a categorical feature equal
// to a raw value (empty string means the missing sentinel), or a numeric
// feature falling in the half-open interval [lo, hi).
struct Condition {
    std::size_t feature = 0;
    bool categorical = false;
    std::string raw;
    double lo = 0.0;
    double hi = 0.0;
};

// A feature->failure association planted into generated data: rows matching
// every antecedent atom have the target's base failure rate multiplied.
struct PlantedRule {
    std::vector<Condition> antecedent;  // size 1 or 2
    Outcome target = Outcome::NotAtHome;
    double multiplier = 1.0;
};

struct CategoricalLevel {
    std::string raw;  // "" = missing
    double weight = 0.0;
};

// Per-feature sampling distribution: categorical levels with weights, or a
// uniform numeric range (optionally integer-valued, optionally with a
// missing probability).
struct FeatureDistribution {
    std::vector<CategoricalLevel> levels;  // non-empty iff feature is categorical
    double lo = 0.0;
    double hi = 1.0;
    bool integer = false;
    double missing_p = 0.0;
};

struct GeneratorConfig {
    std::size_t n_stops = 0;
    std::uint64_t seed = 0;
    std::map<Outcome, double> base_rates;
    std::vector<FeatureDistribution> features;  // one per schema feature, schema order
    std::vector<PlantedRule> planted;
};

namespace detail {

inline FeatureDistribution numeric_dist(double lo, double hi, bool integer = false,
                                        double missing_p = 0.0) {
    FeatureDistribution d;
    d.lo = lo;
    d.hi = hi;
    d.integer = integer;
    d.missing_p = missing_p;
    return d;
}

inline FeatureDistribution categorical_dist(std::vector<CategoricalLevel> levels) {
    FeatureDistribution d;
    d.levels = std::move(levels);
    return d;
}

// n equally weighted levels named prefix + 1..n, sharing `total` weight.
inline std::vector<CategoricalLevel> uniform_levels(const std::string& prefix, int n,
                                                    double total) {
    std::vector<CategoricalLevel> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i)
        out.push_back({prefix + std::to_string(i), total / n});
    return out;
}

}  // namespace detail

// Default per-type failure rates of the modeled categories.
inline std::map<Outcome, double> default_base_rates() {
    return {{Outcome::NotAtHome, 0.0146},
            {Outcome::ServiceRefused, 0.0080},
            {Outcome::RescheduledByCustomer, 0.0060},
            {Outcome::CancelledByCustomer, 0.0049},
            {Outcome::NoSpaceForService, 0.0034}};
}

// A complete, ready-to-run configuration over the builtin schema: plausible
// marginal distributions for all 32 features (including heavy missingness on
// manufacturer and apartment-unit columns), default base rates, no planted
// rules.
inline GeneratorConfig default_generator_config(std::size_t n_stops, std::uint64_t seed) {
    using detail::categorical_dist;
    using detail::numeric_dist;
    using detail::uniform_levels;

    GeneratorConfig cfg;
    cfg.n_stops = n_stops;
    cfg.seed = seed;
    cfg.base_rates = default_base_rates();
    cfg.features.resize(builtin_schema().size());

    auto set = [&](const char* code, FeatureDistribution d) {
        auto idx = builtin_schema().index_of_code(code);
        if (!idx) throw InternalError("unknown builtin feature code");
        cfg.features[*idx] = std::move(d);
    };

    set("C1", numeric_dist(-79.8, -79.0));
    set("C2", numeric_dist(43.4, 44.2));
    {
        auto levels = uniform_levels("", 30, 0.914);
        levels.push_back({"", 0.086});
        set("C3", categorical_dist(std::move(levels)));
    }
    set("C4", categorical_dist(uniform_levels("St", 40, 1.0)));
    {
        auto levels = uniform_levels("U", 4, 0.173);
        levels.push_back({"", 0.827});
        set("C5", categorical_dist(std::move(levels)));
    }
    set("C6", categorical_dist({{"TOR", 0.5}, {"MIS", 0.2}, {"BRA", 0.15}, {"OAK", 0.1}, {"AJX", 0.05}}));
    set("C7", categorical_dist({{"1", 0.8}, {"2", 0.2}}));
    set("C8", categorical_dist(uniform_levels("P", 25, 1.0)));
    set("C9", categorical_dist(uniform_levels("Z", 12, 1.0)));
    set("R1", numeric_dist(1, 5, true));
    set("R2", numeric_dist(1, 80));
    set("R3", numeric_dist(1, 120, true));
    set("R4", numeric_dist(300, 5400));
    set("R5", numeric_dist(60, 3600));
    set("R6", numeric_dist(0, 1800));
    set("R7", numeric_dist(420, 1020));
    set("R8", numeric_dist(540, 1260));
    set("R9", numeric_dist(60, 480));
    set("R10", numeric_dist(-540, 540));
    set("R11", numeric_dist(-540, 540));
    set("P1", categorical_dist({{"1", 0.92}, {"0", 0.08}}));
    set("P2", categorical_dist({{"1", 0.4}, {"2", 0.3}, {"3", 0.2}, {"4", 0.1}}));
    set("P3", categorical_dist({{"1", 0.4}, {"2", 0.25}, {"3", 0.2}, {"4", 0.15}}));
    set("D1", numeric_dist(1, 52, true));
    set("D2", numeric_dist(420, 1260));
    set("D3", categorical_dist({{"1", 0.18}, {"2", 0.18}, {"3", 0.18}, {"4", 0.18}, {"5", 0.18}, {"6", 0.1}}));
    set("S1", categorical_dist({{"1", 0.6}, {"2", 0.25}, {"3", 0.15}}));
    set("S2", categorical_dist(uniform_levels("", 40, 1.0)));
    set("S3", numeric_dist(1, 6, true));
    set("S4", numeric_dist(1, 250));
    set("S5", [] {
        auto levels = detail::uniform_levels("", 8, 0.092);
        levels.push_back({"", 0.908});
        return detail::categorical_dist(std::move(levels));
    }());
    set("S6", numeric_dist(600, 7200));
    return cfg;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate_config(const GeneratorConfig& cfg,
                            const FeatureSchema& schema = builtin_schema()) {
    if (cfg.n_stops == 0) throw InvalidConfig("n_stops must be positive");
    if (cfg.features.size() != schema.size())
        throw InvalidConfig("feature distribution count does not match schema width");
    double rate_sum = 0.0;
    for (const auto& [type, rate] : cfg.base_rates) {
        if (!is_failure(type)) throw InvalidConfig("base rate given for a non-failure outcome");
        if (rate < 0.0 || rate > 1.0) throw InvalidConfig("base rate outside [0, 1]");
        rate_sum += rate;
    }
    if (rate_sum >= 1.0) throw InvalidConfig("base failure rates must sum below 1");
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto& d = cfg.features[f];
        const bool categorical = schema.at(f).kind == FeatureKind::Categorical;
        if (categorical) {
            if (d.levels.empty())
                throw InvalidConfig("categorical feature " + schema.at(f).code + " has no levels");
            double total = 0.0;
            for (const auto& lv : d.levels) {
                if (lv.weight < 0.0) throw InvalidConfig("negative level weight");
                total += lv.weight;
            }
            if (total <= 0.0) throw InvalidConfig("level weights sum to zero");
        } else {
            if (!d.levels.empty())
                throw InvalidConfig("numeric feature " + schema.at(f).code + " given levels");
            if (!(d.lo <= d.hi)) throw InvalidConfig("numeric range with lo > hi");
            if (d.missing_p < 0.0 || d.missing_p > 1.0)
                throw InvalidConfig("missing probability outside [0, 1]");
        }
    }
    for (const auto& rule : cfg.planted) {
        if (!(rule.multiplier > 0.0)) throw InvalidConfig("rule multiplier must be positive");
        if (rule.antecedent.empty() || rule.antecedent.size() > 2)
            throw InvalidConfig("rule antecedent must have 1 or 2 conditions");
        if (!is_failure(rule.target)) throw InvalidConfig("rule target must be a failure type");
        for (const auto& c : rule.antecedent) {
            if (c.feature >= schema.size()) throw InvalidConfig("rule condition feature out of range");
            const bool categorical = schema.at(c.feature).kind == FeatureKind::Categorical;
            if (c.categorical != categorical)
                throw InvalidConfig("rule condition kind does not match feature kind for " +
                                    schema.at(c.feature).code);
            if (!c.categorical && !(c.lo < c.hi))
                throw InvalidConfig("numeric rule condition needs lo < hi");
        }
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace detail {

struct CompiledCondition {
    std::size_t feature;
    bool categorical;
    double code =  0.0;  // encoded value for categorical conditions
    double lo = 0.0, hi = 0.0;

    bool matches(std::span<const double> row) const {
        double v = row[feature];
        return categorical ? v == code : (v >= lo && v < hi);
    }
};

struct CompiledRule {
    std::vector<CompiledCondition> conds;
    Outcome target;
    double multiplier;
};

}  // namespace detail

// Samples n_stops rows.  Features draw independently from their marginals;
// each failure type's per-row probability is its base rate times the product
// of multipliers of matching planted rules (clamped to 1); one categorical
// draw then assigns at most one failure, otherwise Success.  Each row's
// randomness derives from (seed, row index) only, so any generation order
// yields the same dataset.
inline Dataset generate(const GeneratorConfig& cfg,
                        const FeatureSchema& schema = builtin_schema()) {
    validate_config(cfg, schema);

    Dataset data;
    data.schema = schema;

    // Register categorical levels in config order so codes are independent of
    // which levels happen to be drawn first.
    for (std::size_t f = 0; f < schema.size(); ++f)
        for (const auto& lv : cfg.features[f].levels)
            if (!lv.raw.empty()) data.encoding.encode(f, lv.raw);

    std::vector<detail::CompiledRule> rules;
    for (const auto& rule : cfg.planted) {
        detail::CompiledRule cr;
        cr.target = rule.target;
        cr.multiplier = rule.multiplier;
        for (const auto& c : rule.antecedent) {
            detail::CompiledCondition cc;
            cc.feature = c.feature;
            cc.categorical = c.categorical;
            if (c.categorical) {
                if (c.raw.empty()) {
                    cc.code = kMissingSentinel;
                } else {
                    auto code = data.encoding.lookup(c.feature, c.raw);
                    if (!code)
                        throw InvalidConfig("rule condition value '" + c.raw +
                                            "' is not a level of " + schema.at(c.feature).code);
                    cc.code = *code;
                }
            } else {
                cc.lo = c.lo;
                cc.hi = c.hi;
            }
            cr.conds.push_back(cc);
        }
        rules.push_back(std::move(cr));
    }

    // Cumulative level weights for O(levels) sampling per categorical cell.
    struct LevelTable {
        std::vector<double> cum;     // normalized cumulative weights
        std::vector<double> values;  // encoded value per level
    };
    std::vector<LevelTable> tables(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto& d = cfg.features[f];
        if (d.levels.empty()) continue;
        double total = 0.0;
        for (const auto& lv : d.levels) total += lv.weight;
        double acc = 0.0;
        for (const auto& lv : d.levels) {
            acc += lv.weight / total;
            tables[f].cum.push_back(acc);
            tables[f].values.push_back(lv.raw.empty()
                                           ? kMissingSentinel
                                           : *data.encoding.lookup(f, lv.raw));
        }
        tables[f].cum.back() = 1.0;  // guard against accumulated rounding
    }

    const auto& types = failure_types();
    std::vector<double> row(schema.size());
    data.values.reserve(cfg.n_stops * schema.size());
    data.labels.reserve(cfg.n_stops);
    data.stop_ids.reserve(cfg.n_stops);

    for (std::size_t i = 0; i < cfg.n_stops; ++i) {
        Rng rng(derive_seed(cfg.seed, "row", static_cast<std::uint64_t>(i)));
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const auto& d = cfg.features[f];
            if (!d.levels.empty()) {
                double u = rng.uniform01();
                std::size_t k = 0;
                while (k + 1 < tables[f].cum.size() && u >= tables[f].cum[k]) ++k;
                row[f] = tables[f].values[k];
            } else {
                if (d.missing_p > 0.0 && rng.uniform01() < d.missing_p) {
                    row[f] = kMissingSentinel;
                } else if (d.integer) {
                    double v = std::floor(rng.uniform(d.lo, d.hi + 1.0));
                    row[f] = std::min(v, d.hi);
                } else {
                    row[f] = rng.uniform(d.lo, d.hi);
                }
            }
        }

        double total = 0.0;
        double hazard[8] = {};
        for (Outcome t : types) {
            auto it = cfg.base_rates.find(t);
            double h = it == cfg.base_rates.end() ? 0.0 : it->second;
            for (const auto& r : rules) {
                if (r.target != t) continue;
                bool all = true;
                for (const auto& c : r.conds)
                    if (!c.matches(row)) {
                        all = false;
                        break;
                    }
                if (all) h *= r.multiplier;
            }
            h = std::min(h, 1.0);
            hazard[static_cast<int>(t)] = h;
            total += h;
        }
        if (total >= 1.0)
            throw InvalidConfig("total failure probability reaches 1 for a generated row");

        double u = rng.uniform01();
        Outcome label = Outcome::Success;
        double acc = 0.0;
        for (Outcome t : types) {
            acc += hazard[static_cast<int>(t)];
            if (u < acc) {
                label = t;
                break;
            }
        }
        data.append_row("stop-" + std::to_string(i + 1), row, label);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Analytical oracle
// ---------------------------------------------------------------------------

// Population prevalence of a single antecedent condition under the config's
// marginal for its feature.
inline double condition_prevalence(const GeneratorConfig& cfg, const Condition& c,
                                   const FeatureSchema& schema = builtin_schema()) {
    if (c.feature >= cfg.features.size()) throw InvalidConfig("condition feature out of range");
    const auto& d = cfg.features[c.feature];
    if (c.categorical) {
        if (d.levels.empty()) throw InvalidConfig("categorical condition on numeric feature");
        double total = 0.0, hit = 0.0;
        for (const auto& lv : d.levels) {
            total += lv.weight;
            if (lv.raw == c.raw) hit += lv.weight;
        }
        return hit / total;
    }
    if (!d.levels.empty()) throw InvalidConfig("numeric condition on categorical feature");
    double present = 1.0 - d.missing_p;
    if (d.integer) {
        // integers uniform on [lo, hi]; condition counts those in [c.lo, c.hi)
        double first = std::max(d.lo, std::ceil(c.lo));
        double last = std::min(d.hi, std::ceil(c.hi) - 1.0);
        double count = std::max(0.0, last - first + 1.0);
        return present * count / (d.hi - d.lo + 1.0);
    }
    if (d.hi == d.lo) return 0.0;
    double overlap = std::max(0.0, std::min(c.hi, d.hi) - std::max(c.lo, d.lo));
    (void)schema;
    return present * overlap / (d.hi - d.lo);
}

// Large-sample interest ratio of a planted single-antecedent rule.  With
// multiplier m and antecedent prevalence p, the matched sub-population fails
// at m*b and the population at b*(p*m + 1 - p), so
//   phi = P(x | failed) / P(x) = m / (1 + p*(m - 1)).
// The single categorical outcome draw makes this exact even when several
// failure types compete, because type t is assigned with exactly its own
// per-row probability.
inline double expected_phi(const GeneratorConfig& cfg, const PlantedRule& rule,
                           const FeatureSchema& schema = builtin_schema()) {
    if (rule.antecedent.size() != 1)
        throw UsageError("expected_phi is defined for single-antecedent rules");
    double p = condition_prevalence(cfg, rule.antecedent[0], schema);
    double m = rule.multiplier;
    return m / (1.0 + p * (m - 1.0));
}

inline double expected_ir(const GeneratorConfig& cfg, const PlantedRule& rule,
                          const FeatureSchema& schema = builtin_schema()) {
    double phi = expected_phi(cfg, rule, schema);
    return phi >= 1.0 ? phi : 1.0 / phi;
}

}  // namespace lastmile
