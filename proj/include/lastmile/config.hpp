#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"
#include "lastmile/synth.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Generic `key = value` config file
// ---------------------------------------------------------------------------

// Line-oriented text config: `key = value` pairs, '#' starts a comment,
// blank lines ignored.  Keys may repeat (used by `rule = ...` lines).
struct ConfigFile {
    std::vector<std::pair<std::string, std::string>> entries;

    static ConfigFile parse(std::istream& in) {
        ConfigFile cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string_view sv = trim(line);
            if (sv.empty()) continue;
            auto eq = sv.find('=');
            if (eq == std::string_view::npos)
                throw InvalidConfig("config line " + std::to_string(line_no) +
                                    ": expected `key = value`");
            std::string key(trim(sv.substr(0, eq)));
            std::string value(trim(sv.substr(eq + 1)));
            if (key.empty())
                throw InvalidConfig("config line " + std::to_string(line_no) + ": empty key");
            cfg.entries.emplace_back(std::move(key), std::move(value));
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open config file: " + path);
        return parse(in);
    }

    bool has(std::string_view key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return true;
        return false;
    }

    // Last occurrence wins for scalar keys.
    std::optional<std::string> get(std::string_view key) const {
        std::optional<std::string> out;
        for (const auto& [k, v] : entries)
            if (k == key) out = v;
        return out;
    }

    std::vector<std::string> get_all(std::string_view key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries)
            if (k == key) out.push_back(v);
        return out;
    }

    double get_double(std::string_view key, double fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        auto d = try_parse_double(*v);
        if (!d) throw InvalidConfig("config key " + std::string(key) + ": not a number: " + *v);
        return *d;
    }

    long long get_int(std::string_view key, long long fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        auto d = try_parse_int(*v);
        if (!d) throw InvalidConfig("config key " + std::string(key) + ": not an integer: " + *v);
        return *d;
    }

    std::uint64_t get_seed(std::string_view key, std::uint64_t fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        auto d = try_parse_int(*v);
        if (!d || *d < 0)
            throw InvalidConfig("config key " + std::string(key) + ": not a seed: " + *v);
        return static_cast<std::uint64_t>(*d);
    }

    bool get_bool(std::string_view key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw InvalidConfig("config key " + std::string(key) + ": not a boolean: " + *v);
    }
};

inline std::vector<std::string> split_list(std::string_view value, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        auto end = value.find(sep, start);
        if (end == std::string_view::npos) end = value.size();
        std::string_view piece = trim(value.substr(start, end - start));
        if (!piece.empty()) out.emplace_back(piece);
        start = end + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Planted-rule grammar
// ---------------------------------------------------------------------------

namespace detail {

// One antecedent atom: `P3=3` (categorical raw value), `S5=MISSING`
// (categorical sentinel), or `R9=[120,180)` (numeric half-open interval).
inline Condition parse_condition(std::string_view text, const FeatureSchema& schema) {
    auto eq = text.find('=');
    if (eq == std::string_view::npos)
        throw InvalidConfig("rule condition needs `FEATURE=value`: " + std::string(text));
    std::string code(trim(text.substr(0, eq)));
    std::string value(trim(text.substr(eq + 1)));
    auto idx = schema.index_of_code(code);
    if (!idx) idx = schema.index_of_name(code);
    if (!idx) throw InvalidConfig("rule condition: unknown feature " + code);

    Condition c;
    c.feature = *idx;
    c.categorical = schema.at(*idx).kind == FeatureKind::Categorical;
    if (c.categorical) {
        if (value.empty()) throw InvalidConfig("rule condition: empty value for " + code);
        c.raw = value == "MISSING" ? std::string() : value;
        return c;
    }
    if (value.size() < 5 || value.front() != '[' || value.back() != ')')
        throw InvalidConfig("numeric rule condition needs `[lo,hi)`: " + std::string(text));
    auto comma = value.find(',');
    if (comma == std::string::npos)
        throw InvalidConfig("numeric rule condition needs `[lo,hi)`: " + std::string(text));
    auto lo = try_parse_double(std::string_view(value).substr(1, comma - 1));
    auto hi = try_parse_double(std::string_view(value).substr(comma + 1,
                                                             value.size() - comma - 2));
    if (!lo || !hi) throw InvalidConfig("numeric rule condition: bad bounds in " + value);
    c.lo = *lo;
    c.hi = *hi;
    return c;
}

}  // namespace detail

// Full rule line: `NAH x2.45 P3=3` or `NS x5.0 S2=39 & C7=1`.
inline PlantedRule parse_planted_rule(std::string_view text, const FeatureSchema& schema) {
    std::istringstream in{std::string(text)};
    std::string type_tok, mult_tok;
    if (!(in >> type_tok >> mult_tok))
        throw InvalidConfig("rule needs `TYPE xMULT CONDITIONS`: " + std::string(text));
    auto outcome = outcome_from_token(type_tok);
    if (!outcome || !is_failure(*outcome))
        throw InvalidConfig("rule: unknown failure type " + type_tok);
    if (mult_tok.size() < 2 || mult_tok[0] != 'x')
        throw InvalidConfig("rule: multiplier must look like x2.45, got " + mult_tok);
    auto mult = try_parse_double(std::string_view(mult_tok).substr(1));
    if (!mult || !(*mult > 0.0)) throw InvalidConfig("rule: bad multiplier " + mult_tok);

    std::string rest;
    std::getline(in, rest);
    PlantedRule rule;
    rule.target = *outcome;
    rule.multiplier = *mult;
    for (const auto& piece : split_list(rest, '&'))
        rule.antecedent.push_back(detail::parse_condition(piece, schema));
    if (rule.antecedent.empty() || rule.antecedent.size() > 2)
        throw InvalidConfig("rule needs 1 or 2 conditions: " + std::string(text));
    return rule;
}

// ---------------------------------------------------------------------------
// Generator config from file
// ---------------------------------------------------------------------------

// Builds a GeneratorConfig starting from the builtin defaults and applying
// overrides.  Recognized keys:
//   n_stops, seed, base_rate.<TYPE>,
//   feature.<CODE>.categorical = raw:weight, raw:weight, ...   (MISSING:w ok)
//   feature.<CODE>.numeric     = lo, hi
//   feature.<CODE>.integer     = true|false
//   feature.<CODE>.missing_p   = p
//   rule = TYPE xMULT COND [& COND]
inline GeneratorConfig generator_config_from(const ConfigFile& file,
                                             const FeatureSchema& schema = builtin_schema()) {
    GeneratorConfig cfg = default_generator_config(
        static_cast<std::size_t>(file.get_int("n_stops", 10000)), file.get_seed("seed", 0));

    for (const auto& [key, value] : file.entries) {
        if (key == "n_stops" || key == "seed" || key == "rule") continue;
        if (key.rfind("base_rate.", 0) == 0) {
            auto outcome = outcome_from_token(key.substr(10));
            if (!outcome || !is_failure(*outcome))
                throw InvalidConfig("config: unknown failure type in " + key);
            auto rate = try_parse_double(value);
            if (!rate) throw InvalidConfig("config: bad base rate in " + key);
            cfg.base_rates[*outcome] = *rate;
            continue;
        }
        if (key.rfind("feature.", 0) == 0) {
            auto rest = std::string_view(key).substr(8);
            auto dot = rest.find('.');
            if (dot == std::string_view::npos)
                throw InvalidConfig("config: feature key needs `feature.CODE.attr`: " + key);
            std::string code(rest.substr(0, dot));
            std::string attr(rest.substr(dot + 1));
            auto idx = schema.index_of_code(code);
            if (!idx) idx = schema.index_of_name(code);
            if (!idx) throw InvalidConfig("config: unknown feature " + code);
            auto& dist = cfg.features[*idx];
            if (attr == "categorical") {
                dist.levels.clear();
                for (const auto& piece : split_list(value)) {
                    auto colon = piece.rfind(':');
                    if (colon == std::string::npos)
                        throw InvalidConfig("config: level needs `raw:weight`: " + piece);
                    std::string raw(trim(std::string_view(piece).substr(0, colon)));
                    auto w = try_parse_double(std::string_view(piece).substr(colon + 1));
                    if (!w || *w < 0.0) throw InvalidConfig("config: bad level weight: " + piece);
                    dist.levels.push_back({raw == "MISSING" ? std::string() : raw, *w});
                }
            } else if (attr == "numeric") {
                auto parts = split_list(value);
                if (parts.size() != 2)
                    throw InvalidConfig("config: numeric range needs `lo, hi`: " + key);
                auto lo = try_parse_double(parts[0]);
                auto hi = try_parse_double(parts[1]);
                if (!lo || !hi) throw InvalidConfig("config: bad numeric range in " + key);
                dist.levels.clear();
                dist.lo = *lo;
                dist.hi = *hi;
            } else if (attr == "integer") {
                dist.integer = value == "true" || value == "1" || value == "yes";
            } else if (attr == "missing_p") {
                auto p = try_parse_double(value);
                if (!p || *p < 0.0 || *p > 1.0)
                    throw InvalidConfig("config: bad missing probability in " + key);
                dist.missing_p = *p;
            } else {
                throw InvalidConfig("config: unknown feature attribute " + attr);
            }
            continue;
        }
        throw InvalidConfig("config: unknown key " + key);
    }

    for (const auto& line : file.get_all("rule"))
        cfg.planted.push_back(parse_planted_rule(line, schema));
    validate_config(cfg, schema);
    return cfg;
}

}  // namespace lastmile
