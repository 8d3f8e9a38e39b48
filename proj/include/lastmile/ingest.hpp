#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"
#include "lastmile/rng.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// parse_csv: read a service-level CSV and normalize numeric cells
// ---------------------------------------------------------------------------

// Reads the raw service table.  The header must contain stop_id, outcome and
// one column per schema feature (extra columns are tolerated and ignored
// downstream).  Cells in numeric columns that do not parse as numbers are
// normalized to the empty string, the table-level missing mark.
inline RawTable parse_csv(const std::string& path, const FeatureSchema& schema) {
    RawTable t = read_csv_file(path);
    t.require_column("stop_id");
    t.require_column("outcome");
    std::vector<std::size_t> numeric_cols;
    for (const auto& spec : schema.specs()) {
        std::size_t col = t.require_column(spec.name);
        if (spec.kind == FeatureKind::Numerical) numeric_cols.push_back(col);
    }
    for (auto& row : t.rows)
        for (std::size_t col : numeric_cols)
            if (!row[col].empty() && !try_parse_double(row[col])) row[col].clear();
    return t;
}

// ---------------------------------------------------------------------------
// deduplicate: drop exact-duplicate rows, keep first occurrence
// ---------------------------------------------------------------------------

inline RawTable deduplicate(const RawTable& table) {
    RawTable out;
    out.header = table.header;
    std::unordered_set<std::string> seen;
    std::string key;
    for (const auto& row : table.rows) {
        key.clear();
        for (const auto& cell : row) {
            key += cell;
            key += '\x1f';  // unit separator; cannot appear via CSV parsing of sane input
        }
        if (seen.insert(key).second) out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// impute_and_encode: strings -> numeric matrix with -100 for missing
// ---------------------------------------------------------------------------

// Produces the service-level Dataset: one row per service record, columns in
// schema order.  Missing cells become the -100 sentinel; categorical raw
// values get dense codes in first-occurrence order (scanning rows top to
// bottom, columns left to right).
inline std::pair<Dataset, EncodingMap> impute_and_encode(const RawTable& table,
                                                         const FeatureSchema& schema) {
    Dataset services;
    services.schema = schema;
    EncodingMap enc;

    const std::size_t stop_col = table.require_column("stop_id");
    const std::size_t outcome_col = table.require_column("outcome");
    std::vector<std::size_t> feature_cols(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f)
        feature_cols[f] = table.require_column(schema.at(f).name);

    std::vector<double> row_values(schema.size());
    for (const auto& row : table.rows) {
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const std::string& cell = row[feature_cols[f]];
            if (trim(cell).empty()) {
                row_values[f] = kMissingSentinel;
            } else if (schema.at(f).kind == FeatureKind::Numerical) {
                auto v = try_parse_double(cell);
                row_values[f] = v ? *v : kMissingSentinel;
            } else {
                row_values[f] = enc.encode(f, std::string(trim(cell)));
            }
        }
        auto outcome = outcome_from_token(trim(row[outcome_col]));
        if (!outcome)
            throw DataError("unknown outcome token: '" + row[outcome_col] + "'");
        services.append_row(std::string(trim(row[stop_col])), row_values, *outcome);
    }
    services.encoding = enc;
    return {std::move(services), std::move(enc)};
}

// ---------------------------------------------------------------------------
// aggregate_services: service records -> one master service per stop
// ---------------------------------------------------------------------------

namespace detail {

// Most frequent value; ties go to the smallest value so aggregation is
// deterministic regardless of service order.
inline double mode_value(const std::vector<double>& vals) {
    std::map<double, std::size_t> counts;
    for (double v : vals) ++counts[v];
    double best = vals.front();
    std::size_t best_n = 0;
    for (const auto& [v, n] : counts)
        if (n > best_n) {  // map iterates ascending, so first max wins = smallest value
            best = v;
            best_n = n;
        }
    return best;
}

inline Outcome mode_outcome(const std::vector<Outcome>& vals) {
    std::size_t counts[kOutcomeCount] = {};
    for (Outcome o : vals) ++counts[static_cast<int>(o)];
    int best = 0;
    for (int i = 1; i < kOutcomeCount; ++i)
        if (counts[i] > counts[best]) best = i;
    return static_cast<Outcome>(best);
}

}  // namespace detail

// Collapses the service-level table to one row per distinct stop_id (order of
// first occurrence).  Stop-level features must agree within a stop; service
// features aggregate as mode (categorical) or sum (numerical); the outcome is
// the most frequent outcome among the stop's services, Success included.
inline Dataset aggregate_services(const Dataset& services) {
    const FeatureSchema& schema = services.schema;
    Dataset stops;
    stops.schema = schema;
    stops.encoding = services.encoding;

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < services.n_rows(); ++r) {
        auto [it, fresh] = groups.try_emplace(services.stop_ids[r]);
        if (fresh) order.push_back(services.stop_ids[r]);
        it->second.push_back(r);
    }

    std::vector<double> master(schema.size());
    std::vector<double> col;
    std::vector<Outcome> outcomes;
    for (const auto& stop_id : order) {
        const auto& rows = groups[stop_id];
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const FeatureSpec& spec = schema.at(f);
            if (!spec.service_level) {
                double v = services.at(rows[0], f);
                for (std::size_t r : rows)
                    if (services.at(r, f) != v) throw InconsistentStopFeatures(stop_id);
                master[f] = v;
            } else if (spec.kind == FeatureKind::Categorical) {
                col.clear();
                for (std::size_t r : rows) col.push_back(services.at(r, f));
                master[f] = detail::mode_value(col);
            } else {
                double sum = 0;
                for (std::size_t r : rows) sum += services.at(r, f);
                master[f] = sum;
            }
        }
        outcomes.clear();
        for (std::size_t r : rows) outcomes.push_back(services.labels[r]);
        stops.append_row(stop_id, master, detail::mode_outcome(outcomes));
    }
    return stops;
}

// ---------------------------------------------------------------------------
// split_train_test: stratified deterministic split
// ---------------------------------------------------------------------------

namespace detail {

inline Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.schema = data.schema;
    out.encoding = data.encoding;
    for (std::size_t r : rows) out.append_row(data.stop_ids[r], data.row(r), data.labels[r]);
    return out;
}

}  // namespace detail

// Stratified split: within each outcome class the rows are shuffled by a
// seed-derived stream and the first round(ratio * n) go to train, so every
// class keeps its prevalence within one row on both sides.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double ratio,
                                                    std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw InvalidConfig("train ratio must be in (0, 1), got " + format_double(ratio));
    if (data.n_rows() == 0) throw EmptyClass("cannot split an empty dataset");

    std::vector<std::size_t> train_rows, test_rows;
    for (int tag = 0; tag < kOutcomeCount; ++tag) {
        std::vector<std::size_t> stratum;
        for (std::size_t r = 0; r < data.n_rows(); ++r)
            if (static_cast<int>(data.labels[r]) == tag) stratum.push_back(r);
        if (stratum.empty()) continue;
        Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(tag)));
        rng.shuffle(stratum);
        auto n_train = static_cast<std::size_t>(
            std::llround(ratio * static_cast<double>(stratum.size())));
        n_train = std::min(n_train, stratum.size());
        train_rows.insert(train_rows.end(), stratum.begin(), stratum.begin() + n_train);
        test_rows.insert(test_rows.end(), stratum.begin() + n_train, stratum.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {detail::take_rows(data, train_rows), detail::take_rows(data, test_rows)};
}

// ---------------------------------------------------------------------------
// ingest_file: the full raw-CSV -> per-stop Dataset path
// ---------------------------------------------------------------------------

inline Dataset ingest_file(const std::string& path, const FeatureSchema& schema) {
    RawTable raw = parse_csv(path, schema);
    RawTable unique = deduplicate(raw);
    auto [services, enc] = impute_and_encode(unique, schema);
    return aggregate_services(services);
}

}  // namespace lastmile
