#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/forest.hpp"
#include "lastmile/resample.hpp"
#include "lastmile/rng.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::uint64_t tp = 0, fn = 0, tn = 0, fp = 0;

    void add(bool actual_positive, bool predicted_positive) {
        if (actual_positive) (predicted_positive ? tp : fn) += 1;
        else (predicted_positive ? fp : tn) += 1;
    }
};

struct Metrics {
    double sensitivity = 0.0;  // tp / (tp + fn)
    double specificity = 0.0;  // tn / (tn + fp)
};

inline Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0)
        throw UndefinedMetric("sensitivity undefined: no positive rows evaluated");
    if (cm.tn + cm.fp == 0)
        throw UndefinedMetric("specificity undefined: no negative rows evaluated");
    return {static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn),
            static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp)};
}

// ---------------------------------------------------------------------------
// Fold assignment
// ---------------------------------------------------------------------------

// Stratified fold ids plus a canonical per-row ordering key.  Both derive
// from (seed, stop_id) only, so shuffling the dataset's rows changes neither
// fold membership nor the canonical training order: evaluation results are
// invariant under row permutation (up to duplicate stop ids).
struct FoldAssignment {
    std::vector<int> fold;            // per row
    std::vector<std::uint64_t> key;   // per row, the hash used for ordering
};

inline FoldAssignment assign_folds(const Dataset& data, int k, std::uint64_t seed) {
    if (k < 2) throw InvalidConfig("cross-validation needs k >= 2");
    FoldAssignment out;
    out.fold.assign(data.n_rows(), -1);
    out.key.resize(data.n_rows());
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        out.key[r] = detail::fnv1a(derive_seed(seed, "fold"), data.stop_ids[r]);

    // Deal each outcome class round-robin in key order: every class lands
    // within one row of even across folds.
    for (int tag = 0; tag < kOutcomeCount; ++tag) {
        std::vector<std::size_t> stratum;
        for (std::size_t r = 0; r < data.n_rows(); ++r)
            if (static_cast<int>(data.labels[r]) == tag) stratum.push_back(r);
        std::sort(stratum.begin(), stratum.end(), [&](std::size_t a, std::size_t b) {
            if (out.key[a] != out.key[b]) return out.key[a] < out.key[b];
            return data.stop_ids[a] < data.stop_ids[b];
        });
        for (std::size_t i = 0; i < stratum.size(); ++i)
            out.fold[stratum[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct FoldResult {
    ConfusionMatrix cm;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

struct EvalCell {
    Outcome type = Outcome::NotAtHome;
    ResampleKind method = ResampleKind::None;
    std::vector<FoldResult> folds;
    double mean_sensitivity = 0.0;
    double mean_specificity = 0.0;
};

namespace detail {

// Binary view of selected dataset rows, keeping original row positions as
// row ids (so leakage against an evaluation fold is checkable by id).
inline BinaryDataset binarize_rows(const Dataset& data, const std::vector<std::size_t>& rows,
                                   Outcome type) {
    BinaryDataset out;
    out.width = data.width();
    out.values.reserve(rows.size() * data.width());
    for (std::size_t r : rows)
        out.append_row(data.row(r), data.labels[r] == type ? 1 : 0,
                       static_cast<std::uint32_t>(r));
    return out;
}

}  // namespace detail

// Stratified k-fold cross-validation of one (failure type, resampling
// method) cell: per fold, the training portion alone is resampled, a forest
// is fitted, and the untouched held-out fold is scored.  All randomness
// derives from (seed, type, method, fold).
inline EvalCell kfold_cv(const Dataset& data, Outcome type, ResampleMethod method,
                         ForestConfig forest_cfg, int k, std::uint64_t seed) {
    if (!is_failure(type)) throw UsageError("kfold_cv requires a failure outcome");
    const std::size_t positives = data.count(type);
    if (positives < static_cast<std::size_t>(k) ||
        data.n_rows() - positives < static_cast<std::size_t>(k))
        throw EmptyClass("kfold_cv needs at least k rows of each class");

    const FoldAssignment folds = assign_folds(data, k, seed);
    const auto type_idx = static_cast<std::uint64_t>(type);
    const auto method_idx = static_cast<std::uint64_t>(method.kind);

    EvalCell cell;
    cell.type = type;
    cell.method = method.kind;
    for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> train_rows, eval_rows;
        for (std::size_t r = 0; r < data.n_rows(); ++r)
            (folds.fold[r] == f ? eval_rows : train_rows).push_back(r);
        // Canonical, permutation-invariant training order.
        std::sort(train_rows.begin(), train_rows.end(), [&](std::size_t a, std::size_t b) {
            if (folds.key[a] != folds.key[b]) return folds.key[a] < folds.key[b];
            return data.stop_ids[a] < data.stop_ids[b];
        });

        BinaryDataset train = detail::binarize_rows(data, train_rows, type);
        const std::uint64_t cell_seed =
            derive_seed(seed, "cell", type_idx, method_idx, static_cast<std::uint64_t>(f));
        BinaryDataset resampled = apply_resample(train, method, derive_seed(cell_seed, "resample"));

        ForestConfig cfg = forest_cfg;
        cfg.seed = derive_seed(cell_seed, "forest");
        cfg.compute_oob = false;
        RandomForest forest = fit_forest(resampled, cfg);

        FoldResult fr;
        for (std::size_t r : eval_rows)
            fr.cm.add(data.labels[r] == type, predict(forest, data.row(r)).positive);
        Metrics m = metrics(fr.cm);
        fr.sensitivity = m.sensitivity;
        fr.specificity = m.specificity;
        cell.folds.push_back(fr);
        cell.mean_sensitivity += m.sensitivity;
        cell.mean_specificity += m.specificity;
    }
    cell.mean_sensitivity /= static_cast<double>(k);
    cell.mean_specificity /= static_cast<double>(k);
    return cell;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct EvalReport {
    std::vector<EvalCell> cells;  // (type-major, method-minor) order

    // Grand averages over failure types for one method (the Fig-style
    // four-row summary is built from these).
    Metrics method_average(ResampleKind method) const {
        double sens = 0.0, spec = 0.0;
        std::size_t n = 0;
        for (const auto& c : cells)
            if (c.method == method) {
                sens += c.mean_sensitivity;
                spec += c.mean_specificity;
                ++n;
            }
        if (n == 0) throw UndefinedMetric("no cells evaluated for method");
        return {sens / static_cast<double>(n), spec / static_cast<double>(n)};
    }
};

inline EvalReport evaluate_all(const Dataset& data, const std::vector<Outcome>& types,
                               const std::vector<ResampleMethod>& methods,
                               const ForestConfig& forest_cfg, int k, std::uint64_t seed) {
    EvalReport report;
    for (Outcome type : types)
        for (const ResampleMethod& method : methods)
            report.cells.push_back(kfold_cv(data, type, method, forest_cfg, k, seed));
    return report;
}

}  // namespace lastmile
