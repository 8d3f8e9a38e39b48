#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lastmile/config.hpp"
#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"
#include "lastmile/eval.hpp"
#include "lastmile/forest.hpp"
#include "lastmile/ingest.hpp"
#include "lastmile/resample.hpp"
#include "lastmile/rules.hpp"
#include "lastmile/synth.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string input;         // ingest CSV path; exclusive with synth_config
    std::string synth_config;  // generator config path
    std::vector<Outcome> types = failure_types();
    std::vector<ResampleMethod> methods{ResampleMethod::none(), ResampleMethod::random_under(),
                                        ResampleMethod::nearmiss3(), ResampleMethod::smote()};
    ResampleMethod final_method = ResampleMethod::random_under();
    double train_ratio = 0.8;
    int folds = 5;
    ForestConfig forest;
    bool run_grid = false;
    GridSearchSpace grid;
    MinerConfig miner;
    std::map<Outcome, MinerConfig> miner_overrides;
    std::uint64_t seed = 0;
    std::string out_dir;

    // Per-type miner parameters: the base config, plus the NS default
    // override (tighter min_IR / delta_IR), plus explicit per-type keys.
    MinerConfig miner_for(Outcome type) const {
        auto it = miner_overrides.find(type);
        if (it != miner_overrides.end()) return it->second;
        return miner;
    }

    void validate() const {
        if (types.empty()) throw InvalidConfig("at least one failure type required");
        if (input.empty() == synth_config.empty())
            throw InvalidConfig("exactly one of `input` and `synth_config` must be set");
        if (!(train_ratio > 0.0 && train_ratio < 1.0))
            throw InvalidConfig("train_ratio must be in (0, 1)");
        if (folds < 2) throw InvalidConfig("folds must be >= 2");
        forest.validate();
        miner.validate();
        for (const auto& [t, m] : miner_overrides) m.validate();
    }
};

namespace detail {

inline Outcome parse_failure_token(const std::string& token) {
    auto o = outcome_from_token(token);
    if (!o || !is_failure(*o)) throw InvalidConfig("unknown failure type: " + token);
    return *o;
}

inline ResampleMethod parse_method_token(const std::string& token) {
    auto kind = resample_from_name(token);
    if (!kind) throw InvalidConfig("unknown resampling method: " + token);
    switch (*kind) {
        case ResampleKind::None: return ResampleMethod::none();
        case ResampleKind::RandomUnder: return ResampleMethod::random_under();
        case ResampleKind::NearMiss3: return ResampleMethod::nearmiss3();
        case ResampleKind::Smote: return ResampleMethod::smote();
    }
    throw InternalError("invalid resample kind");
}

inline double parse_config_double(const std::string& key, const std::string& value) {
    auto d = try_parse_double(value);
    if (!d) throw InvalidConfig("config key " + key + ": not a number: " + value);
    return *d;
}

inline int parse_config_int(const std::string& key, const std::string& value) {
    auto d = try_parse_int(value);
    if (!d) throw InvalidConfig("config key " + key + ": not an integer: " + value);
    return static_cast<int>(*d);
}

inline void apply_miner_key(MinerConfig& m, const std::string& attr, const std::string& value) {
    if (attr == "s") m.s = parse_config_double("miner s", value);
    else if (attr == "min_ir") m.min_ir = parse_config_double("miner min_ir", value);
    else if (attr == "delta_ir") m.delta_ir = parse_config_double("miner delta_ir", value);
    else if (attr == "parent_scope") {
        if (value == "selected") m.parent_scope = ParentScope::Selected;
        else if (value == "all") m.parent_scope = ParentScope::All;
        else throw InvalidConfig("miner parent_scope must be `selected` or `all`");
    } else {
        throw InvalidConfig("unknown miner attribute: " + attr);
    }
}

}  // namespace detail

// Builds a RunConfig from a parsed config file.  Recognized keys:
//   input, synth_config, types, methods, final_method, train_ratio, folds,
//   seed, out,
//   forest.{n_estimators,max_depth,criterion,max_features,
//           min_samples_split,min_samples_leaf,oob},
//   grid_search, grid.{n_estimators,max_depth,criteria},
//   miner.{s,min_ir,delta_ir,parent_scope} and per-type
//   miner.<TYPE>.{s,min_ir,delta_ir,parent_scope}.
inline RunConfig run_config_from(const ConfigFile& file) {
    RunConfig cfg;
    cfg.input = file.get("input").value_or("");
    cfg.synth_config = file.get("synth_config").value_or("");
    cfg.train_ratio = file.get_double("train_ratio", cfg.train_ratio);
    cfg.folds = static_cast<int>(file.get_int("folds", cfg.folds));
    cfg.seed = file.get_seed("seed", cfg.seed);
    cfg.out_dir = file.get("out").value_or("");

    if (auto v = file.get("types")) {
        cfg.types.clear();
        for (const auto& tok : split_list(*v)) cfg.types.push_back(detail::parse_failure_token(tok));
    }
    if (auto v = file.get("methods")) {
        cfg.methods.clear();
        for (const auto& tok : split_list(*v)) cfg.methods.push_back(detail::parse_method_token(tok));
    }
    if (auto v = file.get("final_method")) cfg.final_method = detail::parse_method_token(*v);

    cfg.forest.n_estimators = static_cast<int>(file.get_int("forest.n_estimators", 100));
    cfg.forest.max_depth = static_cast<int>(file.get_int("forest.max_depth", 6));
    if (auto v = file.get("forest.criterion")) {
        auto c = criterion_from_name(*v);
        if (!c) throw InvalidConfig("unknown criterion: " + *v);
        cfg.forest.criterion = *c;
    }
    cfg.forest.max_features = static_cast<int>(file.get_int("forest.max_features", 0));
    cfg.forest.min_samples_split = static_cast<int>(file.get_int("forest.min_samples_split", 10));
    cfg.forest.min_samples_leaf = static_cast<int>(file.get_int("forest.min_samples_leaf", 5));
    cfg.forest.compute_oob = file.get_bool("forest.oob", true);

    cfg.run_grid = file.get_bool("grid_search", false);
    if (auto v = file.get("grid.n_estimators")) {
        cfg.grid.n_estimators.clear();
        for (const auto& tok : split_list(*v))
            cfg.grid.n_estimators.push_back(detail::parse_config_int("grid.n_estimators", tok));
    }
    if (auto v = file.get("grid.max_depth")) {
        cfg.grid.max_depth.clear();
        for (const auto& tok : split_list(*v))
            cfg.grid.max_depth.push_back(detail::parse_config_int("grid.max_depth", tok));
    }
    if (auto v = file.get("grid.criteria")) {
        cfg.grid.criteria.clear();
        for (const auto& tok : split_list(*v)) {
            auto c = criterion_from_name(tok);
            if (!c) throw InvalidConfig("unknown criterion in grid: " + tok);
            cfg.grid.criteria.push_back(*c);
        }
    }

    // Base miner keys first, then the NS default tightening, then explicit
    // per-type keys (which can also loosen NS back).
    for (const auto& [key, value] : file.entries) {
        if (key.rfind("miner.", 0) != 0) continue;
        auto rest = key.substr(6);
        if (rest.find('.') == std::string::npos) detail::apply_miner_key(cfg.miner, rest, value);
    }
    for (Outcome t : failure_types()) cfg.miner_overrides[t] = cfg.miner;
    cfg.miner_overrides[Outcome::NoSpaceForService].min_ir = std::max(cfg.miner.min_ir, 1.9);
    cfg.miner_overrides[Outcome::NoSpaceForService].delta_ir = std::max(cfg.miner.delta_ir, 0.5);
    for (const auto& [key, value] : file.entries) {
        if (key.rfind("miner.", 0) != 0) continue;
        auto rest = key.substr(6);
        auto dot = rest.find('.');
        if (dot == std::string::npos) continue;
        Outcome type = detail::parse_failure_token(rest.substr(0, dot));
        detail::apply_miner_key(cfg.miner_overrides[type], rest.substr(dot + 1), value);
    }

    static const char* known[] = {"input", "synth_config", "types", "methods", "final_method",
                                  "train_ratio", "folds", "seed", "out", "grid_search"};
    for (const auto& [key, value] : file.entries) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        ok = ok || key.rfind("forest.", 0) == 0 || key.rfind("grid.", 0) == 0 ||
             key.rfind("miner.", 0) == 0;
        if (!ok) throw InvalidConfig("config: unknown key " + key);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Artifact writing helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for hashing: " + path.string());
    std::uint64_t h = kFnvOffset;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= kFnvPrime;
        }
        if (!in) break;
    }
    return h;
}

inline std::uint64_t hash_dataset(const Dataset& data) {
    std::uint64_t h = kFnvOffset;
    for (const auto& id : data.stop_ids) h = fnv1a(h, id);
    for (double v : data.values) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        __builtin_memcpy(&bits, &v, sizeof bits);
        h = fnv1a(h, bits);
    }
    for (Outcome o : data.labels) h = fnv1a(h, static_cast<std::uint64_t>(o));
    return h;
}

// Renders a dataset in the ingest CSV format.  Categorical codes are decoded
// back to raw strings; missing sentinels (and categorical codes without a
// registered raw value) become empty cells.
inline std::string dataset_to_ingest_csv(const Dataset& data) {
    std::ostringstream out;
    std::vector<std::string> fields;
    fields.emplace_back("stop_id");
    fields.emplace_back("outcome");
    for (const auto& spec : data.schema.specs()) fields.push_back(spec.name);
    write_csv_row(out, fields);
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        fields.clear();
        fields.push_back(data.stop_ids[r]);
        fields.emplace_back(outcome_token(data.labels[r]));
        for (std::size_t f = 0; f < data.width(); ++f) {
            const double v = data.at(r, f);
            if (v == kMissingSentinel) {
                fields.emplace_back();
            } else if (data.schema.at(f).kind == FeatureKind::Categorical) {
                fields.push_back(data.encoding.decode(f, static_cast<int>(std::llround(v))));
            } else {
                fields.push_back(format_double(v));
            }
        }
        write_csv_row(out, fields);
    }
    return out.str();
}

// Encoded numeric stop table (the matrix the models actually see).
inline std::string dataset_to_stops_csv(const Dataset& data) {
    std::ostringstream out;
    std::vector<std::string> fields;
    fields.emplace_back("stop_id");
    fields.emplace_back("outcome");
    for (const auto& spec : data.schema.specs()) fields.push_back(spec.name);
    write_csv_row(out, fields);
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        fields.clear();
        fields.push_back(data.stop_ids[r]);
        fields.emplace_back(outcome_token(data.labels[r]));
        for (std::size_t f = 0; f < data.width(); ++f)
            fields.push_back(format_double(data.at(r, f)));
        write_csv_row(out, fields);
    }
    return out.str();
}

inline std::string encoding_to_csv(const Dataset& data) {
    std::ostringstream out;
    write_csv_row(out, {"feature_code", "feature_name", "code", "raw"});
    for (const auto& [f, raws] : data.encoding.entries())
        for (std::size_t code = 0; code < raws.size(); ++code)
            write_csv_row(out, {data.schema.at(f).code, data.schema.at(f).name,
                                std::to_string(code), raws[code]});
    return out.str();
}

inline std::string bins_to_csv(const DecileBinner& binner, const FeatureSchema& schema) {
    std::ostringstream out;
    write_csv_row(out, {"feature_code", "feature_name", "bin", "label"});
    for (std::size_t f = 0; f < binner.width(); ++f) {
        if (binner.categorical(f)) continue;
        for (int b = 1; b <= binner.n_bins(f); ++b)
            write_csv_row(out, {schema.at(f).code, schema.at(f).name, std::to_string(b),
                                binner.bin_label(f, b)});
    }
    return out.str();
}

inline std::string metrics_to_csv(const EvalReport& report) {
    std::ostringstream out;
    write_csv_row(out, {"failure_type", "method", "fold", "sensitivity", "specificity"});
    for (const auto& cell : report.cells)
        for (std::size_t f = 0; f < cell.folds.size(); ++f)
            write_csv_row(out, {std::string(outcome_token(cell.type)),
                                resample_name(cell.method), std::to_string(f),
                                format_double(cell.folds[f].sensitivity),
                                format_double(cell.folds[f].specificity)});
    return out.str();
}

inline std::string summary_text(const EvalReport& report,
                                const std::vector<ResampleMethod>& methods) {
    std::ostringstream out;
    out << "Average performance over failure types (cross-validated)\n";
    out << "method          sensitivity  specificity\n";
    for (const auto& m : methods) {
        Metrics avg = report.method_average(m.kind);
        std::string name = resample_name(m.kind);
        out << name << std::string(name.size() < 16 ? 16 - name.size() : 1, ' ')
            << format_fixed(avg.sensitivity, 2) << "         " << format_fixed(avg.specificity, 2)
            << "\n";
    }
    return out.str();
}

inline std::string importance_to_csv(const RandomForest& forest, const FeatureSchema& schema) {
    std::ostringstream out;
    write_csv_row(out, {"rank", "feature_code", "feature_name", "importance"});
    std::vector<std::size_t> order(forest.importances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (forest.importances[a] != forest.importances[b])
            return forest.importances[a] > forest.importances[b];
        return a < b;
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        write_csv_row(out, {std::to_string(rank + 1), schema.at(order[rank]).code,
                            schema.at(order[rank]).name,
                            format_double(forest.importances[order[rank]])});
    return out.str();
}

inline std::string rules_to_csv(const std::vector<RenderedRule>& rows) {
    std::ostringstream out;
    write_csv_row(out, {"id", "depth", "antecedent", "consequent", "sup_f", "sup_c", "phi", "ir",
                        "confidence", "sign"});
    for (const auto& r : rows)
        write_csv_row(out, {std::to_string(r.id), std::to_string(r.depth), r.tokens, r.consequent,
                            std::to_string(r.sup_f), std::to_string(r.sup_c), format_double(r.phi),
                            format_double(r.ir), format_double(r.confidence),
                            r.increases ? "increases" : "decreases"});
    return out.str();
}

// Longitude/latitude of each training row as seen by each resampling method
// (the data behind map-style plots of resampled training sets).
inline std::string coords_to_csv(const BinaryDataset& train,
                                 const std::vector<ResampleMethod>& methods,
                                 const FeatureSchema& schema, std::uint64_t seed) {
    const auto lon = schema.index_of_code("C1");
    const auto lat = schema.index_of_code("C2");
    if (!lon || !lat) throw InternalError("builtin schema misses coordinate features");
    std::ostringstream out;
    write_csv_row(out, {"method", "longitude", "latitude", "label"});
    for (const auto& m : methods) {
        BinaryDataset resampled =
            apply_resample(train, m, derive_seed(seed, "coords", static_cast<std::uint64_t>(m.kind)));
        for (std::size_t r = 0; r < resampled.n_rows(); ++r)
            write_csv_row(out, {resample_name(m.kind), format_double(resampled.at(r, *lon)),
                                format_double(resampled.at(r, *lat)),
                                resampled.labels[r] ? "1" : "0"});
    }
    return out.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Corpus loading
// ---------------------------------------------------------------------------

struct LoadedCorpus {
    Dataset stops;
    std::string source;        // description for the manifest
    std::uint64_t source_hash = 0;
};

// Resolves the run's corpus: either ingest an existing CSV or generate one
// from a generator config (written to the output directory first and then
// ingested, so the synthetic path exercises the same parser).
inline LoadedCorpus load_corpus(const RunConfig& cfg) {
    LoadedCorpus out;
    if (!cfg.input.empty()) {
        out.stops = ingest_file(cfg.input, builtin_schema());
        out.source = cfg.input;
        out.source_hash = detail::hash_file(cfg.input);
        return out;
    }
    GeneratorConfig gen = generator_config_from(ConfigFile::parse_file(cfg.synth_config));
    Dataset raw = generate(gen);
    const std::string csv = detail::dataset_to_ingest_csv(raw);
    if (!cfg.out_dir.empty()) {
        const auto path = std::filesystem::path(cfg.out_dir) / "dataset.csv";
        detail::write_text_file(path, csv);
        out.stops = ingest_file(path.string(), builtin_schema());
        out.source_hash = detail::hash_file(path);
    } else {
        std::istringstream in(csv);
        RawTable table = read_csv(in);
        auto [services, enc] = impute_and_encode(deduplicate(table), builtin_schema());
        out.stops = aggregate_services(services);
        out.source_hash = detail::fnv1a(detail::kFnvOffset, csv);
    }
    out.source = "synth:" + cfg.synth_config;
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

// Generator run: dataset CSV in ingest format plus a ground-truth manifest of
// the planted rules with their analytically expected phi / IR.
inline void run_synth(const ConfigFile& file, const std::string& out_dir) {
    GeneratorConfig cfg = generator_config_from(file);
    Dataset data = generate(cfg);
    std::filesystem::create_directories(out_dir);
    detail::write_text_file(std::filesystem::path(out_dir) / "dataset.csv",
                            detail::dataset_to_ingest_csv(data));

    std::ostringstream manifest;
    write_csv_row(manifest, {"target", "multiplier", "antecedent", "prevalence", "expected_phi",
                             "expected_ir"});
    const auto& schema = builtin_schema();
    for (const auto& rule : cfg.planted) {
        std::string antecedent;
        for (const auto& c : rule.antecedent) {
            if (!antecedent.empty()) antecedent += " & ";
            antecedent += schema.at(c.feature).code;
            antecedent += '=';
            if (c.categorical) antecedent += c.raw.empty() ? "MISSING" : c.raw;
            else antecedent += "[" + format_double(c.lo) + "," + format_double(c.hi) + ")";
        }
        std::string prevalence, phi, ir;
        if (rule.antecedent.size() == 1) {
            prevalence = format_double(condition_prevalence(cfg, rule.antecedent[0]));
            phi = format_double(expected_phi(cfg, rule));
            ir = format_double(expected_ir(cfg, rule));
        }
        write_csv_row(manifest, {std::string(outcome_token(rule.target)),
                                 format_double(rule.multiplier), antecedent, prevalence, phi, ir});
    }
    detail::write_text_file(std::filesystem::path(out_dir) / "planted.csv", manifest.str());
}

inline void run_synth(const std::string& config_path, const std::string& out_dir) {
    run_synth(ConfigFile::parse_file(config_path), out_dir);
}

inline void run_ingest(const std::string& input, const std::string& out_dir) {
    Dataset stops = ingest_file(input, builtin_schema());
    std::filesystem::create_directories(out_dir);
    detail::write_text_file(std::filesystem::path(out_dir) / "stops.csv",
                            detail::dataset_to_stops_csv(stops));
    detail::write_text_file(std::filesystem::path(out_dir) / "encoding.csv",
                            detail::encoding_to_csv(stops));
}

// Mining only, no classifier involved.
inline void run_mine(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    LoadedCorpus corpus = load_corpus(cfg);
    DecileBinner binner = fit_deciles(corpus.stops);
    ItemizedCorpus itemized = itemize_corpus(corpus.stops, binner);
    detail::write_text_file(std::filesystem::path(cfg.out_dir) / "decile_bins.csv",
                            detail::bins_to_csv(binner, corpus.stops.schema));
    for (Outcome type : cfg.types) {
        const std::string tok(outcome_token(type));
        try {
            MinedRules mined = mine_rules(itemized, corpus.stops.labels, type, cfg.miner_for(type));
            auto rows = render_rule_table(mined.selection, itemized.items);
            detail::write_text_file(std::filesystem::path(cfg.out_dir) / ("rules_" + tok + ".csv"),
                                    detail::rules_to_csv(rows));
            detail::write_text_file(
                std::filesystem::path(cfg.out_dir) / ("rules_" + tok + ".txt"),
                "Association rules for " + std::string(outcome_label(type)) + " (" + tok + ")\n" +
                    format_rule_table(rows, mined.n_f, mined.n_c, cfg.miner_for(type)));
        } catch (const EmptyClass&) {
            detail::write_text_file(std::filesystem::path(cfg.out_dir) / ("rules_" + tok + ".txt"),
                                    "no failed rows for " + tok + "; skipped\n");
        }
    }
}

inline void run_evaluate(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    LoadedCorpus corpus = load_corpus(cfg);
    EvalReport report = evaluate_all(corpus.stops, cfg.types, cfg.methods, cfg.forest, cfg.folds,
                                     derive_seed(cfg.seed, "eval"));
    detail::write_text_file(std::filesystem::path(cfg.out_dir) / "metrics.csv",
                            detail::metrics_to_csv(report));
    detail::write_text_file(std::filesystem::path(cfg.out_dir) / "summary.txt",
                            detail::summary_text(report, cfg.methods));
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct TypeResult {
    Outcome type = Outcome::NotAtHome;
    bool skipped = false;
    std::string skip_reason;
    RandomForest forest;     // final model, trained on the resampled train split
    ForestConfig chosen;     // after optional grid search
    Metrics holdout;         // on the untouched test split
    MinedRules mined;
};

struct PipelineResult {
    Dataset stops;
    Dataset train, test;
    EvalReport report;
    std::vector<TypeResult> types;
    std::vector<std::string> warnings;
    std::uint64_t corpus_hash = 0;
};

// End-to-end run: ingest (or generate), aggregate, cross-validate every
// (type, method) cell, train one final model per type on the resampled train
// split, mine rules on the full corpus, and emit all artifacts.  Every byte
// written is a pure function of (config, seed, input), so reruns are
// identical.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);
    const auto out_path = [&cfg](const std::string& name) {
        return std::filesystem::path(cfg.out_dir) / name;
    };

    PipelineResult result;
    LoadedCorpus corpus = load_corpus(cfg);
    result.stops = std::move(corpus.stops);
    result.corpus_hash = detail::hash_dataset(result.stops);

    auto [train, test] = split_train_test(result.stops, cfg.train_ratio,
                                          derive_seed(cfg.seed, "split"));
    result.train = std::move(train);
    result.test = std::move(test);

    // Cross-validated comparison of the resampling methods.
    for (Outcome type : cfg.types) {
        for (const auto& method : cfg.methods) {
            try {
                result.report.cells.push_back(kfold_cv(result.stops, type, method, cfg.forest,
                                                       cfg.folds, derive_seed(cfg.seed, "eval")));
            } catch (const DataError& e) {
                result.warnings.push_back("skip cv " + std::string(outcome_token(type)) + "/" +
                                          resample_name(method.kind) + ": " + e.what());
            }
        }
    }

    DecileBinner binner = fit_deciles(result.stops);
    ItemizedCorpus itemized = itemize_corpus(result.stops, binner);

    for (Outcome type : cfg.types) {
        TypeResult tr;
        tr.type = type;
        const std::string tok(outcome_token(type));
        try {
            // Final model: resample the train split, optionally grid search,
            // fit with OOB, score the untouched test split.
            BinaryDataset btrain = binarize(result.train, type);
            if (btrain.count_positive() == 0) throw EmptyClass("no failed rows in train split");
            BinaryDataset resampled = apply_resample(
                btrain, cfg.final_method,
                derive_seed(cfg.seed, "final-resample", static_cast<std::uint64_t>(type)));

            ForestConfig chosen = cfg.forest;
            chosen.seed = derive_seed(cfg.seed, "final-forest", static_cast<std::uint64_t>(type));
            if (cfg.run_grid) {
                ForestConfig base = chosen;
                base.seed = derive_seed(cfg.seed, "grid", static_cast<std::uint64_t>(type));
                GridSearchResult gs = grid_search(resampled, cfg.grid, base, cfg.folds);
                chosen.n_estimators = gs.best.n_estimators;
                chosen.max_depth = gs.best.max_depth;
                chosen.criterion = gs.best.criterion;
            }
            tr.chosen = chosen;
            tr.forest = fit_forest(resampled, chosen);

            ConfusionMatrix cm;
            BinaryDataset btest = binarize(result.test, type);
            for (std::size_t r = 0; r < btest.n_rows(); ++r)
                cm.add(btest.labels[r] != 0, predict(tr.forest, btest.row(r)).positive);
            tr.holdout = metrics(cm);

            tr.mined = mine_rules(itemized, result.stops.labels, type, cfg.miner_for(type));

            if (!cfg.out_dir.empty()) {
                std::ostringstream model;
                save_forest(model, tr.forest, result.stops.schema.hash(), tok);
                detail::write_text_file(out_path("model_" + tok + ".forest"), model.str());
                detail::write_text_file(out_path("importance_" + tok + ".csv"),
                                        detail::importance_to_csv(tr.forest, result.stops.schema));
                auto rows = render_rule_table(tr.mined.selection, itemized.items);
                detail::write_text_file(out_path("rules_" + tok + ".csv"),
                                        detail::rules_to_csv(rows));
                detail::write_text_file(
                    out_path("rules_" + tok + ".txt"),
                    "Association rules for " + std::string(outcome_label(type)) + " (" + tok +
                        ")\n" + format_rule_table(rows, tr.mined.n_f, tr.mined.n_c,
                                                  cfg.miner_for(type)));
                detail::write_text_file(
                    out_path("coords_" + tok + ".csv"),
                    detail::coords_to_csv(btrain, cfg.methods, result.stops.schema,
                                          derive_seed(cfg.seed, "coords",
                                                      static_cast<std::uint64_t>(type))));
            }
        } catch (const DataError& e) {
            tr.skipped = true;
            tr.skip_reason = e.what();
            result.warnings.push_back("skip type " + tok + ": " + e.what());
        }
        result.types.push_back(std::move(tr));
    }

    if (!cfg.out_dir.empty()) {
        detail::write_text_file(out_path("stops.csv"), detail::dataset_to_stops_csv(result.stops));
        detail::write_text_file(out_path("encoding.csv"), detail::encoding_to_csv(result.stops));
        detail::write_text_file(out_path("decile_bins.csv"),
                                detail::bins_to_csv(binner, result.stops.schema));
        detail::write_text_file(out_path("metrics.csv"), detail::metrics_to_csv(result.report));
        detail::write_text_file(out_path("summary.txt"),
                                detail::summary_text(result.report, cfg.methods));

        std::ostringstream manifest;
        manifest << "lastmile pipeline manifest\n";
        manifest << "source " << corpus.source << "\n";
        manifest << "source_hash " << corpus.source_hash << "\n";
        manifest << "corpus_hash " << result.corpus_hash << "\n";
        manifest << "seed " << cfg.seed << "\n";
        manifest << "stops " << result.stops.n_rows() << "\n";
        manifest << "class_counts";
        for (int tag = 0; tag < kOutcomeCount; ++tag)
            manifest << ' ' << outcome_token(static_cast<Outcome>(tag)) << '='
                     << result.stops.count(static_cast<Outcome>(tag));
        manifest << "\n";
        manifest << "train_rows " << result.train.n_rows() << "\n";
        manifest << "test_rows " << result.test.n_rows() << "\n";
        manifest << "train_ratio " << format_double(cfg.train_ratio) << "\n";
        manifest << "folds " << cfg.folds << "\n";
        manifest << "types";
        for (Outcome t : cfg.types) manifest << ' ' << outcome_token(t);
        manifest << "\n";
        manifest << "methods";
        for (const auto& m : cfg.methods) manifest << ' ' << resample_name(m.kind);
        manifest << "\n";
        manifest << "final_method " << resample_name(cfg.final_method.kind) << "\n";
        manifest << "forest n_estimators=" << cfg.forest.n_estimators
                 << " max_depth=" << cfg.forest.max_depth
                 << " criterion=" << criterion_name(cfg.forest.criterion)
                 << " max_features=" << cfg.forest.max_features
                 << " min_samples_split=" << cfg.forest.min_samples_split
                 << " min_samples_leaf=" << cfg.forest.min_samples_leaf
                 << " oob=" << (cfg.forest.compute_oob ? 1 : 0) << "\n";
        manifest << "grid_search " << (cfg.run_grid ? "on" : "off") << "\n";
        for (Outcome t : cfg.types) {
            MinerConfig m = cfg.miner_for(t);
            manifest << "miner." << outcome_token(t) << " s=" << format_double(m.s)
                     << " min_ir=" << format_double(m.min_ir)
                     << " delta_ir=" << format_double(m.delta_ir) << " parent_scope="
                     << (m.parent_scope == ParentScope::Selected ? "selected" : "all") << "\n";
        }
        for (const auto& tr : result.types) {
            const std::string tok(outcome_token(tr.type));
            if (tr.skipped) continue;
            manifest << "holdout " << tok << " sensitivity=" << format_double(tr.holdout.sensitivity)
                     << " specificity=" << format_double(tr.holdout.specificity) << "\n";
            if (tr.forest.oob_score)
                manifest << "oob " << tok << ' ' << format_double(*tr.forest.oob_score) << "\n";
            if (cfg.run_grid)
                manifest << "chosen " << tok << " n_estimators=" << tr.chosen.n_estimators
                         << " max_depth=" << tr.chosen.max_depth
                         << " criterion=" << criterion_name(tr.chosen.criterion) << "\n";
        }
        for (const auto& w : result.warnings) manifest << "warning " << w << "\n";
        detail::write_text_file(out_path("manifest.txt"), manifest.str());
    }
    return result;
}

}  // namespace lastmile
