// End-to-end tests: run-config parsing, the synth/ingest/mine/evaluate entry
// points, full-pipeline artifact determinism, and command-line exit codes.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lastmile/pipeline.hpp"

using namespace lastmile;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lastmile-pipeline-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> file_names(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

RunConfig parse_run_config(const std::string& text) {
    std::istringstream in(text);
    return run_config_from(ConfigFile::parse(in));
}

// A small generator setup with one planted rule, shared by several tests.
fs::path small_generator_config(const fs::path& dir, const std::string& extra = "") {
    const fs::path path = dir / "gen.cfg";
    write_file(path,
               "n_stops = 600\n"
               "seed = 5\n"
               "base_rate.NAH = 0.05\n"
               "rule = NAH x2.45 P3=3\n" +
                   extra);
    return path;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LASTMILE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("run configs expose defaults and apply overrides") {
    SECTION("defaults") {
        const auto cfg = parse_run_config("");
        REQUIRE(cfg.types == failure_types());
        REQUIRE(cfg.methods.size() == 4);
        REQUIRE(cfg.methods[0].kind == ResampleKind::None);
        REQUIRE(cfg.methods[1].kind == ResampleKind::RandomUnder);
        REQUIRE(cfg.methods[2].kind == ResampleKind::NearMiss3);
        REQUIRE(cfg.methods[3].kind == ResampleKind::Smote);
        REQUIRE(cfg.final_method.kind == ResampleKind::RandomUnder);
        REQUIRE(cfg.train_ratio == 0.8);
        REQUIRE(cfg.folds == 5);
        REQUIRE(cfg.seed == 0);
        REQUIRE_FALSE(cfg.run_grid);
        REQUIRE(cfg.forest.n_estimators == 100);
        REQUIRE(cfg.forest.max_depth == 6);
        REQUIRE(cfg.forest.compute_oob);
        REQUIRE(cfg.miner.s == 0.1);
        REQUIRE(cfg.miner.min_ir == 1.4);
        REQUIRE(cfg.miner.delta_ir == 0.1);
    }

    SECTION("the crowded-stop failure type gets stricter rule thresholds") {
        const auto cfg = parse_run_config("");
        REQUIRE(cfg.miner_for(Outcome::NotAtHome).min_ir == 1.4);
        REQUIRE(cfg.miner_for(Outcome::NotAtHome).delta_ir == 0.1);
        REQUIRE(cfg.miner_for(Outcome::NoSpaceForService).min_ir == 1.9);
        REQUIRE(cfg.miner_for(Outcome::NoSpaceForService).delta_ir == 0.5);
    }

    SECTION("base miner keys lift every type together") {
        const auto cfg = parse_run_config("miner.min_ir = 2.2\nminer.delta_ir = 0.7\n");
        REQUIRE(cfg.miner_for(Outcome::NotAtHome).min_ir == 2.2);
        REQUIRE(cfg.miner_for(Outcome::NoSpaceForService).min_ir == 2.2);
        REQUIRE(cfg.miner_for(Outcome::NoSpaceForService).delta_ir == 0.7);
    }

    SECTION("per-type keys can loosen the strict default back") {
        const auto cfg = parse_run_config("miner.NS.min_ir = 1.4\nminer.NS.delta_ir = 0.1\n");
        REQUIRE(cfg.miner_for(Outcome::NoSpaceForService).min_ir == 1.4);
        REQUIRE(cfg.miner_for(Outcome::NoSpaceForService).delta_ir == 0.1);
        REQUIRE(cfg.miner_for(Outcome::ServiceRefused).min_ir == 1.4);
    }

    SECTION("lists, forest and grid keys parse") {
        const auto cfg = parse_run_config(
            "types = NAH, NS\n"
            "methods = none, smote\n"
            "final_method = smote\n"
            "train_ratio = 0.7\n"
            "folds = 4\n"
            "seed = 99\n"
            "forest.n_estimators = 25\n"
            "forest.max_depth = 8\n"
            "forest.criterion = entropy\n"
            "forest.oob = false\n"
            "grid_search = true\n"
            "grid.n_estimators = 10, 50\n"
            "grid.max_depth = 5, 9\n"
            "grid.criteria = gini\n");
        REQUIRE(cfg.types ==
                std::vector<Outcome>{Outcome::NotAtHome, Outcome::NoSpaceForService});
        REQUIRE(cfg.methods.size() == 2);
        REQUIRE(cfg.methods[1].kind == ResampleKind::Smote);
        REQUIRE(cfg.final_method.kind == ResampleKind::Smote);
        REQUIRE(cfg.train_ratio == 0.7);
        REQUIRE(cfg.folds == 4);
        REQUIRE(cfg.seed == 99);
        REQUIRE(cfg.forest.n_estimators == 25);
        REQUIRE(cfg.forest.max_depth == 8);
        REQUIRE(cfg.forest.criterion == Criterion::Entropy);
        REQUIRE_FALSE(cfg.forest.compute_oob);
        REQUIRE(cfg.run_grid);
        REQUIRE(cfg.grid.n_estimators == std::vector<int>{10, 50});
        REQUIRE(cfg.grid.max_depth == std::vector<int>{5, 9});
        REQUIRE(cfg.grid.criteria == std::vector<Criterion>{Criterion::Gini});
    }

    SECTION("bad tokens and unknown keys are rejected") {
        REQUIRE_THROWS_AS(parse_run_config("types = NAH, BOGUS\n"), InvalidConfig);
        REQUIRE_THROWS_AS(parse_run_config("methods = oversample\n"), InvalidConfig);
        REQUIRE_THROWS_AS(parse_run_config("forest.criterion = twist\n"), InvalidConfig);
        REQUIRE_THROWS_AS(parse_run_config("florist.n_estimators = 10\n"), InvalidConfig);
        REQUIRE_THROWS_AS(parse_run_config("miner.sharpness = 1\n"), InvalidConfig);
    }

    SECTION("validation demands exactly one corpus source") {
        RunConfig cfg = parse_run_config("");
        REQUIRE_THROWS_AS(cfg.validate(), InvalidConfig);  // neither side set
        cfg.input = "a.csv";
        cfg.synth_config = "b.cfg";
        REQUIRE_THROWS_AS(cfg.validate(), InvalidConfig);  // both sides set
        cfg.synth_config.clear();
        REQUIRE_NOTHROW(cfg.validate());
        cfg.train_ratio = 1.0;
        REQUIRE_THROWS_AS(cfg.validate(), InvalidConfig);
    }
}

TEST_CASE("the generator entry point writes the corpus and its answer key") {
    const auto dir = scratch("synth");
    const auto gen = small_generator_config(dir);
    run_synth(gen.string(), (dir / "out").string());

    const auto names = file_names(dir / "out");
    REQUIRE(std::count(names.begin(), names.end(), "dataset.csv") == 1);
    REQUIRE(std::count(names.begin(), names.end(), "planted.csv") == 1);

    // One service row per stop plus the header.
    const auto dataset = slurp(dir / "out" / "dataset.csv");
    REQUIRE(line_count(dataset) == 601);

    const auto planted = slurp(dir / "out" / "planted.csv");
    REQUIRE(planted.find("target,multiplier,antecedent,prevalence,expected_phi,expected_ir") !=
            std::string::npos);
    REQUIRE(planted.find("NAH") != std::string::npos);
    REQUIRE(planted.find("P3=3") != std::string::npos);
    // Closed-form expectation for a multiplier of 2.45 on a 0.2-prevalence
    // level: 2.45 / (1 + 0.2 * 1.45).
    REQUIRE(planted.find("1.8992248062015504") != std::string::npos);
}

TEST_CASE("ingest round-trips a generated corpus into stop aggregates") {
    const auto dir = scratch("ingest");
    run_synth(small_generator_config(dir).string(), (dir / "synth").string());
    run_ingest((dir / "synth" / "dataset.csv").string(), (dir / "out").string());

    const auto stops = slurp(dir / "out" / "stops.csv");
    REQUIRE(line_count(stops) == 601);  // header + one row per stop
    REQUIRE(stops.rfind("stop_id,", 0) == 0);

    const auto encoding = slurp(dir / "out" / "encoding.csv");
    REQUIRE(encoding.rfind("feature_code,feature_name,code,raw", 0) == 0);
    REQUIRE(line_count(encoding) > 10);
}

TEST_CASE("the mining entry point emits bins and per-type rule tables") {
    const auto dir = scratch("mine");
    RunConfig cfg;
    cfg.synth_config = small_generator_config(dir, "base_rate.SR = 0\n").string();
    cfg.types = {Outcome::NotAtHome, Outcome::ServiceRefused};
    cfg.out_dir = (dir / "out").string();
    cfg.seed = 3;
    run_mine(cfg);

    REQUIRE(fs::exists(dir / "out" / "decile_bins.csv"));
    REQUIRE(fs::exists(dir / "out" / "rules_NAH.csv"));
    const auto table = slurp(dir / "out" / "rules_NAH.txt");
    REQUIRE(table.find("|F| = ") != std::string::npos);
    REQUIRE(table.find("IR") != std::string::npos);

    // No ServiceRefused rows were generated: the table is a skip note and no
    // CSV is written.
    const auto skipped = slurp(dir / "out" / "rules_SR.txt");
    REQUIRE(skipped.find("no failed rows") != std::string::npos);
    REQUIRE_FALSE(fs::exists(dir / "out" / "rules_SR.csv"));

    const auto bins = slurp(dir / "out" / "decile_bins.csv");
    REQUIRE(bins.rfind("feature_code,feature_name,bin,label", 0) == 0);
}

TEST_CASE("the evaluation entry point writes the metric grid and summary") {
    const auto dir = scratch("evaluate");
    RunConfig cfg;
    cfg.synth_config = small_generator_config(dir).string();
    cfg.types = {Outcome::NotAtHome};
    cfg.methods = {ResampleMethod::none(), ResampleMethod::random_under()};
    cfg.folds = 3;
    cfg.forest.n_estimators = 10;
    cfg.forest.max_depth = 4;
    cfg.out_dir = (dir / "out").string();
    cfg.seed = 17;
    run_evaluate(cfg);

    const auto metrics = slurp(dir / "out" / "metrics.csv");
    REQUIRE(metrics.rfind("failure_type,method,fold,sensitivity,specificity", 0) == 0);
    // Header + one row per (1 type x 2 methods x 3 folds).
    REQUIRE(line_count(metrics) == 7);

    const auto summary = slurp(dir / "out" / "summary.txt");
    REQUIRE(summary.find("none") != std::string::npos);
    REQUIRE(summary.find("random_under") != std::string::npos);
    REQUIRE(summary.find("sensitivity") != std::string::npos);
}

TEST_CASE("two pipeline runs produce byte-identical artifacts") {
    const auto dir = scratch("pipeline");
    RunConfig cfg;
    cfg.synth_config = small_generator_config(dir).string();
    cfg.types = {Outcome::NotAtHome};
    cfg.methods = {ResampleMethod::none(), ResampleMethod::random_under()};
    cfg.folds = 3;
    cfg.forest.n_estimators = 10;
    cfg.forest.max_depth = 4;
    cfg.seed = 11;

    cfg.out_dir = (dir / "a").string();
    const auto first = run_pipeline(cfg);
    cfg.out_dir = (dir / "b").string();
    const auto second = run_pipeline(cfg);

    const auto names = file_names(dir / "a");
    REQUIRE(names == file_names(dir / "b"));
    const std::vector<std::string> expected{
        "coords_NAH.csv", "dataset.csv",        "decile_bins.csv", "encoding.csv",
        "manifest.txt",   "importance_NAH.csv", "metrics.csv",     "model_NAH.forest",
        "rules_NAH.csv",  "rules_NAH.txt",      "stops.csv",       "summary.txt"};
    for (const auto& name : expected)
        REQUIRE(std::count(names.begin(), names.end(), name) == 1);
    for (const auto& name : names)
        REQUIRE(slurp(dir / "a" / name) == slurp(dir / "b" / name));

    // In-memory results line up with the split and the corpus.
    REQUIRE(first.stops.n_rows() == 600);
    // The split stratifies by outcome, so per-class rounding can move the
    // boundary a few rows off the nominal 480/120.
    REQUIRE(first.train.n_rows() + first.test.n_rows() == 600);
    REQUIRE(first.train.n_rows() >= 477);
    REQUIRE(first.train.n_rows() <= 483);
    REQUIRE(first.report.cells.size() == 2);
    REQUIRE(first.types.size() == 1);
    REQUIRE_FALSE(first.types[0].skipped);
    REQUIRE(first.types[0].holdout.sensitivity >= 0.0);
    REQUIRE(first.types[0].holdout.sensitivity <= 1.0);
    REQUIRE(first.warnings.empty());
    REQUIRE(first.corpus_hash == second.corpus_hash);
    REQUIRE(first.corpus_hash != 0);

    // The manifest records the run without any timestamps.
    const auto manifest = slurp(dir / "a" / "manifest.txt");
    REQUIRE(manifest.find("seed 11") != std::string::npos);
    REQUIRE(manifest.find("stops 600") != std::string::npos);
    REQUIRE(manifest.find("folds 3") != std::string::npos);
}

TEST_CASE("types with no failed rows are skipped with a warning") {
    const auto dir = scratch("skip");
    RunConfig cfg;
    cfg.synth_config = small_generator_config(dir, "base_rate.SR = 0\n").string();
    cfg.types = {Outcome::NotAtHome, Outcome::ServiceRefused};
    cfg.methods = {ResampleMethod::random_under()};
    cfg.folds = 3;
    cfg.forest.n_estimators = 8;
    cfg.forest.max_depth = 4;
    cfg.seed = 2;
    cfg.out_dir = (dir / "out").string();

    const auto result = run_pipeline(cfg);

    REQUIRE(result.types.size() == 2);
    REQUIRE_FALSE(result.types[0].skipped);
    REQUIRE(result.types[1].skipped);
    REQUIRE_FALSE(result.types[1].skip_reason.empty());
    // One warning for the skipped cv cell, one for the skipped final model.
    REQUIRE(result.warnings.size() == 2);

    REQUIRE(fs::exists(dir / "out" / "model_NAH.forest"));
    REQUIRE_FALSE(fs::exists(dir / "out" / "model_SR.forest"));

    const auto manifest = slurp(dir / "out" / "manifest.txt");
    REQUIRE(manifest.find("skip type SR") != std::string::npos);
}

TEST_CASE("the command line maps error classes onto exit codes") {
    const auto dir = scratch("cli");

    SECTION("help succeeds") {
        REQUIRE(run_cli("--help") == 0);
        REQUIRE(run_cli("pipeline --help") == 0);
    }

    SECTION("usage problems exit 1") {
        REQUIRE(run_cli("") == 1);                 // a subcommand is required
        REQUIRE(run_cli("--frobnicate") == 1);     // unknown flag
        REQUIRE(run_cli("synth") == 1);            // --config is required
        REQUIRE(run_cli("pipeline") == 1);         // no corpus source given
    }

    SECTION("data problems exit 2") {
        REQUIRE(run_cli("ingest --input " + (dir / "absent.csv").string() + " --out " +
                        (dir / "o1").string()) == 2);
        write_file(dir / "empty.csv", "");
        REQUIRE(run_cli("ingest --input " + (dir / "empty.csv").string() + " --out " +
                        (dir / "o2").string()) == 2);
    }

    SECTION("a full generate-then-run flow succeeds") {
        const auto gen = small_generator_config(dir);
        REQUIRE(run_cli("synth --config " + gen.string() + " --out " +
                        (dir / "synth").string()) == 0);
        REQUIRE(fs::exists(dir / "synth" / "dataset.csv"));

        const fs::path run_cfg = dir / "run.cfg";
        write_file(run_cfg,
                   "synth_config = " + gen.string() +
                       "\n"
                       "types = NAH\n"
                       "methods = none, random_under\n"
                       "folds = 3\n"
                       "forest.n_estimators = 8\n"
                       "forest.max_depth = 4\n"
                       "seed = 21\n");
        REQUIRE(run_cli("pipeline --config " + run_cfg.string() + " --out " +
                        (dir / "run").string()) == 0);
        REQUIRE(fs::exists(dir / "run" / "manifest.txt"));
        REQUIRE(fs::exists(dir / "run" / "model_NAH.forest"));
    }
}
