#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"
#include "lastmile/rng.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Criterion : std::uint8_t { Gini, Entropy };

inline const char* criterion_name(Criterion c) {
    return c == Criterion::Gini ? "gini" : "entropy";
}

inline std::optional<Criterion> criterion_from_name(std::string_view name) {
    if (name == "gini") return Criterion::Gini;
    if (name == "entropy") return Criterion::Entropy;
    return std::nullopt;
}

struct ForestConfig {
    int n_estimators = 100;
    int max_depth = 6;
    Criterion criterion = Criterion::Gini;
    int max_features = 0;  // 0 = floor(sqrt(n_features)), the default rule
    int min_samples_split = 10;
    int min_samples_leaf = 5;
    bool compute_oob = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 1) throw InvalidConfig("n_estimators must be >= 1");
        if (max_depth < 1) throw InvalidConfig("max_depth must be >= 1");
        if (min_samples_leaf < 1) throw InvalidConfig("min_samples_leaf must be >= 1");
        if (min_samples_split < 2) throw InvalidConfig("min_samples_split must be >= 2");
        if (max_features < 0) throw InvalidConfig("max_features must be >= 0");
    }
};

struct GridSearchSpace {
    std::vector<int> n_estimators{10, 50, 100, 200, 500};
    std::vector<int> max_depth{5, 6, 7, 8, 9, 10, 20, 50};
    std::vector<Criterion> criteria{Criterion::Gini, Criterion::Entropy};

    void validate() const {
        if (n_estimators.empty() || max_depth.empty() || criteria.empty())
            throw InvalidConfig("grid search space axes must be non-empty");
    }
};

// ---------------------------------------------------------------------------
// Impurity
// ---------------------------------------------------------------------------

// Gini = 1 - sum p_i^2; Entropy = -sum p_i log2 p_i with 0*log0 = 0.
inline double impurity(std::uint64_t neg, std::uint64_t pos, Criterion criterion) {
    const double n = static_cast<double>(neg + pos);
    if (neg + pos == 0) throw InternalError("impurity of an empty node");
    const double p0 = static_cast<double>(neg) / n;
    const double p1 = static_cast<double>(pos) / n;
    if (criterion == Criterion::Gini) return 1.0 - (p0 * p0 + p1 * p1);
    double h = 0.0;
    if (p0 > 0.0) h -= p0 * std::log2(p0);
    if (p1 > 0.0) h -= p1 * std::log2(p1);
    return h;
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

// Flat node; feature == -1 marks a leaf.  Internal nodes route
// value <= threshold to `left`, > threshold to `right`.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;  // impurity decrease achieved by this node's split
    std::uint32_t n = 0, neg = 0, pos = 0;
    std::int32_t left = -1, right = -1;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // preorder; nodes[0] is the root

    double leaf_fraction(std::span<const double> row) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(row[static_cast<std::size_t>(nodes[i].feature)] <=
                                                 nodes[i].threshold
                                             ? nodes[i].left
                                             : nodes[i].right);
        const auto& leaf = nodes[i];
        return static_cast<double>(leaf.pos) / static_cast<double>(leaf.neg + leaf.pos);
    }
};

struct RandomForest {
    ForestConfig config;
    std::size_t n_features = 0;
    std::vector<Tree> trees;
    std::vector<std::vector<std::uint8_t>> inbag;  // per tree, per training row; empty if loaded
    std::optional<double> oob_score;
    std::vector<double> importances;
};

// ---------------------------------------------------------------------------
// Split search
// ---------------------------------------------------------------------------

struct SplitChoice {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exhaustive scan over the candidate features: thresholds at midpoints
// between consecutive distinct sorted values, both children at least
// min_samples_leaf rows, maximizing impurity decrease.  Ties break toward
// the lower feature index, then the lower threshold (candidates are visited
// in exactly that order and only strict improvements are taken).
inline std::optional<SplitChoice> best_split(const BinaryDataset& data,
                                             const std::vector<std::uint32_t>& rows,
                                             std::vector<std::size_t> candidate_features,
                                             Criterion criterion, int min_samples_leaf) {
    const std::size_t n = rows.size();
    if (n < 2) return std::nullopt;

    std::uint64_t neg = 0, pos = 0;
    for (std::uint32_t r : rows) (data.labels[r] ? pos : neg) += 1;
    if (neg == 0 || pos == 0) return std::nullopt;  // pure node
    const double parent = impurity(neg, pos, criterion);
    const double dn = static_cast<double>(n);

    std::sort(candidate_features.begin(), candidate_features.end());
    candidate_features.erase(
        std::unique(candidate_features.begin(), candidate_features.end()),
        candidate_features.end());

    std::optional<SplitChoice> best;
    std::vector<std::pair<double, std::uint8_t>> column(n);
    for (std::size_t f : candidate_features) {
        for (std::size_t i = 0; i < n; ++i)
            column[i] = {data.at(rows[i], f), data.labels[rows[i]]};
        std::sort(column.begin(), column.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        std::uint64_t lneg = 0, lpos = 0;
        for (std::size_t i = 1; i < n; ++i) {
            (column[i - 1].second ? lpos : lneg) += 1;
            if (column[i - 1].first == column[i].first) continue;  // not a boundary
            const std::uint64_t ln = lneg + lpos, rn = neg + pos - ln;
            if (ln < static_cast<std::uint64_t>(min_samples_leaf) ||
                rn < static_cast<std::uint64_t>(min_samples_leaf))
                continue;
            const double gain = parent -
                                (static_cast<double>(ln) / dn) * impurity(lneg, lpos, criterion) -
                                (static_cast<double>(rn) / dn) *
                                    impurity(neg - lneg, pos - lpos, criterion);
            if (gain <= 0.0) continue;
            if (!best || gain > best->gain) {
                const double thr = column[i - 1].first +
                                   (column[i].first - column[i - 1].first) / 2.0;
                best = SplitChoice{f, thr, gain};
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace detail {

struct TreeBuilder {
    const BinaryDataset& data;
    const ForestConfig& cfg;
    std::uint64_t tree_seed;
    std::size_t k_features;
    Tree tree;

    // Heap-style node ids (root 1, children 2i and 2i+1) key the per-node
    // random streams, so raising max_depth refines a tree without disturbing
    // any decision made above the new depth.
    std::int32_t build(std::vector<std::uint32_t>& rows, int depth, std::uint64_t heap_id) {
        TreeNode node;
        node.n = static_cast<std::uint32_t>(rows.size());
        for (std::uint32_t r : rows) (data.labels[r] ? node.pos : node.neg) += 1;
        const auto index = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(node);

        const bool stop = depth >= cfg.max_depth ||
                          rows.size() < static_cast<std::size_t>(cfg.min_samples_split) ||
                          node.neg == 0 || node.pos == 0;
        if (stop) return index;

        Rng node_rng(derive_seed(tree_seed, "node", heap_id));
        auto subset = node_rng.sample_without_replacement(data.width, k_features);
        std::vector<std::size_t> features(subset.begin(), subset.end());
        auto split = best_split(data, rows, std::move(features), cfg.criterion,
                                cfg.min_samples_leaf);
        if (!split) return index;

        std::vector<std::uint32_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        for (std::uint32_t r : rows)
            (data.at(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[static_cast<std::size_t>(index)].feature =
            static_cast<std::int32_t>(split->feature);
        tree.nodes[static_cast<std::size_t>(index)].threshold = split->threshold;
        tree.nodes[static_cast<std::size_t>(index)].gain = split->gain;
        const std::int32_t left = build(left_rows, depth + 1, heap_id * 2);
        tree.nodes[static_cast<std::size_t>(index)].left = left;
        const std::int32_t right = build(right_rows, depth + 1, heap_id * 2 + 1);
        tree.nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }
};

}  // namespace detail

// Mean-decrease-impurity importances: per tree, each internal node
// contributes (node samples / root samples) * gain to its split feature;
// tree vectors are averaged and the result normalized to sum 1 (all zeros if
// no tree ever split).
inline std::vector<double> feature_importance(const RandomForest& forest) {
    std::vector<double> total(forest.n_features, 0.0);
    for (const auto& tree : forest.trees) {
        const double root_n = static_cast<double>(tree.nodes[0].n);
        for (const auto& node : tree.nodes)
            if (!node.is_leaf())
                total[static_cast<std::size_t>(node.feature)] +=
                    (static_cast<double>(node.n) / root_n) * node.gain;
    }
    for (double& v : total) v /= static_cast<double>(forest.trees.size());
    double sum = 0.0;
    for (double v : total) sum += v;
    if (sum > 0.0)
        for (double& v : total) v /= sum;
    return total;
}

// Trains n_estimators trees, each on an n-row bootstrap of the training
// table, drawing a fresh uniform feature subset of floor(sqrt(p)) features
// (or config.max_features when set) at every node.  All randomness derives
// from (seed, tree index), so trees are independent of training order.
inline RandomForest fit_forest(const BinaryDataset& train, ForestConfig cfg) {
    cfg.validate();
    const std::size_t n = train.n_rows();
    if (n < static_cast<std::size_t>(cfg.min_samples_split))
        throw DegenerateTraining("training set smaller than min_samples_split");
    const std::size_t n_pos = train.count_positive();
    if (n_pos == 0 || n_pos == n)
        throw DegenerateTraining("training set contains a single class");

    if (cfg.max_features > 0 && static_cast<std::size_t>(cfg.max_features) > train.width)
        throw InvalidConfig("max_features exceeds the feature count");

    RandomForest forest;
    forest.config = cfg;
    forest.n_features = train.width;
    const std::size_t k_features =
        cfg.max_features > 0
            ? static_cast<std::size_t>(cfg.max_features)
            : std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::floor(std::sqrt(static_cast<double>(train.width)))));

    forest.trees.reserve(static_cast<std::size_t>(cfg.n_estimators));
    forest.inbag.reserve(static_cast<std::size_t>(cfg.n_estimators));
    for (int t = 0; t < cfg.n_estimators; ++t) {
        const std::uint64_t tree_seed = derive_seed(cfg.seed, "tree", static_cast<std::uint64_t>(t));
        Rng boot(derive_seed(tree_seed, "bootstrap"));
        std::vector<std::uint32_t> rows(n);
        std::vector<std::uint8_t> inbag(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = static_cast<std::uint32_t>(boot.index(n));
            rows[i] = r;
            inbag[r] = 1;
        }
        detail::TreeBuilder builder{train, cfg, tree_seed, k_features, {}};
        builder.build(rows, 0, 1);
        forest.trees.push_back(std::move(builder.tree));
        forest.inbag.push_back(std::move(inbag));
    }

    if (cfg.compute_oob) {
        std::uint64_t considered = 0, correct = 0;
        for (std::size_t r = 0; r < n; ++r) {
            std::uint64_t votes = 0, voters = 0;
            for (std::size_t t = 0; t < forest.trees.size(); ++t) {
                if (forest.inbag[t][r]) continue;
                ++voters;
                if (forest.trees[t].leaf_fraction(train.row(r)) >= 0.5) ++votes;
            }
            if (voters == 0) continue;  // rows never out of bag are excluded
            ++considered;
            const bool predicted = 2 * votes >= voters;
            if (predicted == (train.labels[r] != 0)) ++correct;
        }
        if (considered > 0)
            forest.oob_score = static_cast<double>(correct) / static_cast<double>(considered);
    }
    forest.importances = feature_importance(forest);
    return forest;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct Prediction {
    bool positive = false;
    double probability = 0.0;  // mean leaf positive-class fraction
};

inline Prediction predict(const RandomForest& forest, std::span<const double> row) {
    if (row.size() != forest.n_features)
        throw WidthMismatch("prediction row width " + std::to_string(row.size()) +
                            " does not match model width " + std::to_string(forest.n_features));
    double p = 0.0;
    for (const auto& tree : forest.trees) p += tree.leaf_fraction(row);
    p /= static_cast<double>(forest.trees.size());
    return {p >= 0.5, p};
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

namespace detail {

// Stratified fold ids over a binary table: within each class, rows are
// ordered by a seed-derived hash of their position and dealt round-robin.
inline std::vector<int> binary_fold_ids(const BinaryDataset& data, int folds,
                                        std::uint64_t seed) {
    std::vector<int> fold(data.n_rows(), -1);
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
        for (std::size_t r = 0; r < data.n_rows(); ++r)
            if (data.labels[r] == cls)
                keyed.emplace_back(derive_seed(seed, "fold", static_cast<std::uint64_t>(r)), r);
        if (keyed.size() < static_cast<std::size_t>(folds))
            throw EmptyClass("grid search needs at least `folds` rows of each class");
        std::sort(keyed.begin(), keyed.end());
        for (std::size_t i = 0; i < keyed.size(); ++i)
            fold[keyed[i].second] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return fold;
}

inline BinaryDataset rows_where(const BinaryDataset& data, const std::vector<int>& fold,
                                int target, bool equal) {
    BinaryDataset out;
    out.width = data.width;
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        if ((fold[r] == target) == equal) out.append_row(data.row(r), data.labels[r], data.row_ids[r]);
    return out;
}

}  // namespace detail

// Mean cross-validated balanced accuracy of one configuration.
inline double cv_balanced_accuracy(const BinaryDataset& data, ForestConfig cfg, int folds,
                                   std::uint64_t fold_seed) {
    auto fold_of = detail::binary_fold_ids(data, folds, fold_seed);
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
        BinaryDataset train = detail::rows_where(data, fold_of, f, false);
        BinaryDataset held = detail::rows_where(data, fold_of, f, true);
        ForestConfig fold_cfg = cfg;
        fold_cfg.compute_oob = false;
        fold_cfg.seed = derive_seed(cfg.seed, "cv", static_cast<std::uint64_t>(f));
        RandomForest forest = fit_forest(train, fold_cfg);
        std::uint64_t tp = 0, fn = 0, tn = 0, fp = 0;
        for (std::size_t r = 0; r < held.n_rows(); ++r) {
            const bool predicted = predict(forest, held.row(r)).positive;
            if (held.labels[r]) (predicted ? tp : fn) += 1;
            else (predicted ? fp : tn) += 1;
        }
        if (tp + fn == 0 || tn + fp == 0)
            throw UndefinedMetric("fold without both classes in grid search");
        const double sens = static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double spec = static_cast<double>(tn) / static_cast<double>(tn + fp);
        total += (sens + spec) / 2.0;
    }
    return total / folds;
}

struct GridSearchResult {
    ForestConfig best;
    double best_score = 0.0;
    // every evaluated point, in visit order: (config, mean balanced accuracy)
    std::vector<std::pair<ForestConfig, double>> trace;
};

// Exhaustive search over the space; the winner maximizes mean CV balanced
// accuracy, with ties going to fewer trees, then shallower depth (the visit
// order below, taking only strict improvements, implements exactly that).
inline GridSearchResult grid_search(const BinaryDataset& train, const GridSearchSpace& space,
                                    ForestConfig base, int folds = 5) {
    space.validate();
    std::vector<int> trees_axis = space.n_estimators;
    std::vector<int> depth_axis = space.max_depth;
    std::sort(trees_axis.begin(), trees_axis.end());
    std::sort(depth_axis.begin(), depth_axis.end());

    GridSearchResult result;
    bool have = false;
    for (int n_trees : trees_axis) {
        for (int depth : depth_axis) {
            for (Criterion crit : space.criteria) {
                ForestConfig cfg = base;
                cfg.n_estimators = n_trees;
                cfg.max_depth = depth;
                cfg.criterion = crit;
                const double score =
                    cv_balanced_accuracy(train, cfg, folds, derive_seed(base.seed, "grid"));
                result.trace.emplace_back(cfg, score);
                if (!have || score > result.best_score) {
                    result.best = cfg;
                    result.best_score = score;
                    have = true;
                }
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// Flat self-describing text format; numbers are written in shortest
// round-trip form so save/load/save is byte-stable.
inline void save_forest(std::ostream& out, const RandomForest& forest, std::uint64_t schema_hash,
                        const std::string& target_token) {
    out << "lastmile-forest v1\n";
    out << "schema_hash " << schema_hash << "\n";
    out << "target " << (target_token.empty() ? "-" : target_token) << "\n";
    const auto& c = forest.config;
    out << "config n_estimators=" << c.n_estimators << " max_depth=" << c.max_depth
        << " criterion=" << criterion_name(c.criterion) << " max_features=" << c.max_features
        << " min_samples_split=" << c.min_samples_split
        << " min_samples_leaf=" << c.min_samples_leaf << " oob=" << (c.compute_oob ? 1 : 0)
        << " seed=" << c.seed << "\n";
    out << "n_features " << forest.n_features << "\n";
    out << "oob_score " << (forest.oob_score ? format_double(*forest.oob_score) : "none") << "\n";
    out << "trees " << forest.trees.size() << "\n";
    for (const auto& tree : forest.trees) {
        out << "tree " << tree.nodes.size() << "\n";
        for (const auto& n : tree.nodes) {
            if (n.is_leaf()) {
                out << "leaf n=" << n.n << " neg=" << n.neg << " pos=" << n.pos << "\n";
            } else {
                out << "split f=" << n.feature << " thr=" << format_double(n.threshold)
                    << " gain=" << format_double(n.gain) << " n=" << n.n << " neg=" << n.neg
                    << " pos=" << n.pos << " left=" << n.left << " right=" << n.right << "\n";
            }
        }
    }
}

struct LoadedForest {
    RandomForest forest;
    std::uint64_t schema_hash = 0;
    std::string target_token;
};

namespace detail {

inline std::string expect_field(std::istringstream& line, std::string_view key) {
    std::string token;
    if (!(line >> token)) throw DataError("model file: truncated line");
    auto eq = token.find('=');
    if (eq == std::string::npos || std::string_view(token).substr(0, eq) != key)
        throw DataError("model file: expected field " + std::string(key));
    return token.substr(eq + 1);
}

template <class T>
inline T num_field(std::istringstream& line, std::string_view key) {
    std::string v = expect_field(line, key);
    if constexpr (std::is_same_v<T, double>) {
        auto d = try_parse_double(v);
        if (!d) throw DataError("model file: bad number in field " + std::string(key));
        return *d;
    } else {
        auto d = try_parse_int(v);
        if (!d) throw DataError("model file: bad integer in field " + std::string(key));
        return static_cast<T>(*d);
    }
}

}  // namespace detail

inline LoadedForest load_forest(std::istream& in) {
    auto next_line = [&in](std::string_view what) {
        std::string line;
        if (!std::getline(in, line)) throw DataError("model file: missing " + std::string(what));
        return line;
    };
    if (next_line("magic") != "lastmile-forest v1")
        throw DataError("model file: bad magic line");

    LoadedForest out;
    {
        std::istringstream line(next_line("schema_hash"));
        std::string key;
        line >> key >> out.schema_hash;
        if (key != "schema_hash") throw DataError("model file: expected schema_hash");
    }
    {
        std::istringstream line(next_line("target"));
        std::string key;
        line >> key >> out.target_token;
        if (key != "target") throw DataError("model file: expected target");
    }
    {
        std::istringstream line(next_line("config"));
        std::string key;
        line >> key;
        if (key != "config") throw DataError("model file: expected config");
        auto& c = out.forest.config;
        c.n_estimators = detail::num_field<int>(line, "n_estimators");
        c.max_depth = detail::num_field<int>(line, "max_depth");
        auto crit = criterion_from_name(detail::expect_field(line, "criterion"));
        if (!crit) throw DataError("model file: unknown criterion");
        c.criterion = *crit;
        c.max_features = detail::num_field<int>(line, "max_features");
        c.min_samples_split = detail::num_field<int>(line, "min_samples_split");
        c.min_samples_leaf = detail::num_field<int>(line, "min_samples_leaf");
        c.compute_oob = detail::num_field<int>(line, "oob") != 0;
        c.seed = detail::num_field<std::uint64_t>(line, "seed");
    }
    {
        std::istringstream line(next_line("n_features"));
        std::string key;
        line >> key >> out.forest.n_features;
        if (key != "n_features") throw DataError("model file: expected n_features");
    }
    {
        std::istringstream line(next_line("oob_score"));
        std::string key, value;
        line >> key >> value;
        if (key != "oob_score") throw DataError("model file: expected oob_score");
        if (value != "none") {
            auto d = try_parse_double(value);
            if (!d) throw DataError("model file: bad oob_score");
            out.forest.oob_score = *d;
        }
    }
    std::size_t n_trees = 0;
    {
        std::istringstream line(next_line("trees"));
        std::string key;
        line >> key >> n_trees;
        if (key != "trees") throw DataError("model file: expected trees");
    }
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::size_t n_nodes = 0;
        {
            std::istringstream line(next_line("tree"));
            std::string key;
            line >> key >> n_nodes;
            if (key != "tree") throw DataError("model file: expected tree");
        }
        Tree tree;
        tree.nodes.reserve(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            std::istringstream line(next_line("node"));
            std::string kind;
            line >> kind;
            TreeNode node;
            if (kind == "leaf") {
                node.n = detail::num_field<std::uint32_t>(line, "n");
                node.neg = detail::num_field<std::uint32_t>(line, "neg");
                node.pos = detail::num_field<std::uint32_t>(line, "pos");
            } else if (kind == "split") {
                node.feature = detail::num_field<std::int32_t>(line, "f");
                node.threshold = detail::num_field<double>(line, "thr");
                node.gain = detail::num_field<double>(line, "gain");
                node.n = detail::num_field<std::uint32_t>(line, "n");
                node.neg = detail::num_field<std::uint32_t>(line, "neg");
                node.pos = detail::num_field<std::uint32_t>(line, "pos");
                node.left = detail::num_field<std::int32_t>(line, "left");
                node.right = detail::num_field<std::int32_t>(line, "right");
            } else {
                throw DataError("model file: unknown node kind '" + kind + "'");
            }
            tree.nodes.push_back(node);
        }
        if (tree.nodes.empty()) throw DataError("model file: empty tree");
        out.forest.trees.push_back(std::move(tree));
    }
    out.forest.importances = feature_importance(out.forest);
    return out;
}

}  // namespace lastmile
