#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/csv.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Decile binning
// ---------------------------------------------------------------------------

// Per-feature decile bins fitted on the full corpus.  Numerical features get
// up to 9 interior edges at the empirical 0.1..0.9 quantiles; categorical
// features pass through untouched.  Bins are half-open (a, b], except the
// first which is closed on the left.
class DecileBinner {
public:
    struct FeatureBins {
        bool categorical = false;
        std::vector<double> edges;  // strictly increasing, all < data max
        double lo = 0.0, hi = 0.0;  // data min / max, for labels
    };

    static DecileBinner fit(const Dataset& corpus) {
        if (corpus.n_rows() == 0) throw EmptyClass("cannot fit deciles on an empty corpus");
        DecileBinner binner;
        binner.features_.resize(corpus.width());
        std::vector<double> column(corpus.n_rows());
        for (std::size_t f = 0; f < corpus.width(); ++f) {
            auto& bins = binner.features_[f];
            bins.categorical = corpus.schema.at(f).kind == FeatureKind::Categorical;
            if (bins.categorical) continue;
            for (std::size_t r = 0; r < corpus.n_rows(); ++r) column[r] = corpus.at(r, f);
            std::sort(column.begin(), column.end());
            bins.lo = column.front();
            bins.hi = column.back();
            for (int d = 1; d <= 9; ++d) {
                double e = quantile_sorted(column, d / 10.0);
                if (e >= bins.hi) continue;  // would create an empty trailing bin
                if (bins.edges.empty() || e > bins.edges.back()) bins.edges.push_back(e);
            }
        }
        return binner;
    }

    // 1-based bin index; values outside the fitted range fall into the first
    // or last bin.  A value exactly equal to an edge b of (a, b] is in that bin.
    int bin_of(std::size_t feature, double value) const {
        const auto& bins = features_.at(feature);
        if (bins.categorical) throw UsageError("bin_of called on a categorical feature");
        int b = 1;
        for (double e : bins.edges) {
            if (value <= e) break;
            ++b;
        }
        return b;
    }

    int n_bins(std::size_t feature) const {
        const auto& bins = features_.at(feature);
        if (bins.categorical) throw UsageError("n_bins called on a categorical feature");
        return static_cast<int>(bins.edges.size()) + 1;
    }

    bool categorical(std::size_t feature) const { return features_.at(feature).categorical; }

    // Interval label, e.g. "[0.0, 120.0]" for the first bin, "(120.0, 180.0]"
    // after it.  Decimal rendering keeps a ".0" on integral edges.
    std::string bin_label(std::size_t feature, int bin) const {
        const auto& bins = features_.at(feature);
        if (bins.categorical) throw UsageError("bin_label called on a categorical feature");
        if (bin < 1 || bin > n_bins(feature)) throw UsageError("bin index out of range");
        const double lo = bin == 1 ? bins.lo : bins.edges[static_cast<std::size_t>(bin) - 2];
        const double hi = bin == n_bins(feature) ? bins.hi
                                                 : bins.edges[static_cast<std::size_t>(bin) - 1];
        const char open = bin == 1 ? '[' : '(';
        return std::string(1, open) + format_decimal(lo) + ", " + format_decimal(hi) + "]";
    }

    std::size_t width() const { return features_.size(); }
    const FeatureBins& feature(std::size_t f) const { return features_.at(f); }

private:
    // Empirical quantile with h = q*n - 1/2 (0-based), linearly interpolated:
    // on values 1..100 the 0.1 quantile is 10.5.
    static double quantile_sorted(const std::vector<double>& sorted, double q) {
        const double n = static_cast<double>(sorted.size());
        double h = q * n - 0.5;
        if (h <= 0.0) return sorted.front();
        if (h >= n - 1.0) return sorted.back();
        const auto i = static_cast<std::size_t>(std::floor(h));
        const double frac = h - std::floor(h);
        return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
    }

    std::vector<FeatureBins> features_;
};

inline DecileBinner fit_deciles(const Dataset& corpus) { return DecileBinner::fit(corpus); }

// ---------------------------------------------------------------------------
// Items and transactions
// ---------------------------------------------------------------------------

// Interned item: a (feature, decile-or-value) pair with its display token.
// Tokens render as <FeatureName>_D<bin> for binned numericals and
// <FeatureName>_V<code> for categorical values (V-100 for the sentinel).
class ItemTable {
public:
    struct ItemDef {
        std::uint16_t feature = 0;
        bool decile = false;
        std::int32_t value = 0;  // bin index (1-based) or categorical code
        std::string token;
    };

    std::int32_t intern(std::uint16_t feature, bool decile, std::int32_t value,
                        const FeatureSchema& schema) {
        const std::uint64_t key = pack(feature, decile, value);
        auto it = index_.find(key);
        if (it != index_.end()) return it->second;
        ItemDef def;
        def.feature = feature;
        def.decile = decile;
        def.value = value;
        def.token = schema.at(feature).name + (decile ? "_D" : "_V") + std::to_string(value);
        auto id = static_cast<std::int32_t>(defs_.size());
        defs_.push_back(std::move(def));
        index_.emplace(key, id);
        return id;
    }

    const ItemDef& def(std::int32_t id) const { return defs_.at(static_cast<std::size_t>(id)); }
    const std::string& token(std::int32_t id) const { return def(id).token; }
    std::size_t size() const { return defs_.size(); }

private:
    static std::uint64_t pack(std::uint16_t feature, bool decile, std::int32_t value) {
        return (static_cast<std::uint64_t>(feature) << 40) |
               (static_cast<std::uint64_t>(decile) << 32) |
               static_cast<std::uint64_t>(static_cast<std::uint32_t>(value));
    }

    std::vector<ItemDef> defs_;
    std::unordered_map<std::uint64_t, std::int32_t> index_;
};

// Feature-aligned transaction: element f is the interned item of feature f.
using Transaction = std::vector<std::int32_t>;

inline Transaction itemize(std::span<const double> row, const DecileBinner& binner,
                           const FeatureSchema& schema, ItemTable& items) {
    if (row.size() != binner.width())
        throw WidthMismatch("itemize: row width does not match binner width");
    Transaction txn(row.size());
    for (std::size_t f = 0; f < row.size(); ++f) {
        const auto feature = static_cast<std::uint16_t>(f);
        if (binner.categorical(f)) {
            const auto code = static_cast<std::int32_t>(std::llround(row[f]));
            txn[f] = items.intern(feature, false, code, schema);
        } else {
            txn[f] = items.intern(feature, true, binner.bin_of(f, row[f]), schema);
        }
    }
    return txn;
}

struct ItemizedCorpus {
    ItemTable items;
    std::vector<Transaction> txns;  // one per corpus row, in row order
};

inline ItemizedCorpus itemize_corpus(const Dataset& corpus, const DecileBinner& binner) {
    ItemizedCorpus out;
    out.txns.reserve(corpus.n_rows());
    for (std::size_t r = 0; r < corpus.n_rows(); ++r)
        out.txns.push_back(itemize(corpus.row(r), binner, corpus.schema, out.items));
    return out;
}

// ---------------------------------------------------------------------------
// FP-growth over the failed set F
// ---------------------------------------------------------------------------

struct FrequentItemset {
    std::vector<std::int32_t> items;  // ascending item ids
    std::uint64_t sup_f = 0;
};

namespace detail {

struct FpTree {
    struct Node {
        std::int32_t rank = -1;  // header rank of the item at this node
        std::uint64_t count = 0;
        std::int32_t parent = -1;
        std::int32_t next = -1;  // next node of the same rank (header chain)
        std::vector<std::pair<std::int32_t, std::int32_t>> kids;  // (rank, node)
    };

    std::vector<Node> nodes;
    std::vector<std::int32_t> head;   // per rank: first node in the chain
    std::vector<std::uint64_t> total; // per rank: total count in this tree

    explicit FpTree(std::size_t n_ranks)
        : head(n_ranks, -1), total(n_ranks, 0) {
        nodes.push_back({});  // root
    }

    void insert(const std::vector<std::int32_t>& ranks, std::uint64_t count) {
        std::int32_t cur = 0;
        for (std::int32_t rank : ranks) {
            total[static_cast<std::size_t>(rank)] += count;
            std::int32_t child = -1;
            for (auto& [r, n] : nodes[static_cast<std::size_t>(cur)].kids)
                if (r == rank) {
                    child = n;
                    break;
                }
            if (child < 0) {
                child = static_cast<std::int32_t>(nodes.size());
                Node node;
                node.rank = rank;
                node.parent = cur;
                node.next = head[static_cast<std::size_t>(rank)];
                head[static_cast<std::size_t>(rank)] = child;
                nodes.push_back(node);
                nodes[static_cast<std::size_t>(cur)].kids.emplace_back(rank, child);
            }
            nodes[static_cast<std::size_t>(child)].count += count;
            cur = child;
        }
    }
};

// Recursive FP-growth.  `suffix` holds item ids already fixed (the conditional
// pattern), largest rank first; emission stops at max_size.
inline void fp_grow(const FpTree& tree, const std::vector<std::int32_t>& rank_to_item,
                    std::uint64_t min_count, std::size_t max_size,
                    std::vector<std::int32_t>& suffix, std::vector<FrequentItemset>& out) {
    for (std::size_t rank = 0; rank < tree.head.size(); ++rank) {
        if (tree.total[rank] < min_count) continue;
        suffix.push_back(rank_to_item[rank]);
        FrequentItemset fi;
        fi.items = suffix;
        std::sort(fi.items.begin(), fi.items.end());
        fi.sup_f = tree.total[rank];
        out.push_back(std::move(fi));

        if (suffix.size() < max_size) {
            // Conditional pattern base: prefix paths of every node of `rank`.
            FpTree cond(rank);  // only ranks above (smaller than) `rank` can appear
            std::vector<std::int32_t> path;
            for (std::int32_t n = tree.head[rank]; n >= 0;
                 n = tree.nodes[static_cast<std::size_t>(n)].next) {
                path.clear();
                for (std::int32_t p = tree.nodes[static_cast<std::size_t>(n)].parent; p > 0;
                     p = tree.nodes[static_cast<std::size_t>(p)].parent)
                    path.push_back(tree.nodes[static_cast<std::size_t>(p)].rank);
                std::reverse(path.begin(), path.end());
                if (!path.empty())
                    cond.insert(path, tree.nodes[static_cast<std::size_t>(n)].count);
            }
            fp_grow(cond, rank_to_item, min_count, max_size, suffix, out);
        }
        suffix.pop_back();
    }
}

}  // namespace detail

// All itemsets of size <= max_size with support in F at least ceil(s * |F|),
// mined with FP-growth.  The header table orders items by descending support,
// ties by ascending token.  Output is canonical: itemsets sorted by size,
// then lexicographically by item token.
inline std::vector<FrequentItemset> frequent_itemsets_f(const std::vector<Transaction>& f_txns,
                                                        const ItemTable& items, double s,
                                                        std::size_t max_size = 2) {
    if (!(s > 0.0 && s <= 1.0)) throw InvalidConfig("support threshold s must be in (0, 1]");
    if (f_txns.empty()) throw EmptyClass("frequent_itemsets_f requires a non-empty failed set");
    const auto n_f = static_cast<double>(f_txns.size());
    const auto min_count = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(s * n_f - 1e-9)));

    std::unordered_map<std::int32_t, std::uint64_t> support;
    for (const auto& txn : f_txns)
        for (std::int32_t id : txn) ++support[id];

    std::vector<std::int32_t> frequent;
    for (const auto& [id, count] : support)
        if (count >= min_count) frequent.push_back(id);
    std::sort(frequent.begin(), frequent.end(), [&](std::int32_t a, std::int32_t b) {
        if (support[a] != support[b]) return support[a] > support[b];
        return items.token(a) < items.token(b);
    });

    std::unordered_map<std::int32_t, std::int32_t> rank_of;
    for (std::size_t i = 0; i < frequent.size(); ++i)
        rank_of[frequent[i]] = static_cast<std::int32_t>(i);

    detail::FpTree tree(frequent.size());
    std::vector<std::int32_t> ranks;
    for (const auto& txn : f_txns) {
        ranks.clear();
        for (std::int32_t id : txn) {
            auto it = rank_of.find(id);
            if (it != rank_of.end()) ranks.push_back(it->second);
        }
        std::sort(ranks.begin(), ranks.end());
        tree.insert(ranks, 1);
    }

    std::vector<FrequentItemset> out;
    std::vector<std::int32_t> suffix;
    detail::fp_grow(tree, frequent, min_count, max_size, suffix, out);

    std::sort(out.begin(), out.end(), [&](const FrequentItemset& a, const FrequentItemset& b) {
        if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
        for (std::size_t i = 0; i < a.items.size(); ++i) {
            if (a.items[i] == b.items[i]) continue;
            return items.token(a.items[i]) < items.token(b.items[i]);
        }
        return false;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Support counting over C
// ---------------------------------------------------------------------------

// Exact containment counts in one streaming pass over the corpus.  Feature
// alignment makes each candidate an O(1) probe per row.
inline std::vector<std::uint64_t> count_support_c(const std::vector<FrequentItemset>& itemsets,
                                                  const std::vector<Transaction>& corpus,
                                                  const ItemTable& items) {
    std::vector<std::uint64_t> counts(itemsets.size(), 0);
    std::vector<std::pair<std::uint16_t, std::int32_t>> probes;  // flattened (feature, id)
    std::vector<std::size_t> sizes;
    probes.reserve(itemsets.size() * 2);
    sizes.reserve(itemsets.size());
    for (const auto& fi : itemsets) {
        sizes.push_back(fi.items.size());
        for (std::int32_t id : fi.items) probes.emplace_back(items.def(id).feature, id);
    }
    for (const auto& txn : corpus) {
        std::size_t p = 0;
        for (std::size_t i = 0; i < itemsets.size(); ++i) {
            bool all = true;
            for (std::size_t j = 0; j < sizes[i]; ++j) {
                const auto& [feature, id] = probes[p + j];
                if (txn[feature] != id) {
                    all = false;
                    break;
                }
            }
            counts[i] += all;
            p += sizes[i];
        }
    }
    return counts;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct AssociationRule {
    std::vector<std::int32_t> items;  // antecedent, ascending item ids
    Outcome target = Outcome::NotAtHome;
    std::uint64_t sup_f = 0;
    std::uint64_t sup_c = 0;
    double phi = 0.0;
    double ir = 0.0;
    double confidence = 0.0;
    bool increases = false;  // phi >= 1

    bool shares_item(const AssociationRule& other) const {
        for (std::int32_t a : items)
            for (std::int32_t b : other.items)
                if (a == b) return true;
        return false;
    }
};

// phi = (sup_F/|F|) * (|C|/sup_C); IR = max(phi, 1/phi); confidence
// = sup_F/sup_C, which equals phi * |F| / |C| identically.
inline AssociationRule score(std::vector<std::int32_t> itemset, std::uint64_t sup_f,
                             std::uint64_t sup_c, std::uint64_t n_f, std::uint64_t n_c,
                             Outcome target) {
    if (sup_f == 0 || n_f == 0) throw ZeroSupport("support in F must be positive");
    if (sup_c < sup_f) throw ZeroSupport("support in C cannot be below support in F");
    AssociationRule r;
    r.items = std::move(itemset);
    r.target = target;
    r.sup_f = sup_f;
    r.sup_c = sup_c;
    r.phi = (static_cast<double>(sup_f) / static_cast<double>(n_f)) *
            (static_cast<double>(n_c) / static_cast<double>(sup_c));
    r.ir = r.phi >= 1.0 ? r.phi : 1.0 / r.phi;
    r.confidence = static_cast<double>(sup_f) / static_cast<double>(sup_c);
    r.increases = r.phi >= 1.0;
    return r;
}

// ---------------------------------------------------------------------------
// Selection / filtering
// ---------------------------------------------------------------------------

// Whether the qualifying size-1 parent in the IR-gain condition must itself
// pass the min_IR filter (Selected) or may be any scored size-1 rule (All).
enum class ParentScope : std::uint8_t { Selected, All };

struct MinerConfig {
    double s = 0.1;           // relative support threshold within F
    double min_ir = 1.4;
    double delta_ir = 0.1;
    std::size_t max_size = 2;
    ParentScope parent_scope = ParentScope::Selected;

    void validate() const {
        if (!(s > 0.0 && s <= 1.0)) throw InvalidConfig("miner: s must be in (0, 1]");
        if (min_ir < 1.0) throw InvalidConfig("miner: min_ir must be >= 1");
        if (delta_ir < 0.0) throw InvalidConfig("miner: delta_ir must be >= 0");
        if (max_size < 1 || max_size > 2) throw InvalidConfig("miner: max_size must be 1 or 2");
    }
};

// Nested selection: every selected size-1 rule with the size-2 rules that
// qualify through it, both levels ordered by descending IR.  A size-2 rule
// sharing items with two parents appears under each.  `orphans` is only
// populated under ParentScope::All, for qualified size-2 rules with no
// selected parent to nest under.
struct RuleSelection {
    struct Entry {
        AssociationRule parent;
        std::vector<AssociationRule> children;
    };
    std::vector<Entry> entries;
    std::vector<AssociationRule> orphans;

    // Distinct selected rules (parents, children, orphans), each once.
    std::vector<AssociationRule> unique_rules() const {
        std::vector<AssociationRule> out;
        auto seen = [&out](const AssociationRule& r) {
            for (const auto& o : out)
                if (o.items == r.items) return true;
            return false;
        };
        for (const auto& e : entries) {
            if (!seen(e.parent)) out.push_back(e.parent);
            for (const auto& c : e.children)
                if (!seen(c)) out.push_back(c);
        }
        for (const auto& o : orphans)
            if (!seen(o)) out.push_back(o);
        return out;
    }
};

namespace detail {

inline void sort_rules_desc_ir(std::vector<AssociationRule>& rules) {
    std::sort(rules.begin(), rules.end(), [](const AssociationRule& a, const AssociationRule& b) {
        if (a.ir != b.ir) return a.ir > b.ir;
        return a.items < b.items;
    });
}

}  // namespace detail

inline RuleSelection filter_rules(const std::vector<AssociationRule>& scored,
                                  const MinerConfig& cfg) {
    cfg.validate();
    std::vector<AssociationRule> size1, size2;
    for (const auto& r : scored) {
        if (r.items.size() == 1) size1.push_back(r);
        else if (r.items.size() == 2) size2.push_back(r);
    }

    std::vector<AssociationRule> selected1;
    for (const auto& r : size1)
        if (r.ir >= cfg.min_ir) selected1.push_back(r);
    detail::sort_rules_desc_ir(selected1);

    const std::vector<AssociationRule>& parent_pool =
        cfg.parent_scope == ParentScope::Selected ? selected1 : size1;

    std::vector<AssociationRule> qualified2;
    for (const auto& r2 : size2) {
        if (r2.ir < cfg.min_ir) continue;
        bool ok = false;
        for (const auto& r1 : parent_pool)
            if (r2.shares_item(r1) && r2.ir - r1.ir >= cfg.delta_ir) {
                ok = true;
                break;
            }
        if (ok) qualified2.push_back(r2);
    }

    RuleSelection out;
    std::vector<char> nested(qualified2.size(), 0);
    for (const auto& p : selected1) {
        RuleSelection::Entry entry;
        entry.parent = p;
        for (std::size_t i = 0; i < qualified2.size(); ++i) {
            const auto& c = qualified2[i];
            if (!c.shares_item(p)) continue;
            if (cfg.parent_scope == ParentScope::Selected && !(c.ir - p.ir >= cfg.delta_ir))
                continue;
            entry.children.push_back(c);
            nested[i] = 1;
        }
        detail::sort_rules_desc_ir(entry.children);
        out.entries.push_back(std::move(entry));
    }
    for (std::size_t i = 0; i < qualified2.size(); ++i)
        if (!nested[i]) out.orphans.push_back(qualified2[i]);
    detail::sort_rules_desc_ir(out.orphans);
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end mining for one failure type
// ---------------------------------------------------------------------------

struct MinedRules {
    Outcome target = Outcome::NotAtHome;
    std::uint64_t n_f = 0;
    std::uint64_t n_c = 0;
    std::vector<AssociationRule> scored;  // every frequent itemset, scored
    RuleSelection selection;
};

inline MinedRules mine_rules(const ItemizedCorpus& corpus, const std::vector<Outcome>& labels,
                             Outcome target, const MinerConfig& cfg) {
    cfg.validate();
    if (!is_failure(target)) throw UsageError("mine_rules requires a failure outcome");
    if (labels.size() != corpus.txns.size())
        throw WidthMismatch("mine_rules: label count does not match transaction count");

    std::vector<Transaction> f_txns;
    for (std::size_t r = 0; r < labels.size(); ++r)
        if (labels[r] == target) f_txns.push_back(corpus.txns[r]);
    if (f_txns.empty())
        throw EmptyClass("no failed rows for outcome " + std::string(outcome_token(target)));

    MinedRules out;
    out.target = target;
    out.n_f = f_txns.size();
    out.n_c = corpus.txns.size();

    auto itemsets = frequent_itemsets_f(f_txns, corpus.items, cfg.s, cfg.max_size);
    auto sup_c = count_support_c(itemsets, corpus.txns, corpus.items);
    out.scored.reserve(itemsets.size());
    for (std::size_t i = 0; i < itemsets.size(); ++i)
        out.scored.push_back(
            score(itemsets[i].items, itemsets[i].sup_f, sup_c[i], out.n_f, out.n_c, target));
    out.selection = filter_rules(out.scored, cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct RenderedRule {
    int id = 0;
    int depth = 0;  // 0 = size-1 parent, 1 = nested size-2 child
    std::string tokens;  // child rows omit the item shared with the parent
    std::string consequent;
    std::uint64_t sup_f = 0;
    std::uint64_t sup_c = 0;
    double phi = 0.0;
    double ir = 0.0;
    double confidence = 0.0;
    bool increases = false;
};

namespace detail {

inline std::string rule_tokens(const AssociationRule& rule, const ItemTable& items,
                               const AssociationRule* parent) {
    std::string out;
    for (std::int32_t id : rule.items) {
        if (parent && parent->items.size() == 1 && parent->items[0] == id)
            continue;  // parent token omitted in the nested display
        if (!out.empty()) out += " & ";
        out += items.token(id);
    }
    return out;
}

}  // namespace detail

// Flattens a selection into display rows: sequential ids over the nested
// order, children indented one level with the shared item omitted.
inline std::vector<RenderedRule> render_rule_table(const RuleSelection& selection,
                                                   const ItemTable& items) {
    std::vector<RenderedRule> rows;
    int next_id = 1;
    auto push = [&rows, &next_id, &items](const AssociationRule& rule, int depth,
                                          const AssociationRule* parent) {
        RenderedRule r;
        r.id = next_id++;
        r.depth = depth;
        r.tokens = detail::rule_tokens(rule, items, parent);
        r.consequent = fail_token(rule.target);
        r.sup_f = rule.sup_f;
        r.sup_c = rule.sup_c;
        r.phi = rule.phi;
        r.ir = rule.ir;
        r.confidence = rule.confidence;
        r.increases = rule.increases;
        rows.push_back(std::move(r));
    };
    for (const auto& entry : selection.entries) {
        push(entry.parent, 0, nullptr);
        for (const auto& child : entry.children) push(child, 1, &entry.parent);
    }
    for (const auto& orphan : selection.orphans) push(orphan, 0, nullptr);
    return rows;
}

// Aligned human-readable table; confidence as a percent with 1 decimal, IR
// with 2 decimals, sign '+' when the rule increases the failure probability.
inline std::string format_rule_table(const std::vector<RenderedRule>& rows,
                                     std::uint64_t n_f, std::uint64_t n_c,
                                     const MinerConfig& cfg) {
    std::string head = "rules";
    std::size_t width = head.size();
    for (const auto& r : rows)
        width = std::max(width, r.tokens.size() + 4 * static_cast<std::size_t>(r.depth));
    std::string out;
    out += "|F| = " + std::to_string(n_f) + ", |C| = " + std::to_string(n_c) +
           ", s = " + format_double(cfg.s) + ", min_IR = " + format_double(cfg.min_ir) +
           ", delta_IR = " + format_double(cfg.delta_ir) + "\n";
    auto pad = [](const std::string& s, std::size_t w) {
        return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
    };
    auto lead = [](const std::string& s, std::size_t w) {
        return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
    };
    out += "  id  " + pad(head, width) + "  " + lead("conf%", 6) + "  " + lead("IR", 7) +
           "  sign\n";
    for (const auto& r : rows) {
        const std::string indent(4 * static_cast<std::size_t>(r.depth), ' ');
        out += lead(std::to_string(r.id), 4) + "  " + pad(indent + r.tokens, width) + "  " +
               lead(format_fixed(r.confidence * 100.0, 1), 6) + "  " +
               lead(format_fixed(r.ir, 2), 7) + (r.increases ? "  +" : "  -") + "\n";
    }
    return out;
}

}  // namespace lastmile
