// Tests for decile binning, itemization, frequent-itemset mining, rule
// scoring, selection filtering and table rendering.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lastmile/core.hpp"
#include "lastmile/rng.hpp"
#include "lastmile/rules.hpp"

using namespace lastmile;

namespace {

FeatureSchema numeric_schema(std::vector<std::string> names) {
    std::vector<FeatureSpec> specs;
    for (std::size_t i = 0; i < names.size(); ++i) {
        FeatureSpec s;
        s.code = "N" + std::to_string(i + 1);
        s.name = std::move(names[i]);
        s.kind = FeatureKind::Numerical;
        specs.push_back(std::move(s));
    }
    return FeatureSchema(specs);
}

FeatureSchema mixed_schema() {
    FeatureSpec num;
    num.code = "N1";
    num.name = "Duration";
    num.kind = FeatureKind::Numerical;
    FeatureSpec cat;
    cat.code = "K1";
    cat.name = "Channel";
    cat.kind = FeatureKind::Categorical;
    return FeatureSchema({num, cat});
}

Dataset single_column(const std::vector<double>& values) {
    Dataset data;
    data.schema = numeric_schema({"X"});
    for (std::size_t i = 0; i < values.size(); ++i)
        data.append_row("stop-" + std::to_string(i), std::vector<double>{values[i]},
                        Outcome::Success);
    return data;
}

}  // namespace

TEST_CASE("decile edges interpolate between order statistics") {
    std::vector<double> values(100);
    for (std::size_t i = 0; i < 100; ++i) values[i] = static_cast<double>(i + 1);
    // Shuffle to prove fitting is order independent.
    Rng rng(7);
    rng.shuffle(values);

    const auto binner = DecileBinner::fit(single_column(values));
    REQUIRE(binner.width() == 1);
    REQUIRE_FALSE(binner.categorical(0));
    REQUIRE(binner.n_bins(0) == 10);

    const auto& bins = binner.feature(0);
    REQUIRE(bins.lo == 1.0);
    REQUIRE(bins.hi == 100.0);
    REQUIRE(bins.edges.size() == 9);
    for (int d = 1; d <= 9; ++d)
        REQUIRE(bins.edges[static_cast<std::size_t>(d) - 1] ==
                Catch::Approx(10.0 * d + 0.5).epsilon(1e-12));

    REQUIRE(binner.bin_label(0, 1) == "[1.0, 10.5]");
    REQUIRE(binner.bin_label(0, 2) == "(10.5, 20.5]");
    REQUIRE(binner.bin_label(0, 10) == "(90.5, 100.0]");

    // Edge values land in the bin they close: (a, b] contains b.
    REQUIRE(binner.bin_of(0, 10.5) == 1);
    REQUIRE(binner.bin_of(0, 10.6) == 2);
    REQUIRE(binner.bin_of(0, 90.5) == 9);
    REQUIRE(binner.bin_of(0, 1.0) == 1);
    REQUIRE(binner.bin_of(0, 100.0) == 10);
    // Out-of-range values clamp into the first / last bin.
    REQUIRE(binner.bin_of(0, -5.0) == 1);
    REQUIRE(binner.bin_of(0, 1e9) == 10);

    REQUIRE_THROWS_AS(binner.bin_label(0, 0), UsageError);
    REQUIRE_THROWS_AS(binner.bin_label(0, 11), UsageError);
}

TEST_CASE("decile fitting merges duplicate edges and handles constants") {
    SECTION("constant feature collapses to one bin") {
        const auto binner = DecileBinner::fit(single_column(std::vector<double>(25, 7.0)));
        REQUIRE(binner.n_bins(0) == 1);
        REQUIRE(binner.feature(0).edges.empty());
        REQUIRE(binner.bin_label(0, 1) == "[7.0, 7.0]");
        REQUIRE(binner.bin_of(0, 7.0) == 1);
        REQUIRE(binner.bin_of(0, -3.0) == 1);
        REQUIRE(binner.bin_of(0, 99.0) == 1);
    }

    SECTION("heavy duplication drops repeated and trailing edges") {
        std::vector<double> values;
        values.insert(values.end(), 80, 1.0);
        values.insert(values.end(), 20, 2.0);
        const auto binner = DecileBinner::fit(single_column(values));
        // Quantiles 0.1..0.7 all hit the run of 1.0 (kept once), 0.8 lands
        // exactly between the runs, and 0.9 equals the max (dropped).
        const auto& bins = binner.feature(0);
        REQUIRE(bins.edges == std::vector<double>{1.0, 1.5});
        REQUIRE(binner.n_bins(0) == 3);
        REQUIRE(binner.bin_label(0, 1) == "[1.0, 1.0]");
        REQUIRE(binner.bin_label(0, 2) == "(1.0, 1.5]");
        REQUIRE(binner.bin_label(0, 3) == "(1.5, 2.0]");
        REQUIRE(binner.bin_of(0, 1.0) == 1);
        REQUIRE(binner.bin_of(0, 1.2) == 2);
        REQUIRE(binner.bin_of(0, 2.0) == 3);
    }

    SECTION("missing-value sentinels participate like any number") {
        std::vector<double> values;
        values.insert(values.end(), 5, kMissingSentinel);
        values.insert(values.end(), 5, 100.0);
        const auto binner = DecileBinner::fit(single_column(values));
        const auto& bins = binner.feature(0);
        REQUIRE(bins.edges == std::vector<double>{-100.0, 0.0});
        REQUIRE(binner.bin_of(0, kMissingSentinel) == 1);
        REQUIRE(binner.bin_label(0, 1) == "[-100.0, -100.0]");
        REQUIRE(binner.bin_of(0, -50.0) == 2);
        REQUIRE(binner.bin_of(0, 100.0) == 3);
    }

    SECTION("categorical features reject bin queries") {
        Dataset data;
        data.schema = mixed_schema();
        data.append_row("s", std::vector<double>{1.0, 0.0}, Outcome::Success);
        const auto binner = DecileBinner::fit(data);
        REQUIRE(binner.categorical(1));
        REQUIRE_THROWS_AS(binner.bin_of(1, 0.0), UsageError);
        REQUIRE_THROWS_AS(binner.n_bins(1), UsageError);
        REQUIRE_THROWS_AS(binner.bin_label(1, 1), UsageError);
    }

    SECTION("empty corpus is rejected") {
        Dataset data;
        data.schema = numeric_schema({"X"});
        REQUIRE_THROWS_AS(DecileBinner::fit(data), EmptyClass);
    }
}

TEST_CASE("item table interns once and renders display tokens") {
    const auto schema = mixed_schema();
    ItemTable items;
    const auto d3 = items.intern(0, true, 3, schema);
    const auto v1 = items.intern(1, false, 1, schema);
    const auto miss = items.intern(1, false, -100, schema);
    REQUIRE(items.size() == 3);
    REQUIRE(items.token(d3) == "Duration_D3");
    REQUIRE(items.token(v1) == "Channel_V1");
    REQUIRE(items.token(miss) == "Channel_V-100");
    // Re-interning an existing item returns the same id.
    REQUIRE(items.intern(0, true, 3, schema) == d3);
    REQUIRE(items.size() == 3);
    REQUIRE(items.def(v1).feature == 1);
    REQUIRE_FALSE(items.def(v1).decile);
    REQUIRE(items.def(v1).value == 1);
}

TEST_CASE("itemize keeps feature alignment and maps bins and codes") {
    Dataset data;
    data.schema = mixed_schema();
    for (int i = 0; i < 30; ++i)
        data.append_row("s" + std::to_string(i),
                        std::vector<double>{static_cast<double>(i * 10), double(i % 3)},
                        Outcome::Success);
    const auto binner = DecileBinner::fit(data);
    const auto corpus = itemize_corpus(data, binner);
    REQUIRE(corpus.txns.size() == 30);
    for (std::size_t r = 0; r < corpus.txns.size(); ++r) {
        const auto& txn = corpus.txns[r];
        REQUIRE(txn.size() == 2);
        // Element f is always an item of feature f.
        REQUIRE(corpus.items.def(txn[0]).feature == 0);
        REQUIRE(corpus.items.def(txn[1]).feature == 1);
        REQUIRE(corpus.items.def(txn[0]).decile);
        REQUIRE(corpus.items.def(txn[0]).value == binner.bin_of(0, data.at(r, 0)));
        REQUIRE_FALSE(corpus.items.def(txn[1]).decile);
        REQUIRE(corpus.items.def(txn[1]).value == static_cast<std::int32_t>(r % 3));
    }
    // Row width must match the fitted binner.
    ItemTable scratch;
    std::vector<double> bad{1.0, 2.0, 3.0};
    REQUIRE_THROWS_AS(itemize(bad, binner, data.schema, scratch), WidthMismatch);
}

namespace {

// Brute-force frequent itemsets of size <= 2 over feature-aligned
// transactions, in the miner's canonical order.
std::vector<FrequentItemset> brute_force_frequent(const std::vector<Transaction>& txns,
                                                  const ItemTable& items,
                                                  std::uint64_t min_count,
                                                  std::size_t max_size) {
    std::set<std::int32_t> universe;
    for (const auto& txn : txns)
        for (auto id : txn) universe.insert(id);
    const std::vector<std::int32_t> ids(universe.begin(), universe.end());

    auto support_of = [&](const std::vector<std::int32_t>& itemset) {
        std::uint64_t n = 0;
        for (const auto& txn : txns) {
            bool all = true;
            for (auto id : itemset)
                if (txn[items.def(id).feature] != id) {
                    all = false;
                    break;
                }
            n += all;
        }
        return n;
    };

    std::vector<FrequentItemset> out;
    for (auto id : ids) {
        const auto sup = support_of({id});
        if (sup >= min_count) out.push_back({{id}, sup});
    }
    if (max_size >= 2) {
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                std::vector<std::int32_t> pair{ids[i], ids[j]};
                const auto sup = support_of(pair);
                if (sup >= min_count) out.push_back({pair, sup});
            }
    }
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

}  // namespace

TEST_CASE("frequent itemsets match an exhaustive count on random corpora") {
    const auto schema =
        numeric_schema({"Alpha", "Bravo", "Charlie"});  // names drive tie-breaking
    for (std::uint64_t trial = 0; trial < 24; ++trial) {
        Rng rng(derive_seed(20260815, "fp-trial", trial));
        const std::size_t n_txns = 15 + rng.index(26);
        const std::size_t levels = 2 + rng.index(3);
        const double s = trial % 2 == 0 ? 0.1 : 0.3;

        ItemTable items;
        std::vector<Transaction> txns;
        for (std::size_t r = 0; r < n_txns; ++r) {
            Transaction txn(3);
            for (std::uint16_t f = 0; f < 3; ++f)
                txn[f] = items.intern(f, true, static_cast<std::int32_t>(1 + rng.index(levels)),
                                      schema);
            txns.push_back(std::move(txn));
        }

        const auto min_count = std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(
                   std::ceil(s * static_cast<double>(n_txns) - 1e-9)));
        const auto expected = brute_force_frequent(txns, items, min_count, 2);
        const auto got = frequent_itemsets_f(txns, items, s, 2);

        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i].items == expected[i].items);
            REQUIRE(got[i].sup_f == expected[i].sup_f);
        }

        // Corpus-side support counting agrees with direct containment.
        const auto sup_c = count_support_c(got, txns, items);
        for (std::size_t i = 0; i < got.size(); ++i) {
            std::uint64_t direct = 0;
            for (const auto& txn : txns) {
                bool all = true;
                for (auto id : got[i].items)
                    if (txn[items.def(id).feature] != id) {
                        all = false;
                        break;
                    }
                direct += all;
            }
            REQUIRE(sup_c[i] == direct);
        }
    }
}

TEST_CASE("minimum support count rounds up without drifting on exact multiples") {
    const auto schema = numeric_schema({"X"});
    ItemTable items;
    const auto a = items.intern(0, true, 1, schema);
    const auto b = items.intern(0, true, 2, schema);
    const auto c = items.intern(0, true, 3, schema);
    std::vector<Transaction> txns;
    txns.insert(txns.end(), 2, Transaction{a});
    txns.insert(txns.end(), 3, Transaction{b});
    txns.insert(txns.end(), 5, Transaction{c});  // |F| = 10

    auto tokens_of = [&](const std::vector<FrequentItemset>& sets) {
        std::vector<std::string> out;
        for (const auto& fi : sets) out.push_back(items.token(fi.items[0]));
        return out;
    };

    // s = 0.25 -> threshold 3: the count-2 item drops out.
    REQUIRE(tokens_of(frequent_itemsets_f(txns, items, 0.25)) ==
            std::vector<std::string>{"X_D2", "X_D3"});
    // s = 0.3 is an exact multiple (3.0); the epsilon keeps it at 3, not 4.
    REQUIRE(tokens_of(frequent_itemsets_f(txns, items, 0.3)) ==
            std::vector<std::string>{"X_D2", "X_D3"});
    // s = 0.31 -> threshold 4.
    REQUIRE(tokens_of(frequent_itemsets_f(txns, items, 0.31)) ==
            std::vector<std::string>{"X_D3"});
    // Tiny s floors at one occurrence.
    REQUIRE(tokens_of(frequent_itemsets_f(txns, items, 0.001)) ==
            std::vector<std::string>{"X_D1", "X_D2", "X_D3"});

    REQUIRE_THROWS_AS(frequent_itemsets_f(txns, items, 0.0), InvalidConfig);
    REQUIRE_THROWS_AS(frequent_itemsets_f(txns, items, 1.2), InvalidConfig);
    REQUIRE_THROWS_AS(frequent_itemsets_f({}, items, 0.1), EmptyClass);
}

TEST_CASE("rule scoring follows the interest-ratio definitions") {
    SECTION("pinned example") {
        const auto r = score({7}, 2, 4, 2, 10, Outcome::NotAtHome);
        REQUIRE(r.phi == Catch::Approx(2.5).epsilon(1e-12));
        REQUIRE(r.ir == Catch::Approx(2.5).epsilon(1e-12));
        REQUIRE(r.confidence == Catch::Approx(0.5).epsilon(1e-12));
        REQUIRE(r.increases);
        REQUIRE(r.sup_f == 2);
        REQUIRE(r.sup_c == 4);
        REQUIRE(r.target == Outcome::NotAtHome);
    }

    SECTION("protective rules invert into the interest ratio") {
        const auto r = score({7}, 1, 10, 4, 10, Outcome::ServiceRefused);
        REQUIRE(r.phi == Catch::Approx(0.25).epsilon(1e-12));
        REQUIRE(r.ir == Catch::Approx(4.0).epsilon(1e-12));
        REQUIRE_FALSE(r.increases);
    }

    SECTION("confidence equals phi scaled by the class share") {
        Rng rng(derive_seed(20260815, "conf-identity"));
        for (int t = 0; t < 50; ++t) {
            const std::uint64_t n_c = 50 + rng.below(1000);
            const std::uint64_t n_f = 1 + rng.below(n_c / 2);
            const std::uint64_t sup_c = 1 + rng.below(n_c);
            const std::uint64_t sup_f = 1 + rng.below(std::min(sup_c, n_f));
            const auto r = score({1}, sup_f, sup_c, n_f, n_c, Outcome::NotAtHome);
            REQUIRE(r.confidence ==
                    Catch::Approx(r.phi * static_cast<double>(n_f) / static_cast<double>(n_c))
                        .epsilon(1e-12));
        }
    }

    SECTION("degenerate supports are rejected") {
        REQUIRE_THROWS_AS(score({1}, 0, 4, 10, 20, Outcome::NotAtHome), ZeroSupport);
        REQUIRE_THROWS_AS(score({1}, 1, 4, 0, 20, Outcome::NotAtHome), ZeroSupport);
        REQUIRE_THROWS_AS(score({1}, 5, 4, 10, 20, Outcome::NotAtHome), ZeroSupport);
    }
}

TEST_CASE("miner configuration bounds are validated") {
    MinerConfig ok;
    REQUIRE_NOTHROW(ok.validate());
    REQUIRE(ok.s == 0.1);
    REQUIRE(ok.min_ir == 1.4);
    REQUIRE(ok.delta_ir == 0.1);
    REQUIRE(ok.max_size == 2);
    REQUIRE(ok.parent_scope == ParentScope::Selected);

    auto broken = [](auto mutate) {
        MinerConfig cfg;
        mutate(cfg);
        return cfg;
    };
    REQUIRE_THROWS_AS(broken([](MinerConfig& c) { c.s = 0.0; }).validate(), InvalidConfig);
    REQUIRE_THROWS_AS(broken([](MinerConfig& c) { c.s = 1.5; }).validate(), InvalidConfig);
    REQUIRE_THROWS_AS(broken([](MinerConfig& c) { c.min_ir = 0.9; }).validate(), InvalidConfig);
    REQUIRE_THROWS_AS(broken([](MinerConfig& c) { c.delta_ir = -0.1; }).validate(),
                      InvalidConfig);
    REQUIRE_THROWS_AS(broken([](MinerConfig& c) { c.max_size = 0; }).validate(), InvalidConfig);
    REQUIRE_THROWS_AS(broken([](MinerConfig& c) { c.max_size = 3; }).validate(), InvalidConfig);
}

namespace {

struct FilterFixture {
    FeatureSchema schema = numeric_schema({"A", "B", "C", "D", "E", "F"});
    ItemTable items;
    std::int32_t a, b, c, d, e, f;

    FilterFixture() {
        a = items.intern(0, true, 1, schema);
        b = items.intern(1, true, 1, schema);
        c = items.intern(2, true, 1, schema);
        d = items.intern(3, true, 1, schema);
        e = items.intern(4, true, 1, schema);
        f = items.intern(5, true, 1, schema);
    }

    static AssociationRule rule(std::vector<std::int32_t> itemset, double ir,
                                double confidence = 0.25) {
        AssociationRule r;
        std::sort(itemset.begin(), itemset.end());
        r.items = std::move(itemset);
        r.target = Outcome::NotAtHome;
        r.sup_f = 8;
        r.sup_c = 32;
        r.phi = ir;  // all fixture rules are risk-increasing
        r.ir = ir;
        r.confidence = confidence;
        r.increases = true;
        return r;
    }

    // Size-1 rules: A strong, B medium, C below the bar.  Size-2 rules cover
    // nesting, the gain gap, multi-parent sharing and orphan cases.
    std::vector<AssociationRule> scored() const {
        return {
            rule({a}, 2.0),       // parent P_A
            rule({b}, 1.5),       // parent P_B
            rule({c}, 1.1),       // below min_ir: parent only under ParentScope::All
            rule({a, b}, 2.3),    // qualifies through A (+0.3) and B (+0.8)
            rule({a, d}, 2.05),   // gap vs A is 0.05 < delta_ir: rejected
            rule({a, f}, 2.6),    // qualifies through A (+0.6)
            rule({c, e}, 1.9),    // only sharing rule is C; needs ParentScope::All
            rule({a, e}, 1.3),    // below min_ir outright
        };
    }
};

std::vector<std::vector<std::int32_t>> item_lists(const std::vector<AssociationRule>& rules) {
    std::vector<std::vector<std::int32_t>> out;
    for (const auto& r : rules) out.push_back(r.items);
    return out;
}

}  // namespace

TEST_CASE("rule filtering nests gains under selected parents") {
    FilterFixture fx;
    MinerConfig cfg;  // min_ir 1.4, delta_ir 0.1, ParentScope::Selected

    const auto sel = filter_rules(fx.scored(), cfg);

    REQUIRE(sel.entries.size() == 2);
    // Parents in descending interest ratio.
    REQUIRE(sel.entries[0].parent.items == std::vector<std::int32_t>{fx.a});
    REQUIRE(sel.entries[1].parent.items == std::vector<std::int32_t>{fx.b});

    // A's children, descending IR; the 2.05 rule misses the 0.1 gap.
    REQUIRE(item_lists(sel.entries[0].children) ==
            std::vector<std::vector<std::int32_t>>{{fx.a, fx.f}, {fx.a, fx.b}});
    // The shared pair also nests under B.
    REQUIRE(item_lists(sel.entries[1].children) ==
            std::vector<std::vector<std::int32_t>>{{fx.a, fx.b}});

    // {c, e} cannot qualify: its only sharing parent is unselected.
    REQUIRE(sel.orphans.empty());

    const auto unique = sel.unique_rules();
    REQUIRE(unique.size() == 4);  // A, B, {a,f}, {a,b} each once

    SECTION("a wider gap threshold prunes the weaker child") {
        MinerConfig strict = cfg;
        strict.delta_ir = 0.5;
        const auto tight = filter_rules(fx.scored(), strict);
        REQUIRE(tight.entries.size() == 2);
        // Only {a,f} (+0.6 over A) and {a,b} (+0.8 over B) clear the gap.
        REQUIRE(item_lists(tight.entries[0].children) ==
                std::vector<std::vector<std::int32_t>>{{fx.a, fx.f}});
        REQUIRE(item_lists(tight.entries[1].children) ==
                std::vector<std::vector<std::int32_t>>{{fx.a, fx.b}});
    }

    SECTION("a higher bar removes parents and their nest") {
        MinerConfig high = cfg;
        high.min_ir = 1.9;
        const auto sel2 = filter_rules(fx.scored(), high);
        REQUIRE(sel2.entries.size() == 1);
        REQUIRE(sel2.entries[0].parent.items == std::vector<std::int32_t>{fx.a});
        REQUIRE(item_lists(sel2.entries[0].children) ==
                std::vector<std::vector<std::int32_t>>{{fx.a, fx.f}, {fx.a, fx.b}});
    }
}

TEST_CASE("parent scope All widens qualification and produces orphans") {
    FilterFixture fx;
    // A pair can qualify through any scored size-1 rule under All, and the
    // per-parent gap check disappears from display nesting.
    const std::vector<AssociationRule> scored = {
        FilterFixture::rule({fx.a}, 2.0),        // selected parent
        FilterFixture::rule({fx.b}, 1.5),        // selected parent
        FilterFixture::rule({fx.c}, 1.1),        // below min_ir
        FilterFixture::rule({fx.a, fx.b}, 1.65), // gap vs A negative, vs B +0.15
        FilterFixture::rule({fx.c, fx.e}, 1.9),  // shares only the unselected C
    };

    MinerConfig selected_scope;  // defaults
    const auto strict = filter_rules(scored, selected_scope);
    REQUIRE(strict.entries.size() == 2);
    // Under Selected, {a,b} only displays under the parent it gains against.
    REQUIRE(item_lists(strict.entries[0].children).empty());
    REQUIRE(item_lists(strict.entries[1].children) ==
            std::vector<std::vector<std::int32_t>>{{fx.a, fx.b}});
    // {c,e} cannot qualify at all: its only sharing size-1 rule is unselected.
    REQUIRE(strict.orphans.empty());
    REQUIRE(strict.unique_rules().size() == 3);

    MinerConfig all_scope;
    all_scope.parent_scope = ParentScope::All;
    const auto wide = filter_rules(scored, all_scope);
    REQUIRE(wide.entries.size() == 2);
    // {a,b} now also displays under A, where its gap is negative.
    REQUIRE(item_lists(wide.entries[0].children) ==
            std::vector<std::vector<std::int32_t>>{{fx.a, fx.b}});
    REQUIRE(item_lists(wide.entries[1].children) ==
            std::vector<std::vector<std::int32_t>>{{fx.a, fx.b}});
    // {c,e} qualifies through C (1.9 - 1.1 = 0.8) but has no selected parent
    // to nest under: it surfaces as an orphan.
    REQUIRE(item_lists(wide.orphans) ==
            std::vector<std::vector<std::int32_t>>{{fx.c, fx.e}});
    REQUIRE(wide.unique_rules().size() == 4);
}

TEST_CASE("rendered tables use sequential ids and omit the shared token") {
    FilterFixture fx;
    MinerConfig cfg;
    const auto sel = filter_rules(fx.scored(), cfg);
    const auto rows = render_rule_table(sel, fx.items);

    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i < rows.size(); ++i)
        REQUIRE(rows[i].id == static_cast<int>(i) + 1);

    REQUIRE(rows[0].depth == 0);
    REQUIRE(rows[0].tokens == "A_D1");
    REQUIRE(rows[1].depth == 1);
    REQUIRE(rows[1].tokens == "F_D1");  // shared A_D1 omitted
    REQUIRE(rows[2].depth == 1);
    REQUIRE(rows[2].tokens == "B_D1");
    REQUIRE(rows[3].depth == 0);
    REQUIRE(rows[3].tokens == "B_D1");
    REQUIRE(rows[4].depth == 1);
    REQUIRE(rows[4].tokens == "A_D1");  // same pair, B_D1 omitted here
    for (const auto& r : rows) REQUIRE(r.consequent == "FAIL_NAH");

    const auto table = format_rule_table(rows, 50, 500, cfg);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < table.size()) {
        const auto nl = table.find('\n', pos);
        lines.push_back(table.substr(pos, nl - pos));
        pos = nl + 1;
    }
    REQUIRE(lines.size() == 7);
    REQUIRE(lines[0] == "|F| = 50, |C| = 500, s = 0.1, min_IR = 1.4, delta_IR = 0.1");
    REQUIRE(lines[1] == "  id  rules      conf%       IR  sign");
    REQUIRE(lines[2] == "   1  A_D1        25.0     2.00  +");
    REQUIRE(lines[3] == "   2      F_D1    25.0     2.60  +");
    REQUIRE(lines[4] == "   3      B_D1    25.0     2.30  +");
    REQUIRE(lines[5] == "   4  B_D1        25.0     1.50  +");
    REQUIRE(lines[6] == "   5      A_D1    25.0     2.30  +");
}

TEST_CASE("mining end to end surfaces a planted association") {
    // 40 stops, two features: a categorical flag and a constant numeric.
    // Flag=1 concentrates in the failed class.
    Dataset data;
    data.schema = mixed_schema();
    int made = 0;
    auto add = [&](double flag, Outcome label) {
        data.append_row("s" + std::to_string(made++), std::vector<double>{60.0, flag}, label);
    };
    for (int i = 0; i < 8; ++i) add(1.0, Outcome::NotAtHome);
    for (int i = 0; i < 2; ++i) add(0.0, Outcome::NotAtHome);
    for (int i = 0; i < 4; ++i) add(1.0, Outcome::Success);
    for (int i = 0; i < 26; ++i) add(0.0, Outcome::Success);

    const auto binner = fit_deciles(data);
    const auto corpus = itemize_corpus(data, binner);
    MinerConfig cfg;

    const auto mined = mine_rules(corpus, data.labels, Outcome::NotAtHome, cfg);
    REQUIRE(mined.n_f == 10);
    REQUIRE(mined.n_c == 40);
    // Singles: Channel_V1, Channel_V0, Duration_D1; pairs of each flag with
    // the constant bin.
    REQUIRE(mined.scored.size() == 5);

    // phi(Channel_V1) = (8/10) * (40/12) = 2.666...
    const AssociationRule* flag_rule = nullptr;
    for (const auto& r : mined.scored)
        if (r.items.size() == 1 && corpus.items.token(r.items[0]) == "Channel_V1")
            flag_rule = &r;
    REQUIRE(flag_rule != nullptr);
    REQUIRE(flag_rule->sup_f == 8);
    REQUIRE(flag_rule->sup_c == 12);
    REQUIRE(flag_rule->phi == Catch::Approx(8.0 / 10.0 * 40.0 / 12.0).epsilon(1e-12));
    REQUIRE(flag_rule->increases);

    // Selected parents: the protective Channel_V0 (IR 3.5) outranks the
    // planted Channel_V1 (IR 2.67); the constant bin scores IR 1.0.
    std::vector<std::string> parents;
    for (const auto& entry : mined.selection.entries) {
        REQUIRE(entry.parent.items.size() == 1);
        parents.push_back(corpus.items.token(entry.parent.items[0]));
        // Both pairs tie their parent's IR exactly, so no child clears the gap.
        REQUIRE(entry.children.empty());
    }
    REQUIRE(parents == std::vector<std::string>{"Channel_V0", "Channel_V1"});
    REQUIRE(mined.selection.orphans.empty());

    SECTION("failure-only targets and aligned labels are enforced") {
        REQUIRE_THROWS_AS(mine_rules(corpus, data.labels, Outcome::Success, cfg), UsageError);
        std::vector<Outcome> short_labels(data.labels.begin(), data.labels.end() - 1);
        REQUIRE_THROWS_AS(mine_rules(corpus, short_labels, Outcome::NotAtHome, cfg),
                          WidthMismatch);
        try {
            mine_rules(corpus, data.labels, Outcome::ServiceRefused, cfg);
            FAIL("expected an empty-class error");
        } catch (const EmptyClass& e) {
            REQUIRE(std::string(e.what()).find("no failed rows") != std::string::npos);
        }
    }
}
