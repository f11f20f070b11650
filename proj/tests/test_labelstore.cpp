#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "daedalus/error.hpp"
#include "daedalus/labelstore.hpp"
#include "daedalus/random.hpp"
#include "support.hpp"

using namespace daedalus;
using namespace daedalus::testing;
using nlohmann::json;

namespace {

std::vector<std::string> universe(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(toy_id(i));
    return ids;
}

LabelStore::Clock fixed_clock() {
    return [] { return std::string("2024-01-01T00:00:00Z"); };
}

AlphabetDefinition defects() {
    AlphabetDefinition def;
    def.name = "Defects";
    def.labels = {{std::nullopt, "crack", "#ff0000", std::nullopt},
                  {std::nullopt, "pore", "#00ff00", std::string("gas inclusion")},
                  {std::nullopt, "clean", "#0000ff", std::nullopt}};
    return def;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::io;
}

std::vector<std::string> slice_ids(const std::vector<std::string>& ids, std::size_t begin, std::size_t end) {
    return {ids.begin() + static_cast<std::ptrdiff_t>(begin), ids.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace

TEST(LabelStore, CreateAssignsIdsAndLowercasesColours) {
    LabelStore store(universe(10), {}, fixed_clock());
    auto def = defects();
    def.labels[0].color = "#FF0000";
    auto a = store.upsert_alphabet(def, "ana");
    EXPECT_EQ(a.id, 1u);
    EXPECT_EQ(a.name, "Defects");
    ASSERT_EQ(a.labels.size(), 3u);
    EXPECT_EQ(a.labels[0].id, 1u);
    EXPECT_EQ(a.labels[2].id, 3u);
    EXPECT_EQ(a.labels[0].color, "#ff0000");
    EXPECT_EQ(a.created_by, "ana");
    EXPECT_EQ(store.log_position(), 1u);
    auto b = store.upsert_alphabet({std::nullopt, "Other", {{std::nullopt, "x", "#123456", std::nullopt}}}, "ana");
    EXPECT_EQ(b.id, 2u);
    EXPECT_EQ(b.labels[0].id, 4u);
}

TEST(LabelStore, DefinitionValidation) {
    LabelStore store(universe(10), {"Lot"}, fixed_clock());
    auto bad = defects();
    bad.name = "";
    bad.labels[1].name = "crack";
    bad.labels[2].color = "blue";
    try {
        store.upsert_alphabet(bad, "x");
        FAIL() << "expected a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
        EXPECT_EQ(e.details().size(), 3u);
    }
    EXPECT_EQ(code_of([&] { store.upsert_alphabet({std::nullopt, "Empty", {}}, "x"); }), ErrorCode::validation);
    auto reserved = defects();
    reserved.name = "Lot";
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(reserved, "x"); }), ErrorCode::validation);
    reserved.name = "UNLABELED";
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(reserved, "x"); }), ErrorCode::validation);
    auto unl = defects();
    unl.labels[0].name = "UNLABELED";
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(unl, "x"); }), ErrorCode::validation);
    auto same_colour = defects();
    same_colour.labels[1].color = "#FF0000";
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(same_colour, "x"); }), ErrorCode::validation);
    EXPECT_EQ(store.log_position(), 0u);
}

TEST(LabelStore, DuplicateNameAndUnknownIds) {
    LabelStore store(universe(10), {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(defects(), "x"); }), ErrorCode::conflict);
    auto ghost = defects();
    ghost.id = 99;
    ghost.name = "Ghost";
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(ghost, "x"); }), ErrorCode::not_found);
    auto stray = defects();
    stray.id = a.id;
    stray.labels[0].id = 77;
    EXPECT_EQ(code_of([&] { store.upsert_alphabet(stray, "x"); }), ErrorCode::not_found);
    const auto ids = universe(10);
    EXPECT_EQ(code_of([&] { store.assign(ids, a.id, 77, "x"); }), ErrorCode::not_found);
    EXPECT_EQ(code_of([&] { store.assign(ids, 5, 1, "x"); }), ErrorCode::not_found);
    std::vector<std::string> unknown{"T00001", "nope"};
    try {
        store.assign(unknown, a.id, 1, "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
        EXPECT_EQ(e.details(), std::vector<std::string>{"nope"});
    }
    EXPECT_EQ(store.log_position(), 1u);
}

TEST(LabelStore, RenameAndRecolourKeepAssignments) {
    LabelStore store(universe(20), {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    const auto ids = universe(20);
    store.assign(slice_ids(ids, 0, 5), a.id, a.labels[0].id, "x");

    AlphabetDefinition edit;
    edit.id = a.id;
    edit.name = "Surface defects";
    for (const auto& l : a.labels) edit.labels.push_back({l.id, l.name, l.color, l.description});
    edit.labels[0].name = "fracture";
    edit.labels[0].color = "#aa0000";
    edit.labels.push_back({std::nullopt, "chip", "#abcdef", std::nullopt});
    auto b = store.upsert_alphabet(edit, "y");
    EXPECT_EQ(b.id, a.id);
    EXPECT_EQ(b.name, "Surface defects");
    EXPECT_EQ(b.labels[0].id, a.labels[0].id);
    EXPECT_EQ(b.labels[0].name, "fracture");
    EXPECT_EQ(b.labels[3].id, 4u);
    EXPECT_EQ(b.created_by, "x");
    EXPECT_EQ(store.query_by_label(a.id, a.labels[0].id), slice_ids(ids, 0, 5));

    AlphabetDefinition same{b.id, b.name, {}};
    for (const auto& l : b.labels) same.labels.push_back({l.id, l.name, l.color, l.description});
    const auto seq = store.log_position();
    store.upsert_alphabet(same, "y");
    EXPECT_EQ(store.log_position(), seq) << "an identical update is not logged";
    EXPECT_FALSE(store.slice("Defects"));
    EXPECT_TRUE(store.slice("Surface defects"));
}

TEST(LabelStore, RemovingAssignedLabelNeedsForce) {
    LabelStore store(universe(20), {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    const auto ids = universe(20);
    store.assign(slice_ids(ids, 0, 4), a.id, a.labels[1].id, "x");
    store.assign(slice_ids(ids, 4, 6), a.id, a.labels[0].id, "x");

    AlphabetDefinition edit;
    edit.id = a.id;
    edit.name = a.name;
    edit.labels = {{a.labels[0].id, "crack", "#ff0000", std::nullopt}};
    try {
        store.upsert_alphabet(edit, "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::conflict);
        ASSERT_EQ(e.details().size(), 1u);
        EXPECT_NE(e.details()[0].find("4 assignment"), std::string::npos);
    }
    store.upsert_alphabet(edit, "x", true);
    const auto slice = store.slice(a.id);
    EXPECT_EQ(slice.assignments.size(), 2u);
    EXPECT_EQ(store.query_by_label(a.id, std::nullopt).size(), 18u);

    // Unassigned labels go without force.
    edit.labels.push_back({std::nullopt, "spare", "#010101", std::nullopt});
    auto b = store.upsert_alphabet(edit, "x");
    edit.labels.pop_back();
    edit.labels[0].id = b.labels[0].id;
    EXPECT_NO_THROW(store.upsert_alphabet(edit, "x"));
}

TEST(LabelStore, AssignCountsChangesAndKeepsOneLabel) {
    const auto ids = universe(1000);
    LabelStore store(ids, {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    const auto crack = a.labels[0].id, pore = a.labels[1].id;

    EXPECT_EQ(store.assign(slice_ids(ids, 0, 500), a.id, crack, "x"), 500u);
    // 150 already crack, 350 newly labelled.
    EXPECT_EQ(store.assign(slice_ids(ids, 350, 850), a.id, crack, "x"), 350u);
    const auto seq = store.log_position();
    EXPECT_EQ(store.assign(slice_ids(ids, 0, 850), a.id, crack, "x"), 0u);
    EXPECT_EQ(store.log_position(), seq);
    // Relabelling moves particles out of their old label.
    EXPECT_EQ(store.assign(slice_ids(ids, 800, 900), a.id, pore, "x"), 100u);
    EXPECT_EQ(store.query_by_label(a.id, crack).size(), 800u);
    EXPECT_EQ(store.query_by_label(a.id, pore).size(), 100u);

    std::vector<std::string> dup{ids[0], ids[0], ids[950]};
    EXPECT_EQ(store.assign(dup, a.id, pore, "x"), 2u);
}

TEST(LabelStore, UnassignMatchesCountingOracle) {
    const auto ids = universe(500);
    LabelStore store(ids, {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    Rng rng(11);
    std::map<std::string, LabelId> oracle;
    for (int round = 0; round < 200; ++round) {
        std::vector<std::string> batch;
        const auto size = 1 + rng.below(40);
        for (std::uint64_t i = 0; i < size; ++i) batch.push_back(ids[rng.below(ids.size())]);
        std::set<std::string> distinct(batch.begin(), batch.end());
        std::size_t expected = 0;
        if (rng.below(3) == 0) {
            for (const auto& id : distinct) expected += oracle.erase(id);
            EXPECT_EQ(store.unassign(batch, a.id, "x"), expected);
        } else {
            const auto label = a.labels[rng.below(3)].id;
            for (const auto& id : distinct) {
                auto it = oracle.find(id);
                if (it == oracle.end() || it->second != label) ++expected;
                oracle[id] = label;
            }
            EXPECT_EQ(store.assign(batch, a.id, label, "x"), expected);
        }
    }
    const auto slice = store.slice(a.id);
    const std::map<std::string, LabelId> stored(slice.assignments.begin(), slice.assignments.end());
    EXPECT_EQ(stored, oracle);
}

TEST(LabelStore, LabelPreimagesPartitionTheUniverse) {
    const auto ids = universe(300);
    LabelStore store(ids, {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    Rng rng(3);
    for (const auto& id : ids) {
        const auto pick = rng.below(4);
        if (pick < 3) store.assign(std::vector<std::string>{id}, a.id, a.labels[pick].id, "x");
    }
    std::vector<std::string> all;
    for (const auto& l : a.labels) {
        const auto part = store.query_by_label(a.id, l.id);
        EXPECT_TRUE(std::is_sorted(part.begin(), part.end()));
        all.insert(all.end(), part.begin(), part.end());
    }
    const auto unlabeled = store.query_by_label(a.id, std::nullopt);
    all.insert(all.end(), unlabeled.begin(), unlabeled.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, ids);
    EXPECT_EQ(code_of([&] { store.query_by_label(a.id, 42); }), ErrorCode::not_found);
}

TEST(LabelStore, AugmentedColumnEndsWithUnlabeled) {
    const auto data = toy_dataset(10);
    LabelStore store(ids_of(data), {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    store.assign(std::vector<std::string>{toy_id(2)}, a.id, a.labels[2].id, "x");
    const auto col = augmented_column(store.slice(a.id), data);
    EXPECT_EQ(col.name, "Defects");
    EXPECT_EQ(col.categories, (std::vector<std::string>{"crack", "pore", "clean", "UNLABELED"}));
    EXPECT_EQ(col.codes[2], 2);
    EXPECT_EQ(std::count(col.codes.begin(), col.codes.end(), 3), 9);
}

TEST(LabelStore, ReplayReproducesState) {
    const auto ids = universe(200);
    LabelStore store(ids, {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    auto b = store.upsert_alphabet({std::nullopt, "Shape", {{std::nullopt, "round", "#111111", std::nullopt},
                                                            {std::nullopt, "angular", "#222222", std::nullopt}}},
                                   "y");
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        const auto& alpha = rng.below(2) ? a : b;
        std::vector<std::string> batch{ids[rng.below(200)], ids[rng.below(200)]};
        if (rng.below(4) == 0) {
            store.unassign(batch, alpha.id, "x");
        } else {
            store.assign(batch, alpha.id, alpha.labels[rng.below(alpha.labels.size())].id, "x");
        }
    }
    AlphabetDefinition edit{a.id, a.name, {{a.labels[0].id, "crack", "#ff0000", std::nullopt}}};
    store.upsert_alphabet(edit, "x", true);
    const auto log = store.log();
    EXPECT_EQ(log.back().seq, store.log_position());
    EXPECT_TRUE(LabelStore::replay(log) == *store.snapshot());
    for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(log[i].seq, i + 1);
}

TEST(LabelStore, ExportImportRoundTripIsByteEqual) {
    const auto ids = universe(100);
    LabelStore store(ids, {}, fixed_clock());
    auto a = store.upsert_alphabet(defects(), "x");
    store.assign(slice_ids(ids, 0, 30), a.id, a.labels[0].id, "x");
    store.assign(slice_ids(ids, 30, 40), a.id, a.labels[1].id, "y");
    store.unassign(slice_ids(ids, 35, 38), a.id, "y");
    const auto text = store.export_snapshot().dump();

    LabelStore other(ids, {}, fixed_clock());
    const auto outcome = other.import_snapshot(json::parse(text));
    EXPECT_EQ(outcome.alphabets, 1u);
    EXPECT_EQ(outcome.assignments, 37u);
    EXPECT_TRUE(outcome.conflicts.empty());
    EXPECT_EQ(other.export_snapshot().dump(), text);
    EXPECT_TRUE(*other.snapshot() == *store.snapshot());
}

TEST(LabelStore, ImportPolicies) {
    const auto ids = universe(50);
    LabelStore mine(ids, {}, fixed_clock());
    auto a = mine.upsert_alphabet(defects(), "x");
    mine.assign(slice_ids(ids, 0, 10), a.id, a.labels[0].id, "x");
    const auto doc = mine.export_snapshot();

    LabelStore theirs_store(ids, {}, fixed_clock());
    theirs_store.import_snapshot(doc);
    theirs_store.assign(slice_ids(ids, 5, 15), a.id, a.labels[1].id, "z");
    const auto their_doc = theirs_store.export_snapshot();

    // 5 particles disagree (5..9); 10..14 are new.
    auto expect_conflicts = [&](LabelStore& s) {
        try {
            s.import_snapshot(their_doc, MergePolicy::reject);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::conflict);
            EXPECT_EQ(e.details().size(), 5u);
        }
    };
    expect_conflicts(mine);
    EXPECT_EQ(mine.log_position(), 2u);

    LabelStore keep(ids, {}, fixed_clock());
    keep.import_snapshot(doc);
    auto ours = keep.import_snapshot(their_doc, MergePolicy::ours);
    EXPECT_EQ(ours.conflicts.size(), 5u);
    EXPECT_EQ(keep.query_by_label(a.id, a.labels[0].id).size(), 10u);
    EXPECT_EQ(keep.query_by_label(a.id, a.labels[1].id).size(), 5u);

    auto take = mine.import_snapshot(their_doc, MergePolicy::theirs);
    EXPECT_EQ(take.conflicts.size(), 5u);
    EXPECT_EQ(mine.query_by_label(a.id, a.labels[0].id).size(), 5u);
    EXPECT_EQ(mine.query_by_label(a.id, a.labels[1].id).size(), 10u);
    EXPECT_TRUE(LabelStore::replay(mine.log()) == *mine.snapshot());
}

TEST(LabelStore, ImportNameClashIsFatal) {
    const auto ids = universe(10);
    LabelStore one(ids, {}, fixed_clock());
    one.upsert_alphabet({std::nullopt, "Spare", {{std::nullopt, "s", "#000000", std::nullopt}}}, "x");
    one.upsert_alphabet(defects(), "x");  // id 2
    LabelStore two(ids, {}, fixed_clock());
    two.upsert_alphabet(defects(), "x");  // id 1, same name
    EXPECT_EQ(code_of([&] { one.import_snapshot(two.export_snapshot(), MergePolicy::theirs); }), ErrorCode::conflict);
}

TEST(LabelStore, InvalidDocumentsCarryPointers) {
    LabelStore store(universe(10), {}, fixed_clock());
    const auto doc = json::parse(R"({
        "format": "wrong",
        "alphabets": [{"id": 1, "name": "A", "labels": [
            {"id": 1, "name": "UNLABELED", "color": "#000000"},
            {"id": 1, "name": "b", "color": "red"}]}],
        "assignments": [["T00000", 1, 1], ["T00001", "x", 1]]
    })");
    try {
        store.import_snapshot(doc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
        std::set<std::string> paths;
        for (const auto& d : e.details()) paths.insert(d.substr(0, d.find(':')));
        for (const char* p : {"/format", "/alphabets/0/labels/0/name", "/alphabets/0/labels/1/id",
                              "/alphabets/0/labels/1/color", "/assignments/1"}) {
            EXPECT_TRUE(paths.count(p)) << p;
        }
    }
    EXPECT_EQ(code_of([&] { store.import_snapshot(json::array()); }), ErrorCode::validation);
    EXPECT_EQ(code_of([&] { parse_merge_policy("mine"); }), ErrorCode::invalid_argument);

    LabelStore src(universe(10), {}, fixed_clock());
    auto a = src.upsert_alphabet(defects(), "x");
    src.assign(universe(3), a.id, a.labels[0].id, "x");
    auto tampered = src.export_snapshot();
    tampered["log"].erase(1);
    EXPECT_EQ(code_of([&] { store.import_snapshot(tampered); }), ErrorCode::validation);
    LabelStore small(universe(2), {}, fixed_clock());
    EXPECT_EQ(code_of([&] { small.import_snapshot(src.export_snapshot()); }), ErrorCode::validation);
}

TEST(LabelStore, CsvExport) {
    LabelStore store(universe(5), {}, fixed_clock());
    auto def = defects();
    def.name = "Defects, surface";
    auto a = store.upsert_alphabet(def, "x");
    store.assign(std::vector<std::string>{toy_id(1)}, a.id, a.labels[1].id, "x");
    store.assign(std::vector<std::string>{toy_id(0)}, a.id, a.labels[0].id, "x");
    EXPECT_EQ(store.export_assignments_csv(),
              "particle_id,alphabet,label\nT00000,\"Defects, surface\",crack\nT00001,\"Defects, surface\",pore\n");
}

TEST(LabelRepository, ReopenRestoresState) {
    TempDir dir;
    const auto ids = universe(100);
    json exported;
    {
        LabelStore store(ids, {}, fixed_clock());
        LabelRepository repo(dir / "labels", 3);
        repo.attach(store);
        auto a = store.upsert_alphabet(defects(), "x");
        for (std::size_t i = 0; i < 10; ++i) store.assign(slice_ids(ids, i * 5, i * 5 + 5), a.id, a.labels[i % 3].id, "x");
        store.unassign(slice_ids(ids, 0, 2), a.id, "x");
        exported = store.export_snapshot();
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "labels/state.json"));
    LabelStore reopened(ids, {}, fixed_clock());
    LabelRepository repo(dir / "labels", 3);
    repo.attach(reopened);
    EXPECT_EQ(reopened.export_snapshot(), exported);
    reopened.unassign(slice_ids(ids, 2, 3), 1, "x");
    EXPECT_EQ(reopened.log_position(), 13u);
}

TEST(LabelRepository, CorruptLogIsReported) {
    TempDir dir;
    std::filesystem::create_directories(dir / "labels");
    std::ofstream(dir / "labels/log.jsonl") << "{not json\n";
    LabelStore store(universe(3), {}, fixed_clock());
    LabelRepository repo(dir / "labels");
    try {
        repo.attach(store);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}
