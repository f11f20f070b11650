#include "daedalus/labelstore.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>

#include "daedalus/error.hpp"

namespace daedalus {
using nlohmann::json;

namespace {

constexpr const char* kSnapshotFormat = "daedalus-labels/1";

bool valid_color(std::string_view c) {
    if (c.size() != 7 || c[0] != '#') return false;
    return std::all_of(c.begin() + 1, c.end(), [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)); });
}

std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

const AssignmentMap& empty_assignments() {
    static const AssignmentMap empty;
    return empty;
}

AssignmentMap& mutable_assignments(LabelState& state, AlphabetId alphabet) {
    auto& slot = state.assignments[alphabet];
    auto copy = std::make_shared<AssignmentMap>(slot ? *slot : AssignmentMap{});
    slot = copy;
    return *copy;
}

void bump_counters(LabelState& state, const LabelAlphabet& a) {
    state.next_alphabet_id = std::max(state.next_alphabet_id, a.id + 1);
    for (const auto& l : a.labels) state.next_label_id = std::max(state.next_label_id, l.id + 1);
}

// Drops assignments whose label is no longer part of the alphabet.
void prune_assignments(LabelState& state, const LabelAlphabet& alphabet) {
    auto it = state.assignments.find(alphabet.id);
    if (it == state.assignments.end() || !it->second) return;
    bool stale = std::any_of(it->second->begin(), it->second->end(),
                             [&](const auto& kv) { return alphabet.find(kv.second) == nullptr; });
    if (!stale) return;
    auto& map = mutable_assignments(state, alphabet.id);
    std::erase_if(map, [&](const auto& kv) { return alphabet.find(kv.second) == nullptr; });
}

bool same_definition(const LabelAlphabet& a, const LabelAlphabet& b) { return a.name == b.name && a.labels == b.labels; }

// Merges `incoming` into `base`. Returns conflict descriptions; conflicts that
// no policy can resolve are appended to `fatal`.
std::vector<std::string> merge_states(LabelState& base, const LabelState& incoming, MergePolicy policy,
                                      std::vector<std::string>& fatal) {
    std::vector<std::string> conflicts;
    for (const auto& [id, theirs] : incoming.alphabets) {
        if (auto* ours = base.find_alphabet(theirs.name); ours && ours->id != id) {
            fatal.push_back("alphabet name '" + theirs.name + "' is used by alphabet " + std::to_string(ours->id) +
                            " here and " + std::to_string(id) + " in the document");
            continue;
        }
        auto it = base.alphabets.find(id);
        if (it == base.alphabets.end()) {
            base.alphabets.emplace(id, theirs);
            bump_counters(base, theirs);
            continue;
        }
        if (same_definition(it->second, theirs)) continue;
        conflicts.push_back("alphabet " + std::to_string(id) + " ('" + theirs.name + "') differs");
        if (policy == MergePolicy::theirs) {
            it->second = theirs;
            bump_counters(base, theirs);
            prune_assignments(base, theirs);
        }
    }
    if (!fatal.empty()) return conflicts;

    for (const auto& [alphabet_id, map] : incoming.assignments) {
        if (!map || map->empty()) continue;
        const auto* final_def = base.find_alphabet(alphabet_id);
        AssignmentMap* target = nullptr;
        for (const auto& [particle, label] : *map) {
            if (!final_def || !final_def->find(label)) {
                conflicts.push_back("assignment (" + particle + ", " + std::to_string(alphabet_id) + ") uses label " +
                                    std::to_string(label) + " that the merged alphabet lacks");
                continue;
            }
            auto current = base.label_of(alphabet_id, particle);
            if (current && *current == label) continue;
            if (current) {
                conflicts.push_back("assignment (" + particle + ", " + std::to_string(alphabet_id) + "): " +
                                    std::to_string(*current) + " here, " + std::to_string(label) + " in the document");
                if (policy != MergePolicy::theirs) continue;
            }
            if (!target) target = &mutable_assignments(base, alphabet_id);
            (*target)[particle] = label;
        }
    }
    base.next_alphabet_id = std::max(base.next_alphabet_id, incoming.next_alphabet_id);
    base.next_label_id = std::max(base.next_label_id, incoming.next_label_id);
    return conflicts;
}

}  // namespace

const Label* LabelAlphabet::find(LabelId label) const {
    for (const auto& l : labels) {
        if (l.id == label) return &l;
    }
    return nullptr;
}

std::optional<std::size_t> LabelAlphabet::position(LabelId label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].id == label) return i;
    }
    return std::nullopt;
}

const LabelAlphabet* LabelState::find_alphabet(AlphabetId id) const {
    auto it = alphabets.find(id);
    return it == alphabets.end() ? nullptr : &it->second;
}

const LabelAlphabet* LabelState::find_alphabet(std::string_view name) const {
    for (const auto& [id, a] : alphabets) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

const AssignmentMap& LabelState::assignments_of(AlphabetId id) const {
    auto it = assignments.find(id);
    return (it == assignments.end() || !it->second) ? empty_assignments() : *it->second;
}

std::optional<LabelId> LabelState::label_of(AlphabetId alphabet, std::string_view particle) const {
    const auto& map = assignments_of(alphabet);
    auto it = map.find(particle);
    if (it == map.end()) return std::nullopt;
    return it->second;
}

bool operator==(const LabelState& a, const LabelState& b) {
    if (a.alphabets != b.alphabets || a.next_alphabet_id != b.next_alphabet_id || a.next_label_id != b.next_label_id ||
        a.seq != b.seq) {
        return false;
    }
    std::set<AlphabetId> keys;
    for (const auto& [k, v] : a.assignments) keys.insert(k);
    for (const auto& [k, v] : b.assignments) keys.insert(k);
    for (auto k : keys) {
        if (a.assignments_of(k) != b.assignments_of(k)) return false;
    }
    return true;
}

CategoryColumn augmented_column(const AlphabetSlice& slice, const Dataset& dataset) {
    CategoryColumn col;
    col.name = slice.alphabet.name;
    for (const auto& l : slice.alphabet.labels) col.categories.push_back(l.name);
    col.categories.emplace_back(kUnlabeled);
    const auto unlabeled = static_cast<std::int32_t>(slice.alphabet.labels.size());
    col.codes.assign(dataset.size(), unlabeled);
    for (const auto& [particle, label] : slice.assignments) {
        auto row = dataset.row_of(particle);
        auto pos = slice.alphabet.position(label);
        if (row && pos) col.codes[*row] = static_cast<std::int32_t>(*pos);
    }
    return col;
}

MergePolicy parse_merge_policy(std::string_view text) {
    if (text == "reject") return MergePolicy::reject;
    if (text == "theirs") return MergePolicy::theirs;
    if (text == "ours") return MergePolicy::ours;
    throw Error(ErrorCode::invalid_argument, "unknown merge policy '" + std::string(text) + "'",
                {"expected one of reject, theirs, ours"});
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const LabelAlphabet& a) {
    json labels = json::array();
    for (const auto& l : a.labels) {
        json j{{"id", l.id}, {"name", l.name}, {"color", l.color}};
        if (l.description) j["description"] = *l.description;
        labels.push_back(std::move(j));
    }
    return json{{"id", a.id},
                {"name", a.name},
                {"labels", std::move(labels)},
                {"created_by", a.created_by},
                {"created_at", a.created_at}};
}

LabelAlphabet alphabet_from_json(const json& doc) {
    LabelAlphabet a;
    a.id = doc.at("id").get<AlphabetId>();
    a.name = doc.at("name").get<std::string>();
    a.created_by = doc.value("created_by", "");
    a.created_at = doc.value("created_at", "");
    for (const auto& l : doc.at("labels")) {
        Label label;
        label.id = l.at("id").get<LabelId>();
        label.name = l.at("name").get<std::string>();
        label.color = l.at("color").get<std::string>();
        if (l.contains("description") && !l["description"].is_null()) {
            label.description = l["description"].get<std::string>();
        }
        a.labels.push_back(std::move(label));
    }
    return a;
}

json to_json(const LogEntry& e) {
    return json{{"seq", e.seq}, {"who", e.who}, {"when", e.when}, {"op", e.op}, {"payload", e.payload}};
}

LogEntry log_entry_from_json(const json& doc) {
    LogEntry e;
    e.seq = doc.at("seq").get<std::uint64_t>();
    e.who = doc.at("who").get<std::string>();
    e.when = doc.at("when").get<std::string>();
    e.op = doc.at("op").get<std::string>();
    e.payload = doc.value("payload", json::object());
    return e;
}

json state_to_json(const LabelState& state) {
    json alphabets = json::array();
    for (const auto& [id, a] : state.alphabets) alphabets.push_back(to_json(a));
    json assignments = json::array();
    for (const auto& [alphabet, map] : state.assignments) {
        if (!map) continue;
        for (const auto& [particle, label] : *map) assignments.push_back(json::array({particle, alphabet, label}));
    }
    return json{{"format", kSnapshotFormat},
                {"alphabets", std::move(alphabets)},
                {"assignments", std::move(assignments)},
                {"next_alphabet_id", state.next_alphabet_id},
                {"next_label_id", state.next_label_id},
                {"seq", state.seq}};
}

LabelState state_from_json(const json& doc) {
    LabelState state;
    for (const auto& a : doc.at("alphabets")) {
        auto alphabet = alphabet_from_json(a);
        bump_counters(state, alphabet);
        const auto id = alphabet.id;
        state.alphabets.emplace(id, std::move(alphabet));
    }
    std::map<AlphabetId, std::shared_ptr<AssignmentMap>> maps;
    for (const auto& row : doc.at("assignments")) {
        auto& m = maps[row.at(1).get<AlphabetId>()];
        if (!m) m = std::make_shared<AssignmentMap>();
        m->insert_or_assign(row.at(0).get<std::string>(), row.at(2).get<LabelId>());
    }
    for (auto& [k, v] : maps) state.assignments.emplace(k, std::move(v));
    state.next_alphabet_id = std::max(state.next_alphabet_id, doc.value("next_alphabet_id", AlphabetId{1}));
    state.next_label_id = std::max(state.next_label_id, doc.value("next_label_id", LabelId{1}));
    state.seq = doc.value("seq", std::uint64_t{0});
    return state;
}

void validate_snapshot_document(const json& doc) {
    std::vector<std::string> problems;
    auto fail = [&](const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); };
    if (!doc.is_object()) {
        throw Error(ErrorCode::validation, "snapshot document must be an object", {": expected object"});
    }
    if (doc.contains("format") && doc["format"] != kSnapshotFormat) {
        fail("/format", std::string("expected \"") + kSnapshotFormat + "\"");
    }
    for (const char* key : {"next_alphabet_id", "next_label_id", "seq"}) {
        if (doc.contains(key) && !doc[key].is_number_unsigned()) fail(std::string("/") + key, "expected unsigned integer");
    }

    std::map<AlphabetId, std::set<LabelId>> known;
    if (!doc.contains("alphabets") || !doc["alphabets"].is_array()) {
        fail("/alphabets", "expected array");
    } else {
        std::set<std::string> names;
        const auto& alphabets = doc["alphabets"];
        for (std::size_t i = 0; i < alphabets.size(); ++i) {
            const auto& a = alphabets[i];
            const std::string p = "/alphabets/" + std::to_string(i);
            if (!a.is_object()) {
                fail(p, "expected object");
                continue;
            }
            if (!a.contains("id") || !a["id"].is_number_unsigned()) {
                fail(p + "/id", "expected unsigned integer");
                continue;
            }
            const auto id = a["id"].get<AlphabetId>();
            if (known.count(id)) fail(p + "/id", "duplicate alphabet id " + std::to_string(id));
            auto& label_ids = known[id];
            if (!a.contains("name") || !a["name"].is_string() || a["name"].get<std::string>().empty()) {
                fail(p + "/name", "expected non-empty string");
            } else if (!names.insert(a["name"].get<std::string>()).second) {
                fail(p + "/name", "duplicate alphabet name");
            }
            if (!a.contains("labels") || !a["labels"].is_array() || a["labels"].empty()) {
                fail(p + "/labels", "expected non-empty array");
                continue;
            }
            std::set<std::string> label_names, colors;
            for (std::size_t j = 0; j < a["labels"].size(); ++j) {
                const auto& l = a["labels"][j];
                const std::string lp = p + "/labels/" + std::to_string(j);
                if (!l.is_object()) {
                    fail(lp, "expected object");
                    continue;
                }
                if (!l.contains("id") || !l["id"].is_number_unsigned()) {
                    fail(lp + "/id", "expected unsigned integer");
                } else if (!label_ids.insert(l["id"].get<LabelId>()).second) {
                    fail(lp + "/id", "duplicate label id");
                }
                if (!l.contains("name") || !l["name"].is_string() || l["name"].get<std::string>().empty()) {
                    fail(lp + "/name", "expected non-empty string");
                } else if (l["name"] == kUnlabeled) {
                    fail(lp + "/name", "UNLABELED is reserved");
                } else if (!label_names.insert(l["name"].get<std::string>()).second) {
                    fail(lp + "/name", "duplicate label name");
                }
                if (!l.contains("color") || !l["color"].is_string() || !valid_color(l["color"].get<std::string>())) {
                    fail(lp + "/color", "expected #rrggbb");
                } else if (!colors.insert(lower(l["color"].get<std::string>())).second) {
                    fail(lp + "/color", "duplicate label colour");
                }
            }
        }
    }

    if (!doc.contains("assignments") || !doc["assignments"].is_array()) {
        fail("/assignments", "expected array");
    } else {
        std::set<std::pair<std::string, AlphabetId>> seen;
        const auto& rows = doc["assignments"];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            const std::string p = "/assignments/" + std::to_string(i);
            if (!r.is_array() || r.size() != 3 || !r[0].is_string() || !r[1].is_number_unsigned() ||
                !r[2].is_number_unsigned()) {
                fail(p, "expected [particle-id, alphabet-id, label-id]");
                continue;
            }
            const auto particle = r[0].get<std::string>();
            const auto alphabet = r[1].get<AlphabetId>();
            const auto label = r[2].get<LabelId>();
            auto it = known.find(alphabet);
            if (it == known.end()) {
                fail(p + "/1", "unknown alphabet " + std::to_string(alphabet));
            } else if (!it->second.count(label)) {
                fail(p + "/2", "label " + std::to_string(label) + " is not in alphabet " + std::to_string(alphabet));
            }
            if (!seen.emplace(particle, alphabet).second) {
                fail(p, "particle '" + particle + "' has more than one label in alphabet " + std::to_string(alphabet));
            }
        }
    }

    if (doc.contains("log")) {
        if (!doc["log"].is_array()) {
            fail("/log", "expected array");
        } else {
            std::uint64_t last = 0;
            const auto& log = doc["log"];
            for (std::size_t i = 0; i < log.size(); ++i) {
                const auto& e = log[i];
                const std::string p = "/log/" + std::to_string(i);
                if (!e.is_object() || !e.contains("seq") || !e["seq"].is_number_unsigned() || !e.contains("op") ||
                    !e["op"].is_string() || !e.contains("who") || !e["who"].is_string() || !e.contains("when") ||
                    !e["when"].is_string()) {
                    fail(p, "expected {seq, who, when, op, payload}");
                    continue;
                }
                const auto seq = e["seq"].get<std::uint64_t>();
                if (seq <= last) fail(p + "/seq", "sequence numbers must increase");
                last = seq;
            }
        }
    }
    if (!problems.empty()) {
        throw Error(ErrorCode::validation, "invalid label snapshot (" + std::to_string(problems.size()) + " problem(s))",
                    std::move(problems));
    }
}

// ---------------------------------------------------------------------------
// Store

LabelStore::LabelStore(std::vector<std::string> particle_ids, std::set<std::string, std::less<>> reserved_names,
                       Clock clock)
    : particle_ids_(std::move(particle_ids)),
      reserved_names_(std::move(reserved_names)),
      clock_(std::move(clock)),
      state_(std::make_shared<const LabelState>()) {
    particle_rows_.reserve(particle_ids_.size());
    for (std::size_t i = 0; i < particle_ids_.size(); ++i) particle_rows_.emplace(particle_ids_[i], i);
}

std::shared_ptr<const LabelState> LabelStore::snapshot() const {
    std::shared_lock lock(mutex_);
    return state_;
}

std::uint64_t LabelStore::log_position() const {
    std::shared_lock lock(mutex_);
    return state_->seq;
}

std::vector<LogEntry> LabelStore::log() const {
    std::shared_lock lock(mutex_);
    return log_;
}

void LabelStore::set_journal(Journal journal) {
    std::unique_lock lock(mutex_);
    journal_ = std::move(journal);
}

void LabelStore::restore(LabelState state, std::vector<LogEntry> log) {
    std::unique_lock lock(mutex_);
    state_ = std::make_shared<const LabelState>(std::move(state));
    log_ = std::move(log);
}

void LabelStore::apply(LabelState& state, const LogEntry& entry) {
    const auto& p = entry.payload;
    if (entry.op == "upsert_alphabet") {
        auto alphabet = alphabet_from_json(p.at("alphabet"));
        bump_counters(state, alphabet);
        const auto id = alphabet.id;
        state.alphabets.insert_or_assign(id, alphabet);
        prune_assignments(state, alphabet);
    } else if (entry.op == "assign") {
        const auto alphabet = p.at("alphabet").get<AlphabetId>();
        const auto label = p.at("label").get<LabelId>();
        auto& map = mutable_assignments(state, alphabet);
        for (const auto& particle : p.at("particles")) map.insert_or_assign(particle.get<std::string>(), label);
    } else if (entry.op == "unassign") {
        const auto alphabet = p.at("alphabet").get<AlphabetId>();
        auto& map = mutable_assignments(state, alphabet);
        for (const auto& particle : p.at("particles")) map.erase(particle.get<std::string>());
    } else if (entry.op == "import") {
        std::vector<std::string> fatal;
        merge_states(state, state_from_json(p.at("document")), parse_merge_policy(p.at("policy").get<std::string>()),
                     fatal);
        if (!fatal.empty()) throw Error(ErrorCode::conflict, "log entry cannot be applied", fatal);
    } else {
        throw Error(ErrorCode::parse, "unknown log operation '" + entry.op + "'");
    }
    state.seq = entry.seq;
}

LabelState LabelStore::replay(std::span<const LogEntry> entries) {
    LabelState state;
    for (const auto& e : entries) apply(state, e);
    return state;
}

LogEntry LabelStore::append_locked(const std::string& who, std::string op, json payload) {
    LogEntry entry{state_->seq + 1, who, clock_(), std::move(op), std::move(payload)};
    auto next = std::make_shared<LabelState>(*state_);
    apply(*next, entry);
    state_ = next;
    log_.push_back(entry);
    if (journal_) journal_(entry, *state_);
    return entry;
}

void LabelStore::check_particles(std::span<const std::string> particles) const {
    std::vector<std::string> unknown;
    for (const auto& id : particles) {
        if (!particle_rows_.count(id)) unknown.push_back(id);
    }
    if (!unknown.empty()) {
        throw Error(ErrorCode::not_found, std::to_string(unknown.size()) + " unknown particle id(s)", std::move(unknown));
    }
}

LabelAlphabet LabelStore::upsert_alphabet(const AlphabetDefinition& def, const std::string& who, bool force) {
    std::vector<std::string> problems;
    if (def.name.empty()) problems.emplace_back("name: must not be empty");
    if (def.name == kUnlabeled || reserved_names_.count(def.name)) {
        problems.push_back("name: '" + def.name + "' is reserved");
    }
    if (def.labels.empty()) problems.emplace_back("labels: an alphabet needs at least one label");
    std::set<std::string> names, colors;
    for (std::size_t i = 0; i < def.labels.size(); ++i) {
        const auto& l = def.labels[i];
        const std::string where = "labels[" + std::to_string(i) + "]";
        if (l.name.empty()) problems.push_back(where + ".name: must not be empty");
        if (l.name == kUnlabeled) problems.push_back(where + ".name: UNLABELED is reserved");
        if (!names.insert(l.name).second) problems.push_back(where + ".name: duplicate '" + l.name + "'");
        if (!valid_color(l.color)) {
            problems.push_back(where + ".color: expected #rrggbb");
        } else if (!colors.insert(lower(l.color)).second) {
            problems.push_back(where + ".color: duplicate " + l.color);
        }
    }
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid alphabet definition", std::move(problems));

    std::unique_lock lock(mutex_);
    const LabelState& state = *state_;
    if (const auto* other = state.find_alphabet(def.name); other && (!def.id || other->id != *def.id)) {
        throw Error(ErrorCode::conflict, "an alphabet named '" + def.name + "' already exists");
    }

    LabelAlphabet result;
    LabelId next_label = state.next_label_id;
    json removed = json::array();
    if (!def.id) {
        result.id = state.next_alphabet_id;
        result.name = def.name;
        result.created_by = who;
        result.created_at = clock_();
        for (const auto& l : def.labels) {
            if (l.id) throw Error(ErrorCode::validation, "labels of a new alphabet cannot carry ids");
            result.labels.push_back({next_label++, l.name, lower(l.color), l.description});
        }
    } else {
        const auto* current = state.find_alphabet(*def.id);
        if (!current) throw Error(ErrorCode::not_found, "unknown alphabet " + std::to_string(*def.id));
        result = *current;
        result.name = def.name;
        result.labels.clear();
        std::set<LabelId> kept;
        for (const auto& l : def.labels) {
            if (l.id) {
                if (!current->find(*l.id)) {
                    throw Error(ErrorCode::not_found, "label " + std::to_string(*l.id) + " is not in alphabet '" +
                                                          current->name + "'");
                }
                kept.insert(*l.id);
                result.labels.push_back({*l.id, l.name, lower(l.color), l.description});
            } else {
                result.labels.push_back({next_label++, l.name, lower(l.color), l.description});
            }
        }
        std::vector<std::string> blocked;
        const auto& map = state.assignments_of(current->id);
        for (const auto& l : current->labels) {
            if (kept.count(l.id)) continue;
            removed.push_back(l.id);
            const auto n = std::count_if(map.begin(), map.end(), [&](const auto& kv) { return kv.second == l.id; });
            if (n > 0) blocked.push_back("label '" + l.name + "' has " + std::to_string(n) + " assignment(s)");
        }
        if (!blocked.empty() && !force) {
            throw Error(ErrorCode::conflict, "removing labels that have assignments requires force", std::move(blocked));
        }
        if (result == *current) return result;
    }
    append_locked(who, "upsert_alphabet", json{{"alphabet", to_json(result)}, {"removed_labels", removed}});
    return result;
}

std::size_t LabelStore::assign(std::span<const std::string> particles, AlphabetId alphabet, LabelId label,
                               const std::string& who) {
    check_particles(particles);
    std::unique_lock lock(mutex_);
    const auto* a = state_->find_alphabet(alphabet);
    if (!a) throw Error(ErrorCode::not_found, "unknown alphabet " + std::to_string(alphabet));
    if (!a->find(label)) {
        throw Error(ErrorCode::not_found, "label " + std::to_string(label) + " is not in alphabet '" + a->name + "'");
    }
    std::set<std::string, std::less<>> changed;
    for (const auto& id : particles) {
        auto current = state_->label_of(alphabet, id);
        if (!current || *current != label) changed.insert(id);
    }
    if (changed.empty()) return 0;
    append_locked(who, "assign", json{{"alphabet", alphabet}, {"label", label}, {"particles", changed}});
    return changed.size();
}

std::size_t LabelStore::unassign(std::span<const std::string> particles, AlphabetId alphabet, const std::string& who) {
    check_particles(particles);
    std::unique_lock lock(mutex_);
    if (!state_->find_alphabet(alphabet)) throw Error(ErrorCode::not_found, "unknown alphabet " + std::to_string(alphabet));
    std::set<std::string, std::less<>> changed;
    for (const auto& id : particles) {
        if (state_->label_of(alphabet, id)) changed.insert(id);
    }
    if (changed.empty()) return 0;
    append_locked(who, "unassign", json{{"alphabet", alphabet}, {"particles", changed}});
    return changed.size();
}

std::vector<std::string> LabelStore::query_by_label(AlphabetId alphabet, std::optional<LabelId> label) const {
    auto state = snapshot();
    const auto* a = state->find_alphabet(alphabet);
    if (!a) throw Error(ErrorCode::not_found, "unknown alphabet " + std::to_string(alphabet));
    if (label && !a->find(*label)) {
        throw Error(ErrorCode::not_found, "label " + std::to_string(*label) + " is not in alphabet '" + a->name + "'");
    }
    const auto& map = state->assignments_of(alphabet);
    std::vector<std::string> out;
    for (const auto& id : particle_ids_) {
        auto it = map.find(id);
        const bool match = label ? (it != map.end() && it->second == *label) : it == map.end();
        if (match) out.push_back(id);
    }
    return out;
}

AlphabetSlice LabelStore::slice(AlphabetId alphabet) const {
    auto state = snapshot();
    const auto* a = state->find_alphabet(alphabet);
    if (!a) throw Error(ErrorCode::not_found, "unknown alphabet " + std::to_string(alphabet));
    return {*a, state->assignments_of(alphabet)};
}

std::optional<AlphabetSlice> LabelStore::slice(std::string_view name) const {
    auto state = snapshot();
    const auto* a = state->find_alphabet(name);
    if (!a) return std::nullopt;
    return AlphabetSlice{*a, state->assignments_of(a->id)};
}

json LabelStore::export_snapshot() const {
    std::shared_lock lock(mutex_);
    json doc = state_to_json(*state_);
    json log = json::array();
    for (const auto& e : log_) log.push_back(to_json(e));
    doc["log"] = std::move(log);
    return doc;
}

ImportOutcome LabelStore::import_snapshot(const json& document, MergePolicy policy, const std::string& who) {
    validate_snapshot_document(document);
    LabelState incoming = state_from_json(document);
    {
        std::vector<std::string> unknown;
        for (const auto& [alphabet, map] : incoming.assignments) {
            for (const auto& [particle, label] : *map) {
                if (!particle_rows_.count(particle)) unknown.push_back(particle);
            }
        }
        if (!unknown.empty()) {
            throw Error(ErrorCode::validation, "snapshot assigns labels to unknown particles", std::move(unknown));
        }
    }
    std::vector<LogEntry> log;
    if (document.contains("log")) {
        for (const auto& e : document["log"]) log.push_back(log_entry_from_json(e));
    }

    ImportOutcome outcome;
    outcome.alphabets = incoming.alphabets.size();
    for (const auto& [alphabet, map] : incoming.assignments) outcome.assignments += map ? map->size() : 0;

    std::unique_lock lock(mutex_);
    const bool empty = state_->alphabets.empty() && log_.empty();
    if (empty && !log.empty()) {
        LabelState replayed;
        try {
            replayed = replay(log);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::validation, "snapshot log cannot be replayed", {std::string("/log: ") + e.what()});
        }
        if (!(replayed == incoming)) {
            throw Error(ErrorCode::validation, "snapshot log does not reproduce its state",
                        {"/log: replay differs from /alphabets and /assignments"});
        }
        state_ = std::make_shared<const LabelState>(std::move(incoming));
        log_ = std::move(log);
        if (journal_) {
            for (const auto& e : log_) journal_(e, *state_);
        }
        return outcome;
    }

    LabelState probe = *state_;
    std::vector<std::string> fatal;
    auto conflicts = merge_states(probe, incoming, policy, fatal);
    if (!fatal.empty()) throw Error(ErrorCode::conflict, "snapshot cannot be merged", std::move(fatal));
    if (policy == MergePolicy::reject && !conflicts.empty()) {
        throw Error(ErrorCode::conflict, std::to_string(conflicts.size()) + " conflict(s) with merge policy reject",
                    std::move(conflicts));
    }
    json stripped = state_to_json(incoming);
    append_locked(who, "import", json{{"policy", policy == MergePolicy::reject   ? "reject"
                                                 : policy == MergePolicy::theirs ? "theirs"
                                                                                 : "ours"},
                                      {"document", std::move(stripped)}});
    outcome.conflicts = std::move(conflicts);
    return outcome;
}

std::string LabelStore::export_assignments_csv() const {
    auto state = snapshot();
    std::ostringstream out;
    out << "particle_id,alphabet,label\n";
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q.push_back('"');
            q.push_back(c);
        }
        return q + "\"";
    };
    for (const auto& [alphabet_id, alphabet] : state->alphabets) {
        for (const auto& [particle, label] : state->assignments_of(alphabet_id)) {
            out << quote(particle) << ',' << quote(alphabet.name) << ',' << quote(alphabet.find(label)->name) << '\n';
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Repository

LabelRepository::LabelRepository(std::filesystem::path dir, std::size_t snapshot_every)
    : dir_(std::move(dir)), snapshot_every_(std::max<std::size_t>(1, snapshot_every)) {}

void LabelRepository::write_state(const LabelState& state) const {
    const auto tmp = dir_ / "state.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
        out << state_to_json(state).dump() << '\n';
    }
    std::filesystem::rename(tmp, dir_ / "state.json");
}

void LabelRepository::attach(LabelStore& store) {
    std::filesystem::create_directories(dir_);
    LabelState state;
    if (std::ifstream in(dir_ / "state.json", std::ios::binary); in) {
        try {
            state = state_from_json(json::parse(in));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse, (dir_ / "state.json").string() + ": " + e.what());
        }
    }
    std::vector<LogEntry> log;
    if (std::ifstream in(dir_ / "log.jsonl", std::ios::binary); in) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                log.push_back(log_entry_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::parse,
                            (dir_ / "log.jsonl").string() + " line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    if (state.seq > 0 && (log.empty() || log.back().seq < state.seq)) {
        throw Error(ErrorCode::validation, "label state is newer than its log in " + dir_.string());
    }
    for (const auto& e : log) {
        if (e.seq > state.seq) LabelStore::apply(state, e);
    }
    store.restore(std::move(state), std::move(log));

    store.set_journal([this](const LogEntry& entry, const LabelState& state) {
        {
            std::ofstream out(dir_ / "log.jsonl", std::ios::binary | std::ios::app);
            if (!out) throw Error(ErrorCode::io, "cannot append to " + (dir_ / "log.jsonl").string());
            out << to_json(entry).dump() << '\n';
        }
        if (++since_snapshot_ >= snapshot_every_) {
            write_state(state);
            since_snapshot_ = 0;
        }
    });
}

}  // namespace daedalus
