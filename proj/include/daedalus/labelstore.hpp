#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "daedalus/model.hpp"

namespace daedalus {

/// Pseudo-category completing every alphabet's partition of the particles.
inline constexpr std::string_view kUnlabeled = "UNLABELED";

using AlphabetId = std::uint64_t;
using LabelId = std::uint64_t;

struct Label {
    LabelId id = 0;
    std::string name;
    std::string color;  // "#rrggbb", lower case
    std::optional<std::string> description;

    friend bool operator==(const Label&, const Label&) = default;
};

struct LabelAlphabet {
    AlphabetId id = 0;
    std::string name;
    std::vector<Label> labels;
    std::string created_by;
    std::string created_at;

    const Label* find(LabelId label) const;
    std::optional<std::size_t> position(LabelId label) const;
    friend bool operator==(const LabelAlphabet&, const LabelAlphabet&) = default;
};

/// Input to upsert_alphabet. Labels without an id are new; for an update,
/// existing labels absent from the list are removals.
struct AlphabetDefinition {
    struct LabelDef {
        std::optional<LabelId> id;
        std::string name;
        std::string color;
        std::optional<std::string> description;
    };
    std::optional<AlphabetId> id;
    std::string name;
    std::vector<LabelDef> labels;
};

struct LogEntry {
    std::uint64_t seq = 0;
    std::string who;
    std::string when;
    std::string op;
    nlohmann::json payload;

    friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

/// particle id -> label id, for one alphabet.
using AssignmentMap = std::map<std::string, LabelId, std::less<>>;

/// Immutable value of the store at one log position.
struct LabelState {
    std::map<AlphabetId, LabelAlphabet> alphabets;
    std::map<AlphabetId, std::shared_ptr<const AssignmentMap>> assignments;
    AlphabetId next_alphabet_id = 1;
    LabelId next_label_id = 1;
    std::uint64_t seq = 0;

    const LabelAlphabet* find_alphabet(AlphabetId id) const;
    const LabelAlphabet* find_alphabet(std::string_view name) const;
    const AssignmentMap& assignments_of(AlphabetId id) const;
    std::optional<LabelId> label_of(AlphabetId alphabet, std::string_view particle) const;

    friend bool operator==(const LabelState& a, const LabelState& b);
};

/// One alphabet's labels together with its assignments.
struct AlphabetSlice {
    LabelAlphabet alphabet;
    AssignmentMap assignments;
};

/// The alphabet as a categorical attribute: labels in alphabet order, then
/// UNLABELED; one code per dataset row.
CategoryColumn augmented_column(const AlphabetSlice& slice, const Dataset& dataset);

enum class MergePolicy { reject, theirs, ours };
MergePolicy parse_merge_policy(std::string_view text);

struct ImportOutcome {
    std::size_t alphabets = 0;
    std::size_t assignments = 0;
    std::vector<std::string> conflicts;  // resolved by policy
};

/// Single-writer, multi-reader store of alphabets and assignments. Every
/// mutation appends one log entry; replaying the log from empty reproduces
/// the state.
class LabelStore {
public:
    using Clock = std::function<std::string()>;
    using Journal = std::function<void(const LogEntry&, const LabelState&)>;

    explicit LabelStore(std::vector<std::string> particle_ids, std::set<std::string, std::less<>> reserved_names = {},
                        Clock clock = now_iso8601);

    std::shared_ptr<const LabelState> snapshot() const;
    std::uint64_t log_position() const;
    std::vector<LogEntry> log() const;
    const std::vector<std::string>& particle_ids() const { return particle_ids_; }

    /// Errors: validation (empty name, no labels, bad colour, duplicate
    /// names/colours), conflict (duplicate alphabet name on create, or removing
    /// assigned labels without `force`), not_found (unknown alphabet/label id).
    LabelAlphabet upsert_alphabet(const AlphabetDefinition& definition, const std::string& who, bool force = false);

    /// Returns how many particles changed label. Errors: not_found for unknown
    /// particle ids, alphabet or label.
    std::size_t assign(std::span<const std::string> particles, AlphabetId alphabet, LabelId label,
                       const std::string& who);
    std::size_t unassign(std::span<const std::string> particles, AlphabetId alphabet, const std::string& who);

    /// Preimage of a label (or of UNLABELED when `label` is empty), in
    /// particle-universe order.
    std::vector<std::string> query_by_label(AlphabetId alphabet, std::optional<LabelId> label) const;

    AlphabetSlice slice(AlphabetId alphabet) const;
    std::optional<AlphabetSlice> slice(std::string_view alphabet_name) const;

    nlohmann::json export_snapshot() const;
    /// Into an empty store the document is adopted verbatim (including its
    /// log). Into a non-empty store it is merged under `policy`; `reject`
    /// fails with Error(conflict) listing every conflict.
    ImportOutcome import_snapshot(const nlohmann::json& document, MergePolicy policy = MergePolicy::reject,
                                  const std::string& who = "import");

    /// CSV (particle_id,alphabet,label) of all assignments.
    std::string export_assignments_csv() const;

    /// Rebuild a state by applying `entries` to an empty store.
    static LabelState replay(std::span<const LogEntry> entries);
    /// Apply one log entry to `state`.
    static void apply(LabelState& state, const LogEntry& entry);

    /// Replace the store content; used when reopening persisted state.
    void restore(LabelState state, std::vector<LogEntry> log);

    /// Called with every new log entry (and the state it produced) while
    /// holding the writer lock.
    void set_journal(Journal journal);

private:
    LogEntry append_locked(const std::string& who, std::string op, nlohmann::json payload);
    void check_particles(std::span<const std::string> particles) const;

    std::vector<std::string> particle_ids_;
    std::unordered_map<std::string, std::size_t> particle_rows_;
    std::set<std::string, std::less<>> reserved_names_;
    Clock clock_;
    Journal journal_;

    mutable std::shared_mutex mutex_;
    std::shared_ptr<const LabelState> state_;
    std::vector<LogEntry> log_;
};

/// Validates a snapshot document; details carry JSON-pointer paths.
void validate_snapshot_document(const nlohmann::json& document);

nlohmann::json to_json(const LabelAlphabet& alphabet);
LabelAlphabet alphabet_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const LogEntry& entry);
LogEntry log_entry_from_json(const nlohmann::json& doc);
/// State without the log: alphabets, assignments, id counters, log position.
nlohmann::json state_to_json(const LabelState& state);
LabelState state_from_json(const nlohmann::json& doc);

/// Durable store under `<dir>`: an append-only `log.jsonl` holding every
/// entry, plus `state.json`, a periodic snapshot of the state at some log
/// position that lets reopening skip most of the replay.
class LabelRepository {
public:
    LabelRepository(std::filesystem::path dir, std::size_t snapshot_every = 100);

    /// Loads persisted content into `store` (which must be empty) and
    /// journals every later mutation.
    void attach(LabelStore& store);

private:
    void write_state(const LabelState& state) const;

    std::filesystem::path dir_;
    std::size_t snapshot_every_;
    std::size_t since_snapshot_ = 0;
};

}  // namespace daedalus
