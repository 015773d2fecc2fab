#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageguide/dom_index.hpp"
#include "pageguide/llm_gateway.hpp"

namespace pageguide::hide {

inline constexpr std::size_t kMaxCandidates = 15;
inline constexpr std::string_view kNothingFound = "No matching content found";

struct HideCandidate {
    int element_id = 0;
    std::string reason;
    std::string snippet;
    int rank = 0;  // 1-based model order after filtering
    bool checked = true;

    bool operator==(const HideCandidate&) const = default;
};

struct HideProposal {
    std::vector<HideCandidate> candidates;
    std::string message;
    std::string source_index_ref;
    int dropped_unknown = 0;    // candidates citing ids outside the index
    int dropped_duplicate = 0;  // repeated ids
    int truncated = 0;          // valid candidates beyond the cap

    std::set<int> ids() const;
};

struct HideDecision {
    std::set<int> confirmed_ids;
    std::string proposal_ref;
    bool applied = false;
};

struct MutationEntry {
    int element_id = 0;
    NodePath node_path;
    std::optional<std::string> prior_style;  // nullopt: no style attribute
};

struct MutationRecord {
    std::vector<MutationEntry> entries;
    std::string source_ref;
};

std::vector<llm::ChatMessage> build_messages(std::string_view request, const ElementIndex& index,
                                             std::size_t index_budget = 24000);

/// Throws Error(MalformedHideResponse) when no JSON object with a `found`
/// array can be read.
HideProposal parse_proposal(std::string_view raw, const ElementIndex& index,
                            const IndexOptions& options = {});

HideProposal propose(std::string_view request, const ElementIndex& index, llm::Gateway& gateway,
                     const IndexOptions& options = {});

/// Every candidate is confirmed unless listed in `unchecked`.
HideDecision review(const HideProposal& proposal, const std::set<int>& unchecked);

/// `style` with display:none appended, separators normalized.
std::string append_display_none(const std::optional<std::string>& style);

/// Marks `decision` applied. Throws AlreadyApplied, StaleIndex.
std::pair<Snapshot, MutationRecord> apply(HideDecision& decision, const Snapshot& snapshot,
                                          const ElementIndex& index);

/// Reverts the listed ids (all recorded ids when `ids` is nullopt).
Snapshot restore(const Snapshot& mutated, const MutationRecord& record,
                 const std::optional<std::set<int>>& ids = std::nullopt);

enum class Difficulty { Easy, Medium, Hard };

std::string_view to_string(Difficulty d) noexcept;
std::optional<Difficulty> parse_difficulty(std::string_view s) noexcept;

/// 1 target type: easy, 2: medium, 3 or more: hard. Throws InvalidCount for 0.
Difficulty classify_difficulty(int target_types);

nlohmann::json to_json(const HideProposal& p);
nlohmann::json to_json(const MutationRecord& r);
MutationRecord mutation_record_from_json(const nlohmann::json& j);

}  // namespace pageguide::hide
