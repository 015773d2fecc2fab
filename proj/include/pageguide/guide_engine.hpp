#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageguide/dom_index.hpp"
#include "pageguide/llm_gateway.hpp"

namespace pageguide::guide {

inline constexpr int kMaxSteps = 25;

enum class WaitFor { Click, Input, Scroll, None };

std::string_view to_string(WaitFor w) noexcept;
/// "type" is accepted as an alias of "input"; anything unknown is None.
WaitFor parse_wait_for(const nlohmann::json& value) noexcept;

struct Highlight {
    int element_id = 0;
    std::string text;
    NodePath node_path;  // filled from the index the step was staged on

    bool operator==(const Highlight&) const = default;
};

struct GuideStep {
    int step = 0;
    std::string instruction;
    std::optional<Highlight> highlight;
    WaitFor wait_for = WaitFor::None;
    bool is_last = false;
    std::string next_hint;

    bool operator==(const GuideStep&) const = default;
};

enum class SessionState { AwaitingStep, AwaitingUser, Replanning, Completed, Stopped, Failed };

std::string_view to_string(SessionState s) noexcept;

enum class Verdict { Consistent, Diverged };

struct DivergenceReport {
    std::optional<Highlight> expected_element;
    bool found_in_new_index = false;
    bool url_changed = false;
    bool index_changed = false;
    Verdict verdict = Verdict::Consistent;
    bool terminal = false;  // is_last confirmation: no re-read happened
};

struct HistoryEntry {
    GuideStep step;
    DivergenceReport report;
};

/// Parses one step reply. Returns nullopt and sets `problem` when the reply
/// is unusable (no JSON, no instruction, or a highlight id not in `index`).
std::optional<GuideStep> parse_step(std::string_view raw, const ElementIndex& index, std::string& problem);

/// One guide conversation over a snapshot sequence. Not thread-safe: callers
/// serialize access per session.
class GuideSession {
public:
    /// Throws Error(EmptySequence) when `sequence` is empty. No model call.
    GuideSession(std::string query, std::vector<Snapshot> sequence, IndexOptions options = {});

    const std::string& id() const noexcept { return id_; }
    const std::string& query() const noexcept { return query_; }
    SessionState state() const noexcept { return state_; }
    const std::optional<GuideStep>& current_step() const noexcept { return current_; }
    const std::vector<HistoryEntry>& history() const noexcept { return history_; }
    std::size_t cursor() const noexcept { return cursor_; }
    const ElementIndex& index() const noexcept { return index_; }
    const Snapshot& snapshot() const noexcept { return sequence_[cursor_]; }
    /// Messages of the most recent model call.
    const std::vector<llm::ChatMessage>& last_messages() const noexcept { return last_messages_; }
    /// Error code that moved the session to Failed, if any.
    const std::optional<std::string>& failure() const noexcept { return failure_; }

    std::vector<llm::ChatMessage> build_messages() const;

    /// Requires AwaitingStep or Replanning. One re-ask on an unusable reply,
    /// then Failed with Error(MalformedStep).
    const GuideStep& next_step(llm::Gateway& gateway);

    /// Requires AwaitingUser. With `fresh`, the page read after the action is
    /// `fresh` (live mode); otherwise the cursor advances along the sequence.
    DivergenceReport confirm_step(std::optional<Snapshot> fresh = std::nullopt);

    void stop();

    /// Presentation payload for the staged step. Requires AwaitingUser.
    nlohmann::json step_card() const;

    nlohmann::json to_json() const;

private:
    void fail(std::string_view code);
    void rebuild_index();

    std::string id_;
    std::string query_;
    std::vector<Snapshot> sequence_;
    IndexOptions options_;
    std::size_t cursor_ = 0;
    ElementIndex index_;
    SessionState state_ = SessionState::AwaitingStep;
    std::optional<GuideStep> current_;
    std::vector<HistoryEntry> history_;
    std::vector<llm::ChatMessage> last_messages_;
    std::optional<std::string> failure_;
};

/// 32 lowercase hex characters from the system random device.
std::string random_session_id();

nlohmann::json to_json(const GuideStep& s);
nlohmann::json to_json(const DivergenceReport& r);

}  // namespace pageguide::guide
