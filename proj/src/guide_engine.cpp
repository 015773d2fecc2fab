#include "pageguide/guide_engine.hpp"

#include <cstdio>
#include <random>

#include "pageguide/error.hpp"
#include "pageguide/lenient_json.hpp"
#include "pageguide/prompts.hpp"
#include "pageguide/text.hpp"

namespace pageguide::guide {

using nlohmann::json;

namespace {

constexpr std::size_t kIndexBudget = 24000;

constexpr std::string_view kReplanNote =
    "NOTE: The page did not change as expected after the previous step. "
    "Plan the remaining steps again from the current PAGE INDEX.";

std::string correction_note(const std::string& problem) {
    return "Your previous reply could not be used (" + problem +
           "). Reply with one JSON object in the required format and highlight only an index listed in PAGE INDEX.";
}

bool same_element(const IndexedElement& a, const IndexedElement& b) {
    return a.id == b.id && a.text == b.text && a.node_path == b.node_path;
}

bool same_elements(const ElementIndex& a, const ElementIndex& b) { return a.elements == b.elements; }

}  // namespace

std::string_view to_string(WaitFor w) noexcept {
    switch (w) {
        case WaitFor::Click: return "click";
        case WaitFor::Input: return "input";
        case WaitFor::Scroll: return "scroll";
        case WaitFor::None: return "none";
    }
    return "none";
}

WaitFor parse_wait_for(const json& value) noexcept {
    if (!value.is_string()) return WaitFor::None;
    const std::string s = text::to_lower_ascii(value.get<std::string>());
    if (s == "click") return WaitFor::Click;
    if (s == "input" || s == "type") return WaitFor::Input;
    if (s == "scroll") return WaitFor::Scroll;
    return WaitFor::None;
}

std::string_view to_string(SessionState s) noexcept {
    switch (s) {
        case SessionState::AwaitingStep: return "AwaitingStep";
        case SessionState::AwaitingUser: return "AwaitingUser";
        case SessionState::Replanning: return "Replanning";
        case SessionState::Completed: return "Completed";
        case SessionState::Stopped: return "Stopped";
        case SessionState::Failed: return "Failed";
    }
    return "Failed";
}

std::optional<GuideStep> parse_step(std::string_view raw, const ElementIndex& index, std::string& problem) {
    auto parsed = extract_json_object(raw);
    if (!parsed) {
        problem = "no JSON object found";
        return std::nullopt;
    }
    const json& j = *parsed;
    if (!j.contains("instruction") || !j["instruction"].is_string() ||
        text::trim(j["instruction"].get<std::string>()).empty()) {
        problem = "missing instruction";
        return std::nullopt;
    }
    GuideStep step;
    step.instruction = j["instruction"].get<std::string>();
    if (j.contains("step") && j["step"].is_number_integer()) step.step = j["step"].get<int>();
    step.wait_for = j.contains("waitFor") ? parse_wait_for(j["waitFor"]) : WaitFor::None;
    step.is_last = j.contains("isLastStep") && j["isLastStep"].is_boolean() && j["isLastStep"].get<bool>();
    if (j.contains("nextStepHint") && j["nextStepHint"].is_string()) step.next_hint = j["nextStepHint"].get<std::string>();

    if (j.contains("highlight") && !j["highlight"].is_null()) {
        const json& h = j["highlight"];
        if (!h.is_object() || !h.contains("index") || !h["index"].is_number_integer()) {
            problem = "highlight must be {\"index\": N, \"text\": ...}";
            return std::nullopt;
        }
        const int id = h["index"].get<int>();
        const IndexedElement* element = index.find(id);
        if (!element) {
            problem = "highlight index " + std::to_string(id) + " is not in PAGE INDEX";
            return std::nullopt;
        }
        Highlight hl;
        hl.element_id = id;
        hl.text = h.contains("text") && h["text"].is_string() ? h["text"].get<std::string>() : element->text;
        hl.node_path = element->node_path;
        step.highlight = std::move(hl);
    }
    return step;
}

std::string random_session_id() {
    std::random_device rd;
    std::string out;
    for (int i = 0; i < 4; ++i) {
        char buf[9];
        std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
        out += buf;
    }
    return out;
}

GuideSession::GuideSession(std::string query, std::vector<Snapshot> sequence, IndexOptions options)
    : query_(std::move(query)), sequence_(std::move(sequence)), options_(options) {
    if (sequence_.empty()) throw Error(ErrorCode::EmptySequence, "guide session needs at least one snapshot");
    id_ = random_session_id();
    rebuild_index();
}

void GuideSession::rebuild_index() {
    index_ = build_index(sequence_[cursor_], options_, sequence_[cursor_].digest() + "@" + std::to_string(cursor_));
}

void GuideSession::fail(std::string_view code) {
    state_ = SessionState::Failed;
    failure_ = std::string(code);
}

std::vector<llm::ChatMessage> GuideSession::build_messages() const {
    std::string user = "PAGE INDEX:\n" + serialize_index(index_, kIndexBudget, options_);
    user += "\n\nUSER QUESTION: " + query_;
    user += "\n\nSTEP NUMBER: " + std::to_string(history_.size() + 1);
    user += "\n\nPREVIOUS STEPS:";
    if (history_.empty()) user += "\nNone";
    for (const auto& h : history_) {
        user += "\n" + std::to_string(h.step.step) + ". " + h.step.instruction;
        if (h.step.highlight) user += " [" + std::to_string(h.step.highlight->element_id) + "]";
        user += " (done)";
    }
    if (state_ == SessionState::Replanning) {
        user += "\n\n";
        user += kReplanNote;
    }
    return {{"system", std::string(prompts::kGuide)}, {"user", std::move(user)}};
}

const GuideStep& GuideSession::next_step(llm::Gateway& gateway) {
    if (state_ != SessionState::AwaitingStep && state_ != SessionState::Replanning) {
        throw Error(ErrorCode::InvalidState, "next_step needs AwaitingStep or Replanning, session is " +
                                                 std::string(to_string(state_)));
    }
    const int number = static_cast<int>(history_.size()) + 1;
    if (number > kMaxSteps) {
        fail("StepLimit");
        throw Error(ErrorCode::StepLimit, "plan exceeded " + std::to_string(kMaxSteps) + " steps");
    }

    auto messages = build_messages();
    last_messages_ = messages;
    auto reply = gateway.complete(gateway.make_request(messages));
    std::string problem;
    auto step = parse_step(reply.text, index_, problem);
    if (!step) {
        messages.push_back({"assistant", reply.text});
        messages.push_back({"user", correction_note(problem)});
        last_messages_ = messages;
        reply = gateway.complete(gateway.make_request(messages));
        step = parse_step(reply.text, index_, problem);
        if (!step) {
            fail("MalformedStep");
            throw Error(ErrorCode::MalformedStep, "model reply unusable after one retry: " + problem,
                        {{"step", number}});
        }
    }
    step->step = number;
    current_ = std::move(*step);
    state_ = SessionState::AwaitingUser;
    return *current_;
}

DivergenceReport GuideSession::confirm_step(std::optional<Snapshot> fresh) {
    if (state_ != SessionState::AwaitingUser || !current_) {
        throw Error(ErrorCode::InvalidState, "confirm needs AwaitingUser, session is " + std::string(to_string(state_)));
    }
    DivergenceReport report;
    report.expected_element = current_->highlight;
    if (current_->is_last) {
        report.terminal = true;
        history_.push_back({*current_, report});
        current_.reset();
        state_ = SessionState::Completed;
        return report;
    }

    if (fresh) {
        validate(*fresh);
        sequence_.resize(cursor_ + 1);
        sequence_.push_back(std::move(*fresh));
    } else if (cursor_ + 1 >= sequence_.size()) {
        history_.push_back({*current_, report});
        current_.reset();
        fail("SequenceExhausted");
        throw Error(ErrorCode::SequenceExhausted, "no snapshot left after step " + std::to_string(history_.size()));
    }
    const ElementIndex previous = index_;
    const std::string previous_url = sequence_[cursor_].url;
    ++cursor_;
    rebuild_index();

    report.url_changed = sequence_[cursor_].url != previous_url;
    report.index_changed = !same_elements(previous, index_);
    if (current_->highlight) {
        const IndexedElement* before = previous.find(current_->highlight->element_id);
        const IndexedElement* after = index_.find(current_->highlight->element_id);
        report.found_in_new_index = before && after && same_element(*before, *after);
    }
    const bool diverged = current_->wait_for == WaitFor::Click && !report.url_changed &&
                          (!current_->highlight || report.found_in_new_index) && !report.index_changed;
    report.verdict = diverged ? Verdict::Diverged : Verdict::Consistent;

    history_.push_back({*current_, report});
    current_.reset();
    state_ = diverged ? SessionState::Replanning : SessionState::AwaitingStep;
    return report;
}

void GuideSession::stop() {
    if (state_ == SessionState::Completed || state_ == SessionState::Failed) {
        throw Error(ErrorCode::InvalidState, "cannot stop a session that is " + std::string(to_string(state_)));
    }
    current_.reset();
    state_ = SessionState::Stopped;
}

json GuideSession::step_card() const {
    if (state_ != SessionState::AwaitingUser || !current_) {
        throw Error(ErrorCode::InvalidState, "no staged step");
    }
    json target = nullptr;
    if (current_->highlight) {
        const IndexedElement* e = index_.find(current_->highlight->element_id);
        target = {{"element_id", current_->highlight->element_id},
                  {"text", current_->highlight->text},
                  {"node_path", current_->highlight->node_path.str()}};
        if (e) target["bbox"] = {{"x", e->bbox.x}, {"y", e->bbox.y}, {"w", e->bbox.w}, {"h", e->bbox.h}};
    }
    json controls = json::array({current_->is_last ? "Finish" : "Next"});
    if (current_->wait_for != WaitFor::None) controls.push_back("Stop");
    return {{"step_no", current_->step},
            {"instruction", current_->instruction},
            {"hint", current_->next_hint},
            {"wait_for", std::string(to_string(current_->wait_for))},
            {"target", std::move(target)},
            {"controls", std::move(controls)}};
}

json to_json(const GuideStep& s) {
    json highlight = nullptr;
    if (s.highlight) {
        highlight = {{"element_id", s.highlight->element_id},
                     {"text", s.highlight->text},
                     {"node_path", s.highlight->node_path.str()}};
    }
    return {{"step", s.step},
            {"instruction", s.instruction},
            {"highlight", std::move(highlight)},
            {"wait_for", std::string(to_string(s.wait_for))},
            {"is_last", s.is_last},
            {"next_hint", s.next_hint}};
}

json to_json(const DivergenceReport& r) {
    json expected = nullptr;
    if (r.expected_element) expected = {{"element_id", r.expected_element->element_id}, {"text", r.expected_element->text}};
    return {{"expected_element", std::move(expected)},
            {"found_in_new_index", r.found_in_new_index},
            {"url_changed", r.url_changed},
            {"index_changed", r.index_changed},
            {"verdict", r.verdict == Verdict::Diverged ? "diverged" : "consistent"},
            {"terminal", r.terminal}};
}

json GuideSession::to_json() const {
    json history = json::array();
    for (const auto& h : history_) {
        history.push_back({{"step", guide::to_json(h.step)}, {"report", guide::to_json(h.report)}});
    }
    return {{"session_id", id_},
            {"query", query_},
            {"state", std::string(to_string(state_))},
            {"cursor", cursor_},
            {"index_ref", index_.snapshot_ref},
            {"current_step", current_ ? guide::to_json(*current_) : json(nullptr)},
            {"history", std::move(history)},
            {"failure", failure_ ? json(*failure_) : json(nullptr)}};
}

}  // namespace pageguide::guide
