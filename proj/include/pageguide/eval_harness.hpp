#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageguide/guide_engine.hpp"
#include "pageguide/hide_engine.hpp"
#include "pageguide/intent_router.hpp"
#include "pageguide/llm_gateway.hpp"

namespace pageguide::eval {

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const PRF&) const = default;
};

inline PRF prf_from_counts(double overlap, double predicted, double gold) {
    PRF r;
    r.precision = predicted > 0 ? overlap / predicted : 0.0;
    r.recall = gold > 0 ? overlap / gold : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

/// Zero-division cases yield 0.
template <typename T>
PRF set_prf(const std::set<T>& predicted, const std::set<T>& gold) {
    std::size_t overlap = 0;
    for (const auto& p : predicted) overlap += gold.count(p);
    return prf_from_counts(static_cast<double>(overlap), static_cast<double>(predicted.size()),
                           static_cast<double>(gold.size()));
}

/// Token-level F1 over answer_tokens with multiset overlap; 1.0 when both
/// sides have no tokens.
double token_f1(std::string_view predicted, std::string_view gold);

/// True iff the tokens of `gold` occur contiguously in the tokens of
/// `answer`. A gold answer without tokens never matches.
bool contains_answer(std::string_view answer, std::string_view gold);

enum class Kind { Router, Find, Hide, Guide };

std::string_view to_string(Kind k) noexcept;
std::optional<Kind> parse_kind(std::string_view s) noexcept;

struct RouterCase {
    std::string id;
    std::string query;
    router::Handler gold = router::Handler::Find;  // find, guide or hide
    std::optional<std::filesystem::path> snapshot;
};

struct FindCase {
    std::string id;
    std::filesystem::path snapshot;
    std::string query;
    std::vector<std::string> gold_answers;
    std::vector<NodePath> gold_element_paths;
};

struct HideCase {
    std::string id;
    std::filesystem::path snapshot;
    std::string request;
    hide::Difficulty difficulty = hide::Difficulty::Easy;
    std::optional<int> target_types;
    std::vector<NodePath> gold_target_paths;
};

struct TraceStep {
    std::string action;  // click, type, input, scroll or navigate
    NodePath target;
};

struct GuideCase {
    std::string id;
    std::filesystem::path sequence;
    std::string query;
    std::vector<TraceStep> gold_trace;
    int reference_length = 0;
    hide::Difficulty difficulty = hide::Difficulty::Easy;
};

/// JSON Lines loaders. Relative paths resolve against the dataset's
/// directory. Throw Error(SchemaViolation) with the 1-based line number,
/// Error(EmptyDataset) when no case is present, Error(MissingFile).
std::vector<RouterCase> load_router_cases(const std::filesystem::path& file);
std::vector<FindCase> load_find_cases(const std::filesystem::path& file);
std::vector<HideCase> load_hide_cases(const std::filesystem::path& file);
std::vector<GuideCase> load_guide_cases(const std::filesystem::path& file);

/// Guide trace labels compare in the step schema's vocabulary: type maps to
/// input and navigate to click.
std::string normalize_action(std::string_view action);

/// Reports are plain JSON: sorted keys, no timestamps. A case that raises
/// an error scores 0 on every metric and is listed under "errors".
nlohmann::json eval_router(const std::vector<RouterCase>& cases, llm::Gateway& gateway);
nlohmann::json eval_find(const std::vector<FindCase>& cases, llm::Gateway& gateway);
nlohmann::json eval_hide(const std::vector<HideCase>& cases, llm::Gateway& gateway);
nlohmann::json eval_guide(const std::vector<GuideCase>& cases, llm::Gateway& gateway);

/// Loads the dataset, runs the matching eval and adds provenance (model,
/// dataset and transcript SHA-256).
nlohmann::json run_eval(Kind kind, const std::filesystem::path& dataset, llm::Gateway& gateway);

}  // namespace pageguide::eval
