#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageguide/dom_index.hpp"
#include "pageguide/llm_gateway.hpp"

namespace pageguide::find {

inline constexpr std::string_view kNotOnPage = "The information is not provided on this page.";

/// Highlight colors, assigned round-robin by plan order.
inline constexpr std::array<std::string_view, 8> kPalette = {
    "#FFE066", "#8CE99A", "#74C0FC", "#FFA8A8",
    "#D0BFFF", "#FFC078", "#63E6BE", "#FAA2C1",
};

/// One `[N:"phrase"]` token in a model answer.
struct Citation {
    int element_id = 0;
    std::string phrase;
    std::size_t answer_offset = 0;  // byte offset of '[' in the raw answer
    std::string token;              // the token's raw bytes
    /// Text right before the token that repeats the phrase plus spacing, as
    /// in `Tom Hardy [27:"Tom Hardy"]`. Empty when there is no such echo.
    std::string echo;

    bool operator==(const Citation&) const = default;
};

/// Citations in textual order. Bracketed integers such as `[1]` and any
/// bracket text outside the grammar are left alone. Inside the phrase, `\"`
/// stands for a quote and `\\` for a backslash.
std::vector<Citation> parse_citations(std::string_view raw);

/// Inverse of the phrase escaping used by parse_citations.
std::string citation_token(int element_id, std::string_view phrase);

struct PlanEntry {
    int element_id = 0;
    std::string phrase;
    /// Absent when the phrase was not found: highlight the whole element.
    std::optional<SpanMatch> span;
    int color_slot = 0;
    NodePath node_path;
};

struct ResolvedCitation {
    Citation citation;
    std::size_t plan_entry = 0;  // index into HighlightPlan::entries
};

struct HighlightPlan {
    std::vector<PlanEntry> entries;
    std::optional<int> scroll_target;
};

struct Resolution {
    HighlightPlan plan;
    std::vector<ResolvedCitation> resolved;
    std::vector<Citation> unresolved;
    std::size_t duplicates = 0;  // resolved citations that reused an entry
};

Resolution resolve_citations(const std::vector<Citation>& citations, const ElementIndex& index,
                             const IndexOptions& options = {});

inline constexpr std::string_view kUnresolvedOpen = "⟦!⟧";
inline constexpr std::string_view kUnresolvedClose = "⟦/!⟧";

/// Replaces each token, together with its echo, by `⟦k⟧phrase⟦/k⟧`
/// (k = 1-based plan entry) or, for unresolved ones, `⟦!⟧phrase⟦/!⟧`.
std::string render_display_text(std::string_view raw, const Resolution& resolution);

/// Rebuilds the raw answer from display text and the citations it was
/// rendered from.
std::string reconstruct_raw(std::string_view display, const Resolution& resolution);

/// Display text with anchor markers removed.
std::string strip_anchors(std::string_view display);

struct ExternalLink {
    std::string label;
    std::string url;

    bool operator==(const ExternalLink&) const = default;
};

/// Markdown `[label](http...)` links in textual order.
std::vector<ExternalLink> extract_links(std::string_view raw);

/// Sentinel check: answer starts with the not-on-page sentence.
bool is_not_on_page(std::string_view raw);

struct Exchange {
    std::string query;
    std::string answer;
};

struct FindOptions {
    std::size_t content_budget = 24000;  // code points of page content
    std::size_t index_budget = 24000;
    std::size_t history_turns = 6;
    IndexOptions index;
};

struct GroundedAnswer {
    std::string raw_text;
    std::string display_text;
    Resolution resolution;
    std::vector<ExternalLink> external_links;
    bool not_on_page = false;
};

/// Element texts in document order, clipped to `budget` code points.
std::string page_content(const ElementIndex& index, std::size_t budget);

std::vector<llm::ChatMessage> build_messages(std::string_view query, const ElementIndex& index,
                                             const std::vector<Exchange>& history,
                                             const FindOptions& options = {});

/// Post-processing of a raw answer: parse, resolve, render, links, sentinel.
GroundedAnswer ground(std::string raw, const ElementIndex& index, const IndexOptions& options = {});

/// Throws Error(BadRequest) for an empty query; gateway errors propagate.
GroundedAnswer answer(std::string_view query, const ElementIndex& index,
                      const std::vector<Exchange>& history, llm::Gateway& gateway,
                      const FindOptions& options = {});

nlohmann::json to_json(const Citation& c);
nlohmann::json to_json(const HighlightPlan& plan);
nlohmann::json to_json(const GroundedAnswer& a);

}  // namespace pageguide::find
