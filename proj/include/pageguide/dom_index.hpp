#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pageguide/snapshot.hpp"

namespace pageguide {

struct IndexOptions {
    std::size_t elem_clip = 120;   // characters per element in prompt lines
    double line_height = 20.0;     // pseudo-box height when no layout is known
    double fuzzy_min = 0.8;        // minimum token-set Jaccard for fuzzy spans
};

/// One Set-of-Marks entry: an element the model can cite by `id`.
struct IndexedElement {
    int id = 0;
    std::string text;  // normalized visible text
    std::string tag;
    LayoutBox bbox;
    bool interactive = false;
    NodePath node_path;

    bool operator==(const IndexedElement&) const = default;
};

/// The element index over one snapshot. Ids are exactly 1..m in document order.
struct ElementIndex {
    std::vector<IndexedElement> elements;
    std::string snapshot_ref;

    std::size_t size() const noexcept { return elements.size(); }
    bool empty() const noexcept { return elements.empty(); }
    /// nullptr when `id` is out of range.
    const IndexedElement* find(int id) const noexcept;
    const IndexedElement* find(const NodePath& path) const noexcept;

    bool operator==(const ElementIndex&) const = default;
};

/// `ref` overrides the default snapshot reference (the snapshot digest).
ElementIndex build_index(const Snapshot& snapshot, const IndexOptions& options = {},
                         std::optional<std::string> ref = std::nullopt);

/// Prompt-facing listing: one `[id] (tag) text` line per element.
std::string serialize_index(const ElementIndex& index, std::size_t char_budget,
                            const IndexOptions& options = {});

/// Throws Error(UnknownElementId) for ids outside 1..m.
const IndexedElement& resolve_element(const ElementIndex& index, int id);

enum class MatchTier { Exact, CaseInsensitive, WhitespaceNormalized, Fuzzy };

std::string_view to_string(MatchTier tier) noexcept;

/// Half-open code-point range inside an element's text.
struct SpanMatch {
    int element_id = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    MatchTier tier = MatchTier::Exact;
    double score = 1.0;

    bool operator==(const SpanMatch&) const = default;
};

/// Tries exact, case-insensitive, whitespace-collapsed, then fuzzy matching;
/// returns the leftmost match of the first tier that succeeds.
/// Throws Error(NoSpanMatch) when every tier fails.
SpanMatch find_text_span(const IndexedElement& element, std::string_view phrase,
                         const IndexOptions& options = {});

/// Inline-style visibility check for one element (not its ancestors).
bool hidden_by_markup(const html::Node& element);

}  // namespace pageguide
