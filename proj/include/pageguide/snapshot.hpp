#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pageguide/html.hpp"

namespace pageguide {

using html::NodePath;

/// Capture-time geometry for one node, in CSS pixels.
struct LayoutBox {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;
    bool visible = true;

    bool operator==(const LayoutBox&) const = default;
};

/// A captured page: the offline stand-in for a live browser tab. Immutable
/// after load; safe to share between threads.
struct Snapshot {
    std::string html;
    std::string url;
    std::string title;
    std::string captured_at;  // RFC 3339, may be empty
    /// Keyed by NodePath text form.
    std::optional<std::map<std::string, LayoutBox>> layout;
    /// Layout entries dropped at load because their path did not resolve.
    int dropped_layout_entries = 0;

    /// Content digest over url, title and canonical html. Used as the
    /// default index reference.
    std::string digest() const;
};

/// Field equality with html compared after canonical re-serialization.
bool equivalent(const Snapshot& a, const Snapshot& b);

/// Canonical re-serialization of the snapshot's html.
std::string canonical_html(const Snapshot& s);

/// Throws Error(MalformedMeta / UnparseableHtml) when invalid; also drops
/// unresolvable layout entries, counting them in dropped_layout_entries.
void validate(Snapshot& s);

Snapshot make_snapshot(std::string html, std::string url, std::string title,
                       std::string captured_at = {});

Snapshot load_snapshot(const std::filesystem::path& bundle_dir);
std::filesystem::path save_snapshot(const Snapshot& snapshot, const std::filesystem::path& bundle_dir);

/// Reads `sequence.json` (array of paths relative to the manifest's
/// directory). Errors from individual bundles carry the failing index.
std::vector<Snapshot> load_sequence(const std::filesystem::path& manifest);

/// The exact bytes written to meta.json.
std::string meta_json(const Snapshot& snapshot);

/// Layout sidecar: array of {path, x, y, w, h, visible}, sorted by path.
/// Throws Error(MalformedMeta).
std::map<std::string, LayoutBox> layout_from_json(const nlohmann::json& j);
nlohmann::json layout_to_json(const std::map<std::string, LayoutBox>& layout);

bool is_absolute_url(std::string_view url) noexcept;
bool is_rfc3339(std::string_view ts) noexcept;

}  // namespace pageguide
