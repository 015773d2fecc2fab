#include "pageguide/snapshot.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pageguide/error.hpp"
#include "pageguide/text.hpp"

namespace pageguide {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << data;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

json parse_json_file(const fs::path& path, ErrorCode on_error) {
    const std::string raw = read_file(path);
    try {
        return json::parse(raw);
    } catch (const json::parse_error& e) {
        throw Error(on_error, path.filename().string() + ": " + e.what());
    }
}

}  // namespace

std::map<std::string, LayoutBox> layout_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::MalformedMeta, "layout must be an array");
    std::map<std::string, LayoutBox> layout;
    try {
        for (const auto& entry : j) {
            if (!entry.is_object() || !entry.contains("path") || !entry["path"].is_string()) {
                throw Error(ErrorCode::MalformedMeta, "layout entry lacks a string path");
            }
            LayoutBox box;
            box.x = entry.value("x", 0.0);
            box.y = entry.value("y", 0.0);
            box.w = entry.value("w", 0.0);
            box.h = entry.value("h", 0.0);
            box.visible = entry.value("visible", true);
            layout.emplace(entry["path"].get<std::string>(), box);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedMeta, std::string("layout entry: ") + e.what());
    }
    return layout;
}

json layout_to_json(const std::map<std::string, LayoutBox>& layout) {
    json entries = json::array();
    for (const auto& [path, box] : layout) {
        entries.push_back({{"path", path}, {"x", box.x}, {"y", box.y}, {"w", box.w},
                           {"h", box.h}, {"visible", box.visible}});
    }
    return entries;
}

bool is_absolute_url(std::string_view url) noexcept {
    static const std::regex pattern(R"(^[A-Za-z][A-Za-z0-9+.\-]*:\S+$)");
    return std::regex_match(url.begin(), url.end(), pattern);
}

bool is_rfc3339(std::string_view ts) noexcept {
    static const std::regex pattern(
        R"(^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+\-]\d{2}:\d{2})$)");
    return std::regex_match(ts.begin(), ts.end(), pattern);
}

std::string Snapshot::digest() const {
    std::string material = url;
    material += '\x1F';
    material += title;
    material += '\x1F';
    material += html::Document::parse(html).serialize();
    return text::sha256_hex(material).substr(0, 16);
}

std::string canonical_html(const Snapshot& s) { return html::Document::parse(s.html).serialize(); }

bool equivalent(const Snapshot& a, const Snapshot& b) {
    return a.url == b.url && a.title == b.title && a.captured_at == b.captured_at &&
           a.layout == b.layout && canonical_html(a) == canonical_html(b);
}

void validate(Snapshot& s) {
    if (!is_absolute_url(s.url)) throw Error(ErrorCode::MalformedMeta, "url is not absolute: " + s.url);
    if (!s.captured_at.empty() && !is_rfc3339(s.captured_at)) {
        throw Error(ErrorCode::MalformedMeta, "captured_at is not RFC 3339: " + s.captured_at);
    }
    if (!text::is_valid_utf8(s.html)) throw Error(ErrorCode::UnparseableHtml, "html is not valid UTF-8");
    if (text::trim(s.html).empty()) throw Error(ErrorCode::UnparseableHtml, "empty document");
    if (!s.layout) return;
    const auto doc = html::Document::parse(s.html);
    for (auto it = s.layout->begin(); it != s.layout->end();) {
        const auto path = NodePath::parse(it->first);
        const bool ok = path && path->str() == it->first && doc.resolve(*path) && it->second.w >= 0 && it->second.h >= 0;
        if (ok) {
            ++it;
        } else {
            ++s.dropped_layout_entries;
            it = s.layout->erase(it);
        }
    }
}

Snapshot make_snapshot(std::string html, std::string url, std::string title, std::string captured_at) {
    Snapshot s;
    s.html = std::move(html);
    s.url = std::move(url);
    s.title = std::move(title);
    s.captured_at = std::move(captured_at);
    validate(s);
    return s;
}

std::string meta_json(const Snapshot& snapshot) {
    json meta = json::object();
    meta["url"] = snapshot.url;
    meta["title"] = snapshot.title;
    if (!snapshot.captured_at.empty()) meta["captured_at"] = snapshot.captured_at;
    return meta.dump(2) + "\n";
}

Snapshot load_snapshot(const fs::path& bundle_dir) {
    const fs::path page = bundle_dir / "page.html";
    const fs::path meta_path = bundle_dir / "meta.json";
    if (!fs::exists(page)) throw Error(ErrorCode::MissingFile, "missing " + page.string());
    if (!fs::exists(meta_path)) throw Error(ErrorCode::MissingFile, "missing " + meta_path.string());

    Snapshot s;
    s.html = read_file(page);
    const json meta = parse_json_file(meta_path, ErrorCode::MalformedMeta);
    if (!meta.is_object() || !meta.contains("url") || !meta["url"].is_string() ||
        !meta.contains("title") || !meta["title"].is_string()) {
        throw Error(ErrorCode::MalformedMeta, "meta.json lacks url/title");
    }
    s.url = meta["url"].get<std::string>();
    s.title = meta["title"].get<std::string>();
    if (meta.contains("captured_at")) {
        if (!meta["captured_at"].is_string()) throw Error(ErrorCode::MalformedMeta, "captured_at must be a string");
        s.captured_at = meta["captured_at"].get<std::string>();
    }
    const fs::path layout_path = bundle_dir / "layout.json";
    if (fs::exists(layout_path)) s.layout = layout_from_json(parse_json_file(layout_path, ErrorCode::MalformedMeta));
    validate(s);
    return s;
}

fs::path save_snapshot(const Snapshot& snapshot, const fs::path& bundle_dir) {
    std::error_code ec;
    fs::create_directories(bundle_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + bundle_dir.string() + ": " + ec.message());
    write_file(bundle_dir / "page.html", snapshot.html);
    write_file(bundle_dir / "meta.json", meta_json(snapshot));
    if (snapshot.layout) {
        write_file(bundle_dir / "layout.json", layout_to_json(*snapshot.layout).dump(2) + "\n");
    } else if (fs::exists(bundle_dir / "layout.json")) {
        fs::remove(bundle_dir / "layout.json", ec);
    }
    return bundle_dir;
}

std::vector<Snapshot> load_sequence(const fs::path& manifest) {
    const json list = parse_json_file(manifest, ErrorCode::MalformedMeta);
    if (!list.is_array()) throw Error(ErrorCode::MalformedMeta, "sequence manifest must be an array");
    if (list.empty()) throw Error(ErrorCode::EmptySequence, "sequence manifest lists no bundles");
    std::vector<Snapshot> out;
    out.reserve(list.size());
    const fs::path base = manifest.parent_path();
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (!list[i].is_string()) {
            throw Error(ErrorCode::MalformedMeta, "sequence entry " + std::to_string(i) + " is not a path",
                        {{"index", i}});
        }
        try {
            out.push_back(load_snapshot(base / list[i].get<std::string>()));
        } catch (const Error& e) {
            throw Error(e.code(), "sequence entry " + std::to_string(i) + ": " + e.message(),
                        {{"index", i}});
        }
    }
    return out;
}

}  // namespace pageguide
