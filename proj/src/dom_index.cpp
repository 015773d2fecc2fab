#include "pageguide/dom_index.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "pageguide/error.hpp"
#include "pageguide/text.hpp"

namespace pageguide {

namespace {

using html::Node;
using html::NodeKind;

bool in_set(std::string_view s, std::initializer_list<std::string_view> set) noexcept {
    return std::find(set.begin(), set.end(), s) != set.end();
}

bool excluded_subtree(std::string_view tag) noexcept {
    return in_set(tag, {"script", "style", "template", "head", "noscript"});
}

bool is_interactive(const Node& el) {
    const auto& tag = el.name();
    if (tag == "a") return el.has_attribute("href");
    if (in_set(tag, {"button", "select", "textarea", "summary"})) return true;
    if (tag == "input") {
        const std::string* type = el.attribute("type");
        return !type || text::to_lower_ascii(*type) != "hidden";
    }
    if (const std::string* role = el.attribute("role")) {
        const auto r = text::to_lower_ascii(text::trim(*role));
        if (in_set(r, {"button", "link", "checkbox", "radio", "menuitem", "menuitemcheckbox",
                       "menuitemradio", "tab", "switch", "option", "textbox", "combobox",
                       "searchbox", "slider", "spinbutton", "treeitem"})) {
            return true;
        }
    }
    for (const char* handler : {"onclick", "ondblclick", "onmousedown", "onmouseup", "onkeydown",
                                "onkeyup", "onkeypress", "onchange", "oninput", "onsubmit"}) {
        if (el.has_attribute(handler)) return true;
    }
    if (const std::string* editable = el.attribute("contenteditable")) {
        const auto v = text::to_lower_ascii(*editable);
        return v.empty() || v == "true" || v == "plaintext-only";
    }
    return false;
}

std::string direct_text(const Node& el) {
    std::string joined;
    for (const auto& child : el.children()) {
        if (child->kind() == NodeKind::Text) {
            joined += ' ';
            joined += child->data();
        }
    }
    return text::collapse_whitespace(joined);
}

struct Visibility {
    const Snapshot* snapshot;

    bool layout_hidden(const NodePath& path) const {
        if (!snapshot->layout) return false;
        auto it = snapshot->layout->find(path.str());
        if (it == snapshot->layout->end()) return false;
        const auto& box = it->second;
        return !box.visible || box.w * box.h <= 0;
    }
};

void descendant_text(const Node& node, std::string& out) {
    for (const auto& child : node.children()) {
        if (child->kind() == NodeKind::Text) {
            out += ' ';
            out += child->data();
        } else if (child->is_element() && !excluded_subtree(child->name()) &&
                   !hidden_by_markup(*child)) {
            descendant_text(*child, out);
        }
    }
}

std::string descendant_alt(const Node& node) {
    for (const auto& child : node.children()) {
        if (!child->is_element()) continue;
        if (child->name() == "img") {
            if (const std::string* alt = child->attribute("alt")) {
                auto t = text::collapse_whitespace(*alt);
                if (!t.empty()) return t;
            }
        }
        auto nested = descendant_alt(*child);
        if (!nested.empty()) return nested;
    }
    return {};
}

// Label for an interactive element that carries no direct text.
std::string interactive_label(const Node& el) {
    auto attr_text = [&](std::string_view name) -> std::string {
        const std::string* v = el.attribute(name);
        return v ? text::collapse_whitespace(*v) : std::string();
    };
    if (auto t = attr_text("aria-label"); !t.empty()) return t;
    std::string agg;
    descendant_text(el, agg);
    if (auto t = text::collapse_whitespace(agg); !t.empty()) return t;
    if (auto t = descendant_alt(el); !t.empty()) return t;
    if (el.name() == "input") {
        if (auto t = attr_text("value"); !t.empty()) return t;
    }
    if (auto t = attr_text("placeholder"); !t.empty()) return t;
    return attr_text("title");
}

class IndexBuilder {
public:
    IndexBuilder(const Snapshot& snapshot, const IndexOptions& options)
        : visibility_{&snapshot}, options_(options) {}

    void visit(const Node& node) {
        if (node.kind() == NodeKind::Document) {
            for (const auto& child : node.children()) visit(*child);
            return;
        }
        if (!node.is_element()) return;
        if (excluded_subtree(node.name()) || hidden_by_markup(node)) return;
        const NodePath path = NodePath::of(node);
        if (visibility_.layout_hidden(path)) return;

        const bool interactive = is_interactive(node);
        std::string label = direct_text(node);
        if (label.empty() && interactive) label = interactive_label(node);
        if (!label.empty() || interactive) emit(node, path, std::move(label), interactive);

        for (const auto& child : node.children()) visit(*child);
    }

    std::vector<IndexedElement> take() { return std::move(elements_); }

private:
    void emit(const Node& node, const NodePath& path, std::string label, bool interactive) {
        IndexedElement el;
        el.id = static_cast<int>(elements_.size()) + 1;
        el.text = std::move(label);
        el.tag = node.name();
        el.interactive = interactive;
        el.node_path = path;
        const auto& layout = visibility_.snapshot->layout;
        const LayoutBox* captured = nullptr;
        if (layout) {
            if (auto it = layout->find(path.str()); it != layout->end()) captured = &it->second;
        }
        if (captured) {
            el.bbox = *captured;
        } else {
            const double k = static_cast<double>(elements_.size());
            el.bbox = LayoutBox{0, k * options_.line_height, 0, options_.line_height, true};
        }
        elements_.push_back(std::move(el));
    }

    Visibility visibility_;
    const IndexOptions& options_;
    std::vector<IndexedElement> elements_;
};

}  // namespace

bool hidden_by_markup(const Node& element) {
    if (element.has_attribute("hidden")) return true;
    if (const std::string* aria = element.attribute("aria-hidden")) {
        if (text::to_lower_ascii(text::trim(*aria)) == "true") return true;
    }
    const std::string* style = element.attribute("style");
    if (!style) return false;
    std::string_view rest = *style;
    while (!rest.empty()) {
        const auto semi = rest.find(';');
        std::string_view decl = rest.substr(0, semi);
        rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
        const auto colon = decl.find(':');
        if (colon == std::string_view::npos) continue;
        const auto prop = text::to_lower_ascii(text::trim(decl.substr(0, colon)));
        auto value = text::to_lower_ascii(text::trim(decl.substr(colon + 1)));
        if (auto bang = value.find('!'); bang != std::string::npos) {
            value = std::string(text::trim(std::string_view(value).substr(0, bang)));
        }
        if (prop == "display" && value == "none") return true;
        if (prop == "visibility" && (value == "hidden" || value == "collapse")) return true;
    }
    return false;
}

const IndexedElement* ElementIndex::find(int id) const noexcept {
    if (id < 1 || static_cast<std::size_t>(id) > elements.size()) return nullptr;
    return &elements[static_cast<std::size_t>(id) - 1];
}

const IndexedElement* ElementIndex::find(const NodePath& path) const noexcept {
    for (const auto& el : elements) {
        if (el.node_path == path) return &el;
    }
    return nullptr;
}

ElementIndex build_index(const Snapshot& snapshot, const IndexOptions& options,
                         std::optional<std::string> ref) {
    if (text::trim(snapshot.html).empty()) throw Error(ErrorCode::UnparseableHtml, "empty document");
    const auto doc = html::Document::parse(snapshot.html);
    IndexBuilder builder(snapshot, options);
    builder.visit(doc.root());
    ElementIndex index;
    index.elements = builder.take();
    index.snapshot_ref = ref ? std::move(*ref) : snapshot.digest();
    return index;
}

std::string serialize_index(const ElementIndex& index, std::size_t char_budget,
                            const IndexOptions& options) {
    std::string out;
    std::size_t used = 0;
    std::size_t emitted = 0;
    for (const auto& el : index.elements) {
        std::string line = "[" + std::to_string(el.id) + "] (" + el.tag + ")";
        if (!el.text.empty()) {
            line += ' ';
            if (text::length(el.text) > options.elem_clip) {
                line += text::clip(el.text, options.elem_clip);
                line += "…";
            } else {
                line += el.text;
            }
        }
        const std::size_t cost = text::length(line) + (emitted ? 1 : 0);
        if (used + cost > char_budget) break;
        if (emitted) out += '\n';
        out += line;
        used += cost;
        ++emitted;
    }
    if (emitted < index.size()) {
        if (emitted) out += '\n';
        out += "…(" + std::to_string(index.size() - emitted) + " more elements)";
    }
    return out;
}

const IndexedElement& resolve_element(const ElementIndex& index, int id) {
    if (const IndexedElement* el = index.find(id)) return *el;
    throw Error(ErrorCode::UnknownElementId,
                "element " + std::to_string(id) + " is not in the index (m=" +
                    std::to_string(index.size()) + ")",
                {{"element_id", id}});
}

std::string_view to_string(MatchTier tier) noexcept {
    switch (tier) {
        case MatchTier::Exact: return "exact";
        case MatchTier::CaseInsensitive: return "case-insensitive";
        case MatchTier::WhitespaceNormalized: return "whitespace-normalized";
        case MatchTier::Fuzzy: return "fuzzy";
    }
    return "exact";
}

namespace {

struct Collapsed {
    std::u32string chars;
    std::vector<std::size_t> origin;  // index into the source for each char
};

Collapsed collapse_with_map(const std::u32string& s) {
    Collapsed c;
    bool pending = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (text::is_space(s[i])) {
            pending = !c.chars.empty();
            continue;
        }
        if (pending) {
            c.chars.push_back(' ');
            c.origin.push_back(i - 1);
        }
        pending = false;
        c.chars.push_back(s[i]);
        c.origin.push_back(i);
    }
    return c;
}

struct Token {
    std::u32string norm;
    std::size_t begin = 0;
    std::size_t end = 0;
};

std::vector<Token> fuzzy_tokens(const std::u32string& s) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && text::is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !text::is_space(s[j])) ++j;
        std::size_t b = i;
        std::size_t e = j;
        while (b < e && text::is_punct(s[b])) ++b;
        while (e > b && text::is_punct(s[e - 1])) --e;
        if (b < e) tokens.push_back({text::fold_case(s.substr(b, e - b)), b, e});
        i = j;
    }
    return tokens;
}

}  // namespace

SpanMatch find_text_span(const IndexedElement& element, std::string_view phrase,
                         const IndexOptions& options) {
    const std::u32string body = text::decode_utf8(element.text);
    const std::u32string needle = text::decode_utf8(phrase);
    auto fail = [&]() {
        return Error(ErrorCode::NoSpanMatch,
                     "phrase not found in element " + std::to_string(element.id),
                     {{"element_id", element.id}, {"phrase", std::string(phrase)}});
    };
    if (needle.empty() || body.empty()) throw fail();

    SpanMatch m;
    m.element_id = element.id;
    if (auto pos = body.find(needle); pos != std::u32string::npos) {
        m.start = pos;
        m.end = pos + needle.size();
        m.tier = MatchTier::Exact;
        return m;
    }
    const std::u32string folded_body = text::fold_case(body);
    const std::u32string folded_needle = text::fold_case(needle);
    if (auto pos = folded_body.find(folded_needle); pos != std::u32string::npos) {
        m.start = pos;
        m.end = pos + needle.size();
        m.tier = MatchTier::CaseInsensitive;
        return m;
    }
    const Collapsed cb = collapse_with_map(folded_body);
    const Collapsed cn = collapse_with_map(folded_needle);
    if (!cn.chars.empty()) {
        if (auto pos = cb.chars.find(cn.chars); pos != std::u32string::npos) {
            m.start = cb.origin[pos];
            m.end = cb.origin[pos + cn.chars.size() - 1] + 1;
            m.tier = MatchTier::WhitespaceNormalized;
            return m;
        }
    }

    const auto body_tokens = fuzzy_tokens(body);
    const auto needle_tokens = fuzzy_tokens(needle);
    std::unordered_set<std::u32string> wanted;
    for (const auto& t : needle_tokens) wanted.insert(t.norm);
    if (wanted.empty() || body_tokens.empty()) throw fail();

    const double max_distinct = static_cast<double>(wanted.size()) / options.fuzzy_min;
    double best = -1.0;
    std::size_t best_i = 0;
    std::size_t best_j = 0;
    for (std::size_t i = 0; i < body_tokens.size(); ++i) {
        std::unordered_map<std::u32string, int> counts;
        std::size_t inter = 0;
        for (std::size_t j = i; j < body_tokens.size(); ++j) {
            if (counts[body_tokens[j].norm]++ == 0 && wanted.count(body_tokens[j].norm)) ++inter;
            const std::size_t distinct = counts.size();
            if (static_cast<double>(distinct) > max_distinct) break;
            const double score = static_cast<double>(inter) /
                                 static_cast<double>(distinct + wanted.size() - inter);
            if (score > best) {
                best = score;
                best_i = i;
                best_j = j;
            }
        }
    }
    if (best < options.fuzzy_min) throw fail();
    m.start = body_tokens[best_i].begin;
    m.end = body_tokens[best_j].end;
    m.tier = MatchTier::Fuzzy;
    m.score = best;
    return m;
}

}  // namespace pageguide
