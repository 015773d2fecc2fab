#include "pageguide/html.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <unordered_map>
#include <unordered_set>

#include "pageguide/text.hpp"

namespace pageguide::html {

namespace {

bool is_html_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

bool is_ascii_alpha(char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool in_set(std::string_view tag, std::initializer_list<std::string_view> set) noexcept {
    return std::find(set.begin(), set.end(), tag) != set.end();
}

bool is_heading(std::string_view tag) noexcept {
    return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6';
}

bool closes_paragraph(std::string_view tag) noexcept {
    return is_heading(tag) ||
           in_set(tag, {"address", "article", "aside", "blockquote", "center", "details", "dialog",
                        "dir", "div", "dl", "fieldset", "figcaption", "figure", "footer", "form",
                        "header", "hgroup", "hr", "main", "menu", "nav", "ol", "p", "pre",
                        "section", "summary", "table", "ul", "li", "dd", "dt", "listing",
                        "plaintext", "xmp"});
}

bool is_head_content(std::string_view tag) noexcept {
    return in_set(tag, {"title", "style", "script", "meta", "link", "base"});
}

const std::unordered_map<std::string_view, char32_t>& named_entities() {
    static const std::unordered_map<std::string_view, char32_t> table = {
        {"amp", '&'},       {"lt", '<'},        {"gt", '>'},        {"quot", '"'},
        {"apos", '\''},     {"nbsp", 0xA0},     {"copy", 0xA9},     {"reg", 0xAE},
        {"trade", 0x2122},  {"hellip", 0x2026}, {"mdash", 0x2014},  {"ndash", 0x2013},
        {"lsquo", 0x2018},  {"rsquo", 0x2019},  {"ldquo", 0x201C},  {"rdquo", 0x201D},
        {"sbquo", 0x201A},  {"bdquo", 0x201E},  {"bull", 0x2022},   {"middot", 0xB7},
        {"times", 0xD7},    {"divide", 0xF7},   {"euro", 0x20AC},   {"pound", 0xA3},
        {"yen", 0xA5},      {"cent", 0xA2},     {"deg", 0xB0},      {"plusmn", 0xB1},
        {"para", 0xB6},     {"sect", 0xA7},     {"laquo", 0xAB},    {"raquo", 0xBB},
        {"frac12", 0xBD},   {"frac14", 0xBC},   {"frac34", 0xBE},   {"iexcl", 0xA1},
        {"iquest", 0xBF},   {"shy", 0xAD},      {"ensp", 0x2002},   {"emsp", 0x2003},
        {"thinsp", 0x2009}, {"zwnj", 0x200C},   {"zwj", 0x200D},    {"larr", 0x2190},
        {"uarr", 0x2191},   {"rarr", 0x2192},   {"darr", 0x2193},   {"harr", 0x2194},
        {"hearts", 0x2665}, {"star", 0x2606},   {"check", 0x2713},  {"vellip", 0x22EE},
        {"dagger", 0x2020}, {"Dagger", 0x2021}, {"prime", 0x2032},  {"Prime", 0x2033},
        {"micro", 0xB5},    {"ordf", 0xAA},     {"ordm", 0xBA},     {"sup1", 0xB9},
        {"sup2", 0xB2},     {"sup3", 0xB3},     {"acute", 0xB4},    {"uml", 0xA8},
        {"Agrave", 0xC0},   {"Aacute", 0xC1},   {"Acirc", 0xC2},    {"Atilde", 0xC3},
        {"Auml", 0xC4},     {"Aring", 0xC5},    {"AElig", 0xC6},    {"Ccedil", 0xC7},
        {"Egrave", 0xC8},   {"Eacute", 0xC9},   {"Ecirc", 0xCA},    {"Euml", 0xCB},
        {"Iacute", 0xCD},   {"Ntilde", 0xD1},   {"Oacute", 0xD3},   {"Ouml", 0xD6},
        {"Oslash", 0xD8},   {"Uacute", 0xDA},   {"Uuml", 0xDC},     {"szlig", 0xDF},
        {"agrave", 0xE0},   {"aacute", 0xE1},   {"acirc", 0xE2},    {"atilde", 0xE3},
        {"auml", 0xE4},     {"aring", 0xE5},    {"aelig", 0xE6},    {"ccedil", 0xE7},
        {"egrave", 0xE8},   {"eacute", 0xE9},   {"ecirc", 0xEA},    {"euml", 0xEB},
        {"igrave", 0xEC},   {"iacute", 0xED},   {"icirc", 0xEE},    {"iuml", 0xEF},
        {"ntilde", 0xF1},   {"ograve", 0xF2},   {"oacute", 0xF3},   {"ocirc", 0xF4},
        {"otilde", 0xF5},   {"ouml", 0xF6},     {"oslash", 0xF8},   {"ugrave", 0xF9},
        {"uacute", 0xFA},   {"ucirc", 0xFB},    {"uuml", 0xFC},     {"yuml", 0xFF},
        {"alpha", 0x3B1},   {"beta", 0x3B2},    {"gamma", 0x3B3},   {"delta", 0x3B4},
        {"pi", 0x3C0},      {"sigma", 0x3C3},   {"omega", 0x3C9},   {"mu", 0x3BC},
        {"le", 0x2264},     {"ge", 0x2265},     {"ne", 0x2260},     {"infin", 0x221E},
        {"minus", 0x2212},  {"asymp", 0x2248},  {"sum", 0x2211},    {"radic", 0x221A},
    };
    return table;
}

// Entities browsers still decode without the trailing semicolon.
bool legacy_entity(std::string_view name) noexcept {
    return in_set(name, {"amp", "lt", "gt", "quot", "nbsp", "copy", "reg"});
}

char32_t sanitize_codepoint(std::uint32_t cp) noexcept {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0xFFFD;
    return static_cast<char32_t>(cp);
}

}  // namespace

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c != '&') {
            out.push_back(c);
            ++i;
            continue;
        }
        if (i + 1 < s.size() && s[i + 1] == '#') {
            std::size_t j = i + 2;
            int base = 10;
            if (j < s.size() && (s[j] == 'x' || s[j] == 'X')) {
                base = 16;
                ++j;
            }
            const std::size_t digits_begin = j;
            while (j < s.size() && (base == 16 ? std::isxdigit(static_cast<unsigned char>(s[j]))
                                               : std::isdigit(static_cast<unsigned char>(s[j])))) {
                ++j;
            }
            if (j == digits_begin) {
                out.push_back('&');
                ++i;
                continue;
            }
            std::uint64_t value = 0;
            const auto digits = s.substr(digits_begin, std::min<std::size_t>(j - digits_begin, 8));
            std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
            if (j - digits_begin > 8) value = 0x110000;
            text::append_utf8(out, sanitize_codepoint(static_cast<std::uint32_t>(
                                       std::min<std::uint64_t>(value, 0x110000))));
            if (j < s.size() && s[j] == ';') ++j;
            i = j;
            continue;
        }
        std::size_t j = i + 1;
        while (j < s.size() && j - i <= 32 && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
        const std::string_view name = s.substr(i + 1, j - i - 1);
        const bool terminated = j < s.size() && s[j] == ';';
        const auto& table = named_entities();
        if (auto it = table.find(name); it != table.end() && (terminated || legacy_entity(name))) {
            text::append_utf8(out, it->second);
            i = terminated ? j + 1 : j;
            continue;
        }
        out.push_back('&');
        ++i;
    }
    return out;
}

bool is_void_element(std::string_view tag) noexcept {
    return in_set(tag, {"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta",
                        "param", "source", "track", "wbr", "keygen", "frame", "basefont",
                        "bgsound"});
}

bool is_raw_text_element(std::string_view tag) noexcept {
    return in_set(tag, {"script", "style", "xmp", "iframe", "noembed", "noframes", "plaintext",
                        "textarea", "title"});
}

namespace {

bool is_escapable_raw(std::string_view tag) noexcept {
    return tag == "textarea" || tag == "title";
}

}  // namespace

// ---------------------------------------------------------------------------
// Node

const std::string* Node::attribute(std::string_view name) const noexcept {
    for (const auto& a : attrs_) {
        if (a.name == name) return &a.value;
    }
    return nullptr;
}

void Node::set_attribute(std::string_view name, std::string value) {
    for (auto& a : attrs_) {
        if (a.name == name) {
            a.value = std::move(value);
            return;
        }
    }
    attrs_.push_back({std::string(name), std::move(value)});
}

void Node::remove_attribute(std::string_view name) {
    std::erase_if(attrs_, [&](const Attribute& a) { return a.name == name; });
}

Node& Node::append_child(std::unique_ptr<Node> child) {
    child->parent_ = this;
    children_.push_back(std::move(child));
    return *children_.back();
}

std::unique_ptr<Node> Node::clone() const {
    auto copy = std::make_unique<Node>(kind_, name_);
    copy->data_ = data_;
    copy->attrs_ = attrs_;
    for (const auto& child : children_) copy->append_child(child->clone());
    return copy;
}

// ---------------------------------------------------------------------------
// NodePath

std::optional<NodePath> NodePath::parse(std::string_view s) {
    if (s.empty() || s.front() != '/') return std::nullopt;
    std::vector<PathStep> steps;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '/') return std::nullopt;
        ++i;
        const std::size_t open = s.find('[', i);
        if (open == std::string_view::npos || open == i) return std::nullopt;
        const std::size_t close = s.find(']', open);
        if (close == std::string_view::npos || close == open + 1) return std::nullopt;
        int ordinal = 0;
        const auto digits = s.substr(open + 1, close - open - 1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), ordinal);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || ordinal < 1) {
            return std::nullopt;
        }
        const auto tag = s.substr(i, open - i);
        if (tag.find('/') != std::string_view::npos) return std::nullopt;
        steps.push_back({std::string(tag), ordinal});
        i = close + 1;
    }
    return NodePath(std::move(steps));
}

NodePath NodePath::of(const Node& element) {
    std::vector<PathStep> steps;
    for (const Node* n = &element; n && n->is_element(); n = n->parent()) {
        int ordinal = 1;
        if (const Node* p = n->parent()) {
            for (const auto& sib : p->children()) {
                if (sib.get() == n) break;
                if (sib->is_element(n->name())) ++ordinal;
            }
        }
        steps.push_back({n->name(), ordinal});
    }
    std::reverse(steps.begin(), steps.end());
    return NodePath(std::move(steps));
}

std::string NodePath::str() const {
    std::string out;
    for (const auto& step : steps_) {
        out += '/';
        out += step.tag;
        out += '[';
        out += std::to_string(step.ordinal);
        out += ']';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tree construction

class TreeBuilder {
public:
    explicit TreeBuilder(Node& root) : root_(root) {}

    void run(std::string_view input);

private:
    enum class Mode { Initial, InHead, AfterHead, InBody };

    // Tokenizer helpers
    void tag_open(std::string_view input, std::size_t& pos);
    std::vector<Attribute> read_attributes(std::string_view input, std::size_t& pos,
                                           bool& self_closing);
    void read_raw_text(std::string_view input, std::size_t& pos, Node& element);

    // Tree construction
    void on_doctype(std::string name);
    void on_comment(std::string data);
    void on_text(std::string_view raw);
    Node* on_start_tag(const std::string& name, std::vector<Attribute> attrs, bool self_closing);
    void on_end_tag(const std::string& name);

    void ensure_html();
    void ensure_head();
    void ensure_body();
    Node& current() { return *stack_.back(); }
    Node& insert_element(const std::string& name, std::vector<Attribute> attrs, Node& parent);
    void append_text(Node& parent, std::string_view text);
    void merge_attributes(Node& element, std::vector<Attribute> attrs);

    bool in_scope(std::string_view tag, std::initializer_list<std::string_view> extra = {}) const;
    bool in_table_scope(std::string_view tag) const;
    void pop_until(std::string_view tag);
    void pop_until_any(std::initializer_list<std::string_view> tags);
    bool in_foreign() const;

    Node& root_;
    Node* html_ = nullptr;
    Node* head_ = nullptr;
    Node* body_ = nullptr;
    Mode mode_ = Mode::Initial;
    std::vector<Node*> stack_;
};

void TreeBuilder::ensure_html() {
    if (html_) return;
    auto node = std::make_unique<Node>(NodeKind::Element, "html");
    html_ = &root_.append_child(std::move(node));
}

void TreeBuilder::ensure_head() {
    ensure_html();
    if (head_) return;
    head_ = &html_->append_child(std::make_unique<Node>(NodeKind::Element, "head"));
    if (mode_ == Mode::Initial) mode_ = Mode::InHead;
}

void TreeBuilder::ensure_body() {
    ensure_head();
    if (!body_) body_ = &html_->append_child(std::make_unique<Node>(NodeKind::Element, "body"));
    if (mode_ != Mode::InBody) {
        mode_ = Mode::InBody;
        stack_ = {html_, body_};
    }
}

Node& TreeBuilder::insert_element(const std::string& name, std::vector<Attribute> attrs,
                                  Node& parent) {
    auto node = std::make_unique<Node>(NodeKind::Element, name);
    node->attrs_ = std::move(attrs);
    return parent.append_child(std::move(node));
}

void TreeBuilder::append_text(Node& parent, std::string_view text) {
    if (text.empty()) return;
    if (!parent.children_.empty() && parent.children_.back()->kind() == NodeKind::Text) {
        parent.children_.back()->data_ += text;
        return;
    }
    auto node = std::make_unique<Node>(NodeKind::Text);
    node->data_ = std::string(text);
    parent.append_child(std::move(node));
}

void TreeBuilder::merge_attributes(Node& element, std::vector<Attribute> attrs) {
    for (auto& a : attrs) {
        if (!element.has_attribute(a.name)) element.attrs_.push_back(std::move(a));
    }
}

bool TreeBuilder::in_scope(std::string_view tag, std::initializer_list<std::string_view> extra) const {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
        const auto& name = (*it)->name();
        if (name == tag) return true;
        if (in_set(name, {"applet", "caption", "html", "table", "td", "th", "marquee", "object",
                          "template", "svg", "math"}) ||
            in_set(name, extra)) {
            return false;
        }
    }
    return false;
}

bool TreeBuilder::in_table_scope(std::string_view tag) const {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
        const auto& name = (*it)->name();
        if (name == tag) return true;
        if (in_set(name, {"html", "table", "template"})) return false;
    }
    return false;
}

void TreeBuilder::pop_until(std::string_view tag) {
    while (stack_.size() > 2) {
        const bool hit = stack_.back()->name() == tag;
        stack_.pop_back();
        if (hit) return;
    }
}

void TreeBuilder::pop_until_any(std::initializer_list<std::string_view> tags) {
    while (stack_.size() > 2) {
        const bool hit = in_set(stack_.back()->name(), tags);
        stack_.pop_back();
        if (hit) return;
    }
}

bool TreeBuilder::in_foreign() const {
    return std::any_of(stack_.begin(), stack_.end(),
                       [](const Node* n) { return n->name() == "svg" || n->name() == "math"; });
}

void TreeBuilder::on_doctype(std::string name) {
    if (mode_ != Mode::Initial || html_) return;
    root_.append_child(std::make_unique<Node>(NodeKind::Doctype, std::move(name)));
}

void TreeBuilder::on_comment(std::string data) {
    auto node = std::make_unique<Node>(NodeKind::Comment);
    node->data_ = std::move(data);
    if (mode_ == Mode::InBody) {
        current().append_child(std::move(node));
    } else if (head_ && mode_ == Mode::InHead) {
        head_->append_child(std::move(node));
    } else if (html_) {
        html_->append_child(std::move(node));
    } else {
        root_.append_child(std::move(node));
    }
}

void TreeBuilder::on_text(std::string_view raw) {
    std::string decoded = decode_entities(raw);
    if (mode_ != Mode::InBody) {
        // Leading whitespace before the body is dropped, as browsers do.
        std::size_t k = 0;
        while (k < decoded.size() && is_html_space(decoded[k])) ++k;
        if (k == decoded.size()) return;
        decoded.erase(0, k);
        ensure_body();
    }
    append_text(current(), decoded);
}

Node* TreeBuilder::on_start_tag(const std::string& name, std::vector<Attribute> attrs,
                                bool self_closing) {
    if (mode_ != Mode::InBody) {
        if (name == "html") {
            if (html_) {
                merge_attributes(*html_, std::move(attrs));
            } else {
                html_ = &insert_element(name, std::move(attrs), root_);
            }
            return nullptr;
        }
        if (name == "head") {
            if (!head_) {
                ensure_html();
                head_ = &insert_element(name, std::move(attrs), *html_);
                mode_ = Mode::InHead;
            }
            return nullptr;
        }
        if (name == "body") {
            ensure_head();
            body_ = &insert_element(name, std::move(attrs), *html_);
            mode_ = Mode::InBody;
            stack_ = {html_, body_};
            return nullptr;
        }
        if (is_head_content(name)) {
            ensure_head();
            return &insert_element(name, std::move(attrs), *head_);
        }
        ensure_body();
    }

    if (name == "html") {
        merge_attributes(*html_, std::move(attrs));
        return nullptr;
    }
    if (name == "body") {
        merge_attributes(*body_, std::move(attrs));
        return nullptr;
    }
    if (name == "head") return nullptr;

    if (!in_foreign()) {
        if (name == "li") {
            for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
                const auto& n = (*it)->name();
                if (n == "li") {
                    pop_until("li");
                    break;
                }
                if (in_set(n, {"ul", "ol", "menu", "table", "td", "th", "body", "html", "div",
                               "section", "nav", "article", "aside", "template"})) {
                    break;
                }
            }
        } else if (name == "dd" || name == "dt") {
            for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
                const auto& n = (*it)->name();
                if (n == "dd" || n == "dt") {
                    pop_until(n);
                    break;
                }
                if (in_set(n, {"dl", "table", "td", "th", "body", "html", "div", "template"})) break;
            }
        }
        if (closes_paragraph(name) && in_scope("p", {"button"})) pop_until("p");
        if (is_heading(name) && is_heading(current().name())) stack_.pop_back();
        if (name == "option" && current().name() == "option") stack_.pop_back();
        if (name == "optgroup") {
            if (current().name() == "option") stack_.pop_back();
            if (current().name() == "optgroup") stack_.pop_back();
        }
        if (name == "a" && in_scope("a")) pop_until("a");
        if (name == "button" && in_scope("button")) pop_until("button");
        if (name == "tbody" || name == "thead" || name == "tfoot") {
            if (in_table_scope("table")) {
                while (in_set(current().name(), {"td", "th", "tr", "tbody", "thead", "tfoot",
                                                 "caption", "colgroup"}) &&
                       stack_.size() > 2) {
                    stack_.pop_back();
                }
            }
        }
        if (name == "tr") {
            if (in_table_scope("tr")) pop_until("tr");
            if (current().name() == "table") {
                stack_.push_back(&insert_element("tbody", {}, current()));
            }
        }
        if (name == "td" || name == "th") {
            if (in_table_scope("td")) pop_until_any({"td", "th"});
            else if (in_table_scope("th")) pop_until_any({"td", "th"});
            if (current().name() == "table") {
                stack_.push_back(&insert_element("tbody", {}, current()));
            }
            if (in_set(current().name(), {"tbody", "thead", "tfoot"})) {
                stack_.push_back(&insert_element("tr", {}, current()));
            }
        }
    }

    Node& element = insert_element(name, std::move(attrs), current());
    if (is_void_element(name) || is_raw_text_element(name)) return &element;
    if (self_closing && in_foreign()) return &element;
    if (self_closing && (name == "svg" || name == "math")) return &element;
    stack_.push_back(&element);
    return &element;
}

void TreeBuilder::on_end_tag(const std::string& name) {
    if (mode_ != Mode::InBody) {
        if (name == "head" && mode_ == Mode::InHead) mode_ = Mode::AfterHead;
        if (name == "br") {
            ensure_body();
            on_start_tag("br", {}, false);
        }
        return;
    }
    if (name == "body" || name == "html") return;
    if (name == "br") {
        on_start_tag("br", {}, false);
        return;
    }
    if (name == "p") {
        if (in_scope("p", {"button"})) pop_until("p");
        return;
    }
    if (is_heading(name)) {
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
            if (is_heading((*it)->name())) {
                pop_until_any({"h1", "h2", "h3", "h4", "h5", "h6"});
                return;
            }
            if (in_set((*it)->name(), {"table", "td", "th", "body"})) return;
        }
        return;
    }
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
        const auto& n = (*it)->name();
        if (n == name) {
            pop_until(name);
            return;
        }
        if (n == "body" || n == "html") return;
        if (in_set(n, {"table", "td", "th", "caption", "template", "applet", "object",
                       "marquee"}) &&
            !in_set(name, {"tr", "tbody", "thead", "tfoot", "table"})) {
            return;
        }
    }
}

std::vector<Attribute> TreeBuilder::read_attributes(std::string_view input, std::size_t& pos,
                                                    bool& self_closing) {
    std::vector<Attribute> attrs;
    self_closing = false;
    const auto n = input.size();
    while (pos < n) {
        while (pos < n && is_html_space(input[pos])) ++pos;
        if (pos >= n) break;
        if (input[pos] == '>') {
            ++pos;
            return attrs;
        }
        if (input[pos] == '/') {
            ++pos;
            if (pos < n && input[pos] == '>') {
                self_closing = true;
                ++pos;
                return attrs;
            }
            continue;
        }
        const std::size_t name_begin = pos;
        ++pos;  // the first character may be '='
        while (pos < n && !is_html_space(input[pos]) && input[pos] != '/' && input[pos] != '>' &&
               input[pos] != '=') {
            ++pos;
        }
        std::string name = text::to_lower_ascii(input.substr(name_begin, pos - name_begin));
        std::string value;
        std::size_t look = pos;
        while (look < n && is_html_space(input[look])) ++look;
        if (look < n && input[look] == '=') {
            pos = look + 1;
            while (pos < n && is_html_space(input[pos])) ++pos;
            if (pos < n && (input[pos] == '"' || input[pos] == '\'')) {
                const char quote = input[pos++];
                const std::size_t end = input.find(quote, pos);
                const std::size_t stop = end == std::string_view::npos ? n : end;
                value = decode_entities(input.substr(pos, stop - pos));
                pos = stop == n ? n : stop + 1;
            } else {
                const std::size_t begin = pos;
                while (pos < n && !is_html_space(input[pos]) && input[pos] != '>') ++pos;
                value = decode_entities(input.substr(begin, pos - begin));
            }
        }
        const bool duplicate = std::any_of(attrs.begin(), attrs.end(),
                                           [&](const Attribute& a) { return a.name == name; });
        if (!duplicate) attrs.push_back({std::move(name), std::move(value)});
    }
    return attrs;
}

void TreeBuilder::read_raw_text(std::string_view input, std::size_t& pos, Node& element) {
    const std::string& tag = element.name();
    const auto n = input.size();
    std::size_t end = n;
    std::size_t after = n;
    if (tag != "plaintext") {
        std::size_t search = pos;
        while (search < n) {
            const std::size_t lt = input.find("</", search);
            if (lt == std::string_view::npos) break;
            const std::size_t name_end = lt + 2 + tag.size();
            if (name_end <= n &&
                text::to_lower_ascii(input.substr(lt + 2, tag.size())) == tag &&
                (name_end == n || is_html_space(input[name_end]) || input[name_end] == '/' ||
                 input[name_end] == '>')) {
                end = lt;
                const std::size_t gt = input.find('>', name_end);
                after = gt == std::string_view::npos ? n : gt + 1;
                break;
            }
            search = lt + 2;
        }
    }
    std::string_view body = input.substr(pos, end - pos);
    if (is_escapable_raw(tag)) {
        append_text(element, decode_entities(body));
    } else {
        append_text(element, body);
    }
    pos = after;
}

void TreeBuilder::tag_open(std::string_view input, std::size_t& pos) {
    const auto n = input.size();
    // input[pos] == '<'
    if (input.substr(pos, 4) == "<!--") {
        std::size_t start = pos + 4;
        if (input.substr(start, 1) == ">") {
            on_comment({});
            pos = start + 1;
            return;
        }
        if (input.substr(start, 2) == "->") {
            on_comment({});
            pos = start + 2;
            return;
        }
        const std::size_t end = input.find("-->", start);
        if (end == std::string_view::npos) {
            on_comment(std::string(input.substr(start)));
            pos = n;
        } else {
            on_comment(std::string(input.substr(start, end - start)));
            pos = end + 3;
        }
        return;
    }
    if (pos + 1 < n && input[pos + 1] == '!') {
        const std::size_t end = input.find('>', pos);
        const std::size_t stop = end == std::string_view::npos ? n : end;
        const std::string_view inner = input.substr(pos + 2, stop - pos - 2);
        if (inner.size() >= 7 && text::to_lower_ascii(inner.substr(0, 7)) == "doctype") {
            std::string_view rest = text::trim(inner.substr(7));
            const std::size_t space = rest.find_first_of(" \t\n\r\f");
            on_doctype(text::to_lower_ascii(rest.substr(0, space)));
        } else {
            on_comment(std::string(inner));
        }
        pos = stop == n ? n : stop + 1;
        return;
    }
    if (pos + 1 < n && input[pos + 1] == '?') {
        const std::size_t end = input.find('>', pos);
        const std::size_t stop = end == std::string_view::npos ? n : end;
        on_comment(std::string(input.substr(pos + 1, stop - pos - 1)));
        pos = stop == n ? n : stop + 1;
        return;
    }
    if (pos + 1 < n && input[pos + 1] == '/') {
        if (pos + 2 < n && is_ascii_alpha(input[pos + 2])) {
            std::size_t i = pos + 2;
            while (i < n && !is_html_space(input[i]) && input[i] != '/' && input[i] != '>') ++i;
            const std::string name = text::to_lower_ascii(input.substr(pos + 2, i - pos - 2));
            const std::size_t end = input.find('>', i);
            pos = end == std::string_view::npos ? n : end + 1;
            on_end_tag(name);
            return;
        }
        if (pos + 2 < n && input[pos + 2] == '>') {
            pos += 3;
            return;
        }
        const std::size_t end = input.find('>', pos);
        const std::size_t stop = end == std::string_view::npos ? n : end;
        on_comment(std::string(input.substr(pos + 2, stop - pos - 2)));
        pos = stop == n ? n : stop + 1;
        return;
    }
    if (pos + 1 < n && is_ascii_alpha(input[pos + 1])) {
        std::size_t i = pos + 1;
        while (i < n && !is_html_space(input[i]) && input[i] != '/' && input[i] != '>') ++i;
        const std::string name = text::to_lower_ascii(input.substr(pos + 1, i - pos - 1));
        pos = i;
        bool self_closing = false;
        auto attrs = read_attributes(input, pos, self_closing);
        Node* element = on_start_tag(name, std::move(attrs), self_closing);
        if (element && is_raw_text_element(name) && !self_closing) {
            read_raw_text(input, pos, *element);
        }
        return;
    }
    on_text("<");
    ++pos;
}

void TreeBuilder::run(std::string_view input) {
    std::size_t pos = 0;
    const auto n = input.size();
    while (pos < n) {
        if (input[pos] == '<') {
            tag_open(input, pos);
            continue;
        }
        std::size_t next = input.find('<', pos);
        if (next == std::string_view::npos) next = n;
        on_text(input.substr(pos, next - pos));
        pos = next;
    }
    ensure_body();
}

// ---------------------------------------------------------------------------
// Document

Document::Document() : root_(std::make_unique<Node>(NodeKind::Document)) {}

Document::Document(const Document& other) : root_(other.root_->clone()) {}

Document& Document::operator=(const Document& other) {
    if (this != &other) root_ = other.root_->clone();
    return *this;
}

Document Document::parse(std::string_view html) {
    Document doc;
    TreeBuilder builder(*doc.root_);
    builder.run(html);
    return doc;
}

Node* Document::html() const noexcept {
    for (const auto& child : root_->children()) {
        if (child->is_element("html")) return child.get();
    }
    return nullptr;
}

Node* Document::head() const noexcept {
    if (Node* h = html()) {
        for (const auto& child : h->children()) {
            if (child->is_element("head")) return child.get();
        }
    }
    return nullptr;
}

Node* Document::body() const noexcept {
    if (Node* h = html()) {
        for (const auto& child : h->children()) {
            if (child->is_element("body")) return child.get();
        }
    }
    return nullptr;
}

Node* Document::resolve(const NodePath& path) const noexcept {
    const Node* node = root_.get();
    for (const auto& step : path.steps()) {
        const Node* next = nullptr;
        int seen = 0;
        for (const auto& child : node->children()) {
            if (child->is_element(step.tag) && ++seen == step.ordinal) {
                next = child.get();
                break;
            }
        }
        if (!next) return nullptr;
        node = next;
    }
    return node == root_.get() ? nullptr : const_cast<Node*>(node);
}

namespace {

void escape_text(std::string& out, std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '&') {
            out += "&amp;";
        } else if (c == '<') {
            out += "&lt;";
        } else if (c == '>') {
            out += "&gt;";
        } else if (c == '\xC2' && i + 1 < s.size() && s[i + 1] == '\xA0') {
            out += "&nbsp;";
            ++i;
        } else {
            out.push_back(c);
        }
    }
}

void escape_attribute(std::string& out, std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '&') {
            out += "&amp;";
        } else if (c == '"') {
            out += "&quot;";
        } else if (c == '\xC2' && i + 1 < s.size() && s[i + 1] == '\xA0') {
            out += "&nbsp;";
            ++i;
        } else {
            out.push_back(c);
        }
    }
}

void serialize_into(std::string& out, const Node& node) {
    switch (node.kind()) {
        case NodeKind::Document:
            for (const auto& child : node.children()) serialize_into(out, *child);
            break;
        case NodeKind::Doctype:
            out += "<!DOCTYPE ";
            out += node.name().empty() ? std::string("html") : node.name();
            out += ">";
            break;
        case NodeKind::Comment:
            out += "<!--";
            out += node.data();
            out += "-->";
            break;
        case NodeKind::Text: {
            const Node* parent = node.parent();
            if (parent && is_raw_text_element(parent->name()) && !is_escapable_raw(parent->name())) {
                out += node.data();
            } else {
                escape_text(out, node.data());
            }
            break;
        }
        case NodeKind::Element:
            out += serialize_start_tag(node);
            if (is_void_element(node.name())) break;
            for (const auto& child : node.children()) serialize_into(out, *child);
            out += "</";
            out += node.name();
            out += ">";
            break;
    }
}

}  // namespace

std::string serialize_start_tag(const Node& element) {
    std::string out = "<" + element.name();
    for (const auto& a : element.attributes()) {
        out += ' ';
        out += a.name;
        out += "=\"";
        escape_attribute(out, a.value);
        out += '"';
    }
    out += '>';
    return out;
}

std::string serialize(const Node& node) {
    std::string out;
    serialize_into(out, node);
    return out;
}

std::string Document::serialize() const { return html::serialize(*root_); }

}  // namespace pageguide::html
