#include "pageguide/find_engine.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <utility>

#include "pageguide/error.hpp"
#include "pageguide/prompts.hpp"
#include "pageguide/text.hpp"

namespace pageguide::find {

using nlohmann::json;

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Parses one token starting at raw[pos] == '['. Returns its length or 0.
std::size_t match_token(std::string_view raw, std::size_t pos, int& id, std::string& phrase) {
    std::size_t i = pos + 1;
    const std::size_t digits_begin = i;
    while (i < raw.size() && is_digit(raw[i])) ++i;
    const std::size_t ndigits = i - digits_begin;
    if (ndigits == 0 || ndigits > 9) return 0;
    if (i + 1 >= raw.size() || raw[i] != ':' || raw[i + 1] != '"') return 0;
    id = std::stoi(std::string(raw.substr(digits_begin, ndigits)));
    if (id < 1) return 0;
    i += 2;
    phrase.clear();
    for (; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c == '\\' && i + 1 < raw.size() && (raw[i + 1] == '"' || raw[i + 1] == '\\')) {
            phrase += raw[++i];
            continue;
        }
        if (c == '"') break;
        phrase += c;
    }
    if (i + 1 >= raw.size() || raw[i] != '"' || raw[i + 1] != ']') return 0;
    if (phrase.empty()) return 0;
    return i + 2 - pos;
}

std::string anchor_open(std::size_t k) { return "⟦" + std::to_string(k) + "⟧"; }
std::string anchor_close(std::size_t k) { return "⟦/" + std::to_string(k) + "⟧"; }

struct Rendered {
    const Citation* citation;
    std::string open;
    std::string close;
};

// Resolved and unresolved citations merged back into textual order.
std::vector<Rendered> in_text_order(const Resolution& r) {
    std::vector<Rendered> out;
    for (const auto& rc : r.resolved) {
        out.push_back({&rc.citation, anchor_open(rc.plan_entry + 1), anchor_close(rc.plan_entry + 1)});
    }
    for (const auto& c : r.unresolved) {
        out.push_back({&c, std::string(kUnresolvedOpen), std::string(kUnresolvedClose)});
    }
    std::sort(out.begin(), out.end(), [](const Rendered& a, const Rendered& b) {
        return a.citation->answer_offset < b.citation->answer_offset;
    });
    return out;
}

}  // namespace

std::vector<Citation> parse_citations(std::string_view raw) {
    std::vector<Citation> out;
    std::size_t prev_end = 0;
    for (std::size_t pos = raw.find('['); pos != std::string_view::npos; pos = raw.find('[', pos + 1)) {
        int id = 0;
        std::string phrase;
        const std::size_t len = match_token(raw, pos, id, phrase);
        if (len == 0) continue;
        Citation c;
        c.element_id = id;
        c.phrase = std::move(phrase);
        c.answer_offset = pos;
        c.token = std::string(raw.substr(pos, len));

        std::size_t before = pos;
        while (before > prev_end && raw[before - 1] == ' ') --before;
        if (before >= prev_end + c.phrase.size() &&
            raw.compare(before - c.phrase.size(), c.phrase.size(), c.phrase) == 0) {
            const std::size_t echo_begin = before - c.phrase.size();
            const bool word_start = echo_begin == 0 || !std::isalnum(static_cast<unsigned char>(raw[echo_begin - 1]));
            if (word_start) c.echo = std::string(raw.substr(echo_begin, pos - echo_begin));
        }
        out.push_back(std::move(c));
        prev_end = pos + len;
        pos = prev_end - 1;
    }
    return out;
}

std::string citation_token(int element_id, std::string_view phrase) {
    std::string out = "[" + std::to_string(element_id) + ":\"";
    for (char c : phrase) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += "\"]";
    return out;
}

Resolution resolve_citations(const std::vector<Citation>& citations, const ElementIndex& index,
                             const IndexOptions& options) {
    Resolution r;
    std::map<std::pair<int, std::string>, std::size_t> seen;
    for (const auto& c : citations) {
        const IndexedElement* element = index.find(c.element_id);
        if (!element) {
            r.unresolved.push_back(c);
            continue;
        }
        const auto key = std::make_pair(c.element_id, c.phrase);
        if (auto it = seen.find(key); it != seen.end()) {
            r.resolved.push_back({c, it->second});
            ++r.duplicates;
            continue;
        }
        PlanEntry entry;
        entry.element_id = c.element_id;
        entry.phrase = c.phrase;
        entry.node_path = element->node_path;
        try {
            entry.span = find_text_span(*element, c.phrase, options);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoSpanMatch) throw;
        }
        const std::size_t slot = r.plan.entries.size();
        entry.color_slot = static_cast<int>(slot % kPalette.size());
        r.plan.entries.push_back(std::move(entry));
        seen.emplace(key, slot);
        r.resolved.push_back({c, slot});
    }
    if (!r.plan.entries.empty()) r.plan.scroll_target = r.plan.entries.front().element_id;
    return r;
}

std::string render_display_text(std::string_view raw, const Resolution& resolution) {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& item : in_text_order(resolution)) {
        const Citation& c = *item.citation;
        const std::size_t begin = c.answer_offset - c.echo.size();
        out.append(raw.substr(cursor, begin - cursor));
        out += item.open;
        out += c.phrase;
        out += item.close;
        cursor = c.answer_offset + c.token.size();
    }
    out.append(raw.substr(std::min(cursor, raw.size())));
    return out;
}

std::string reconstruct_raw(std::string_view display, const Resolution& resolution) {
    std::string out;
    std::size_t pos = 0;
    std::size_t raw_cursor = 0;
    for (const auto& item : in_text_order(resolution)) {
        const Citation& c = *item.citation;
        const std::size_t plain = c.answer_offset - c.echo.size() - raw_cursor;
        out.append(display.substr(pos, plain));
        pos += plain;
        const std::string anchor = item.open + c.phrase + item.close;
        if (display.compare(pos, anchor.size(), anchor) != 0) {
            throw Error(ErrorCode::ParseFailure, "display text does not match citation record");
        }
        pos += anchor.size();
        out += c.echo;
        out += c.token;
        raw_cursor = c.answer_offset + c.token.size();
    }
    out.append(display.substr(std::min(pos, display.size())));
    return out;
}

std::string strip_anchors(std::string_view display) {
    static constexpr std::string_view kOpen = "⟦";
    static constexpr std::string_view kClose = "⟧";
    std::string out;
    std::size_t i = 0;
    while (i < display.size()) {
        if (display.compare(i, kOpen.size(), kOpen) == 0) {
            const std::size_t end = display.find(kClose, i + kOpen.size());
            if (end != std::string_view::npos) {
                const std::string_view inner = display.substr(i + kOpen.size(), end - i - kOpen.size());
                const bool marker = !inner.empty() && inner.size() <= 12 &&
                                    std::all_of(inner.begin(), inner.end(), [](char c) {
                                        return is_digit(c) || c == '/' || c == '!';
                                    });
                if (marker) {
                    i = end + kClose.size();
                    continue;
                }
            }
        }
        out += display[i++];
    }
    return out;
}

std::vector<ExternalLink> extract_links(std::string_view raw) {
    std::vector<ExternalLink> out;
    for (std::size_t pos = raw.find('['); pos != std::string_view::npos; pos = raw.find('[', pos + 1)) {
        const std::size_t label_end = raw.find(']', pos + 1);
        if (label_end == std::string_view::npos) break;
        const std::string_view label = raw.substr(pos + 1, label_end - pos - 1);
        if (label.empty() || label.find('\n') != std::string_view::npos || label.find('[') != std::string_view::npos) continue;
        if (label_end + 1 >= raw.size() || raw[label_end + 1] != '(') continue;
        const std::size_t url_begin = label_end + 2;
        if (raw.compare(url_begin, 7, "http://") != 0 && raw.compare(url_begin, 8, "https://") != 0) continue;
        // URLs may carry balanced parentheses, e.g. wiki titles.
        int depth = 0;
        std::size_t i = url_begin;
        for (; i < raw.size(); ++i) {
            const char c = raw[i];
            if (c == ' ' || c == '\n' || c == '\t') break;
            if (c == '(') ++depth;
            if (c == ')' && depth-- == 0) break;
        }
        if (i >= raw.size() || raw[i] != ')') continue;
        out.push_back({std::string(label), std::string(raw.substr(url_begin, i - url_begin))});
        pos = i;
    }
    return out;
}

bool is_not_on_page(std::string_view raw) {
    return text::trim(raw).substr(0, kNotOnPage.size()) == kNotOnPage;
}

std::string page_content(const ElementIndex& index, std::size_t budget) {
    std::string joined;
    for (const auto& e : index.elements) {
        if (e.text.empty()) continue;
        if (!joined.empty()) joined += '\n';
        joined += e.text;
    }
    return text::clip(joined, budget);
}

std::vector<llm::ChatMessage> build_messages(std::string_view query, const ElementIndex& index,
                                             const std::vector<Exchange>& history,
                                             const FindOptions& options) {
    std::string system(prompts::kFind);
    auto substitute = [&system](std::string_view placeholder, const std::string& value) {
        const auto at = system.find(placeholder);
        if (at != std::string::npos) system.replace(at, placeholder.size(), value);
    };
    // Index first: page content may itself contain the literal placeholder.
    substitute("{pageIndex}", serialize_index(index, options.index_budget, options.index));
    substitute("{pageContent}", page_content(index, options.content_budget));

    std::vector<llm::ChatMessage> messages{{"system", std::move(system)}};
    const std::size_t keep = std::min(history.size(), options.history_turns);
    for (std::size_t i = history.size() - keep; i < history.size(); ++i) {
        messages.push_back({"user", history[i].query});
        messages.push_back({"assistant", history[i].answer});
    }
    messages.push_back({"user", std::string(query)});
    return messages;
}

GroundedAnswer ground(std::string raw, const ElementIndex& index, const IndexOptions& options) {
    GroundedAnswer a;
    a.resolution = resolve_citations(parse_citations(raw), index, options);
    a.display_text = render_display_text(raw, a.resolution);
    a.external_links = extract_links(raw);
    a.not_on_page = is_not_on_page(raw);
    a.raw_text = std::move(raw);
    return a;
}

GroundedAnswer answer(std::string_view query, const ElementIndex& index,
                      const std::vector<Exchange>& history, llm::Gateway& gateway,
                      const FindOptions& options) {
    if (text::trim(query).empty()) throw Error(ErrorCode::BadRequest, "query must not be empty");
    auto response = gateway.complete(gateway.make_request(build_messages(query, index, history, options)));
    return ground(std::move(response.text), index, options.index);
}

json to_json(const Citation& c) {
    return {{"element_id", c.element_id}, {"phrase", c.phrase}, {"answer_offset", c.answer_offset}};
}

json to_json(const HighlightPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries) {
        json entry = {{"element_id", e.element_id},
                      {"phrase", e.phrase},
                      {"node_path", e.node_path.str()},
                      {"color_slot", e.color_slot},
                      {"color", std::string(kPalette[static_cast<std::size_t>(e.color_slot)])}};
        if (e.span) {
            entry["span"] = {{"start", e.span->start},
                             {"end", e.span->end},
                             {"tier", std::string(to_string(e.span->tier))},
                             {"score", e.span->score}};
        } else {
            entry["span"] = "whole_element";
        }
        entries.push_back(std::move(entry));
    }
    return {{"entries", std::move(entries)},
            {"scroll_target", plan.scroll_target ? json(*plan.scroll_target) : json(nullptr)}};
}

json to_json(const GroundedAnswer& a) {
    json citations = json::array();
    for (const auto& rc : a.resolution.resolved) {
        json c = to_json(rc.citation);
        c["anchor"] = rc.plan_entry + 1;
        citations.push_back(std::move(c));
    }
    json unresolved = json::array();
    for (const auto& c : a.resolution.unresolved) unresolved.push_back(to_json(c));
    json links = json::array();
    for (const auto& l : a.external_links) links.push_back({{"label", l.label}, {"url", l.url}});
    return {{"raw_text", a.raw_text},
            {"display_text", a.display_text},
            {"citations", std::move(citations)},
            {"unresolved", std::move(unresolved)},
            {"highlight_plan", to_json(a.resolution.plan)},
            {"external_links", std::move(links)},
            {"not_on_page", a.not_on_page}};
}

}  // namespace pageguide::find
