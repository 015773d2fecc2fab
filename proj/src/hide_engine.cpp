#include "pageguide/hide_engine.hpp"

#include <algorithm>

#include "pageguide/error.hpp"
#include "pageguide/lenient_json.hpp"
#include "pageguide/prompts.hpp"
#include "pageguide/text.hpp"

namespace pageguide::hide {

using nlohmann::json;

namespace {

constexpr std::size_t kSnippetClip = 80;

std::optional<int> candidate_id(const json& item) {
    if (!item.is_object() || !item.contains("index")) return std::nullopt;
    const json& v = item["index"];
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == static_cast<double>(static_cast<int>(d))) return static_cast<int>(d);
        return std::nullopt;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.empty() || s.size() > 9 || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
        return std::stoi(s);
    }
    return std::nullopt;
}

std::string string_field(const json& item, const char* key) {
    if (item.contains(key) && item[key].is_string()) return item[key].get<std::string>();
    return {};
}

}  // namespace

std::set<int> HideProposal::ids() const {
    std::set<int> out;
    for (const auto& c : candidates) out.insert(c.element_id);
    return out;
}

std::vector<llm::ChatMessage> build_messages(std::string_view request, const ElementIndex& index,
                                             std::size_t index_budget) {
    std::string user = "USER REQUEST: ";
    user += request;
    user += "\n\nPAGE INDEX:\n";
    user += serialize_index(index, index_budget);
    return {{"system", std::string(prompts::kHide)}, {"user", std::move(user)}};
}

HideProposal parse_proposal(std::string_view raw, const ElementIndex& index, const IndexOptions& options) {
    auto parsed = extract_json_object(raw);
    if (!parsed || !parsed->contains("found") || !(*parsed)["found"].is_array()) {
        throw Error(ErrorCode::MalformedHideResponse, "expected a JSON object with a \"found\" array",
                    {{"raw", text::clip(raw, 200)}});
    }
    HideProposal p;
    p.source_index_ref = index.snapshot_ref;
    p.message = string_field(*parsed, "message");
    std::set<int> seen;
    for (const auto& item : (*parsed)["found"]) {
        const auto id = candidate_id(item);
        const IndexedElement* element = id ? index.find(*id) : nullptr;
        if (!element) {
            ++p.dropped_unknown;
            continue;
        }
        if (!seen.insert(*id).second) {
            ++p.dropped_duplicate;
            continue;
        }
        if (p.candidates.size() == kMaxCandidates) {
            ++p.truncated;
            continue;
        }
        HideCandidate c;
        c.element_id = *id;
        c.reason = string_field(item, "reason");
        c.snippet = string_field(item, "snippet");
        if (c.snippet.empty()) c.snippet = text::clip(element->text, std::min(kSnippetClip, options.elem_clip));
        c.rank = static_cast<int>(p.candidates.size()) + 1;
        p.candidates.push_back(std::move(c));
    }
    if (p.candidates.empty() && text::trim(p.message).empty()) p.message = std::string(kNothingFound);
    return p;
}

HideProposal propose(std::string_view request, const ElementIndex& index, llm::Gateway& gateway,
                     const IndexOptions& options) {
    if (text::trim(request).empty()) throw Error(ErrorCode::BadRequest, "request must not be empty");
    auto response = gateway.complete(gateway.make_request(build_messages(request, index)));
    return parse_proposal(response.text, index, options);
}

HideDecision review(const HideProposal& proposal, const std::set<int>& unchecked) {
    HideDecision d;
    d.proposal_ref = proposal.source_index_ref;
    d.confirmed_ids = proposal.ids();
    for (int id : unchecked) {
        if (!d.confirmed_ids.erase(id)) {
            throw Error(ErrorCode::UnknownCandidate, "element " + std::to_string(id) + " is not in the proposal",
                        {{"element_id", id}});
        }
    }
    return d;
}

std::string append_display_none(const std::optional<std::string>& style) {
    std::string base = style ? std::string(text::trim(*style)) : std::string();
    while (!base.empty() && (base.back() == ';' || base.back() == ' ' || base.back() == '\t')) base.pop_back();
    if (base.empty()) return "display:none";
    return base + ";display:none";
}

std::pair<Snapshot, MutationRecord> apply(HideDecision& decision, const Snapshot& snapshot,
                                          const ElementIndex& index) {
    if (decision.applied) throw Error(ErrorCode::AlreadyApplied, "decision was already applied");
    if (index.snapshot_ref != snapshot.digest() ||
        (!decision.proposal_ref.empty() && decision.proposal_ref != index.snapshot_ref)) {
        throw Error(ErrorCode::StaleIndex, "index does not belong to this snapshot",
                    {{"index_ref", index.snapshot_ref}, {"snapshot_ref", snapshot.digest()}});
    }
    html::Document doc = html::Document::parse(snapshot.html);
    MutationRecord record;
    record.source_ref = index.snapshot_ref;
    for (int id : decision.confirmed_ids) {
        const IndexedElement& element = resolve_element(index, id);
        html::Node* node = doc.resolve(element.node_path);
        if (!node) throw Error(ErrorCode::StaleIndex, "element " + std::to_string(id) + " no longer resolves");
        MutationEntry entry{id, element.node_path, std::nullopt};
        if (const std::string* style = node->attribute("style")) entry.prior_style = *style;
        node->set_attribute("style", append_display_none(entry.prior_style));
        record.entries.push_back(std::move(entry));
    }
    Snapshot mutated = snapshot;
    mutated.html = doc.serialize();
    decision.applied = true;
    return {std::move(mutated), std::move(record)};
}

Snapshot restore(const Snapshot& mutated, const MutationRecord& record, const std::optional<std::set<int>>& ids) {
    std::set<int> wanted;
    if (ids) {
        wanted = *ids;
        for (int id : wanted) {
            bool known = false;
            for (const auto& e : record.entries) known = known || e.element_id == id;
            if (!known) {
                throw Error(ErrorCode::UnknownMutation, "element " + std::to_string(id) + " was not hidden",
                            {{"element_id", id}});
            }
        }
    }
    html::Document doc = html::Document::parse(mutated.html);
    for (const auto& e : record.entries) {
        if (ids && !wanted.count(e.element_id)) continue;
        html::Node* node = doc.resolve(e.node_path);
        if (!node) throw Error(ErrorCode::UnknownMutation, "path " + e.node_path.str() + " no longer resolves");
        if (e.prior_style) node->set_attribute("style", *e.prior_style);
        else node->remove_attribute("style");
    }
    Snapshot out = mutated;
    out.html = doc.serialize();
    return out;
}

std::string_view to_string(Difficulty d) noexcept {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        case Difficulty::Hard: return "hard";
    }
    return "easy";
}

std::optional<Difficulty> parse_difficulty(std::string_view s) noexcept {
    if (s == "easy") return Difficulty::Easy;
    if (s == "medium") return Difficulty::Medium;
    if (s == "hard") return Difficulty::Hard;
    return std::nullopt;
}

Difficulty classify_difficulty(int target_types) {
    if (target_types < 1) {
        throw Error(ErrorCode::InvalidCount, "target type count must be at least 1",
                    {{"count", target_types}});
    }
    if (target_types == 1) return Difficulty::Easy;
    if (target_types == 2) return Difficulty::Medium;
    return Difficulty::Hard;
}

json to_json(const HideProposal& p) {
    json candidates = json::array();
    for (const auto& c : p.candidates) {
        candidates.push_back({{"element_id", c.element_id},
                              {"reason", c.reason},
                              {"snippet", c.snippet},
                              {"rank", c.rank},
                              {"checked", c.checked}});
    }
    return {{"candidates", std::move(candidates)},
            {"message", p.message},
            {"source_index_ref", p.source_index_ref},
            {"dropped_unknown", p.dropped_unknown},
            {"dropped_duplicate", p.dropped_duplicate},
            {"truncated", p.truncated}};
}

json to_json(const MutationRecord& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"element_id", e.element_id},
                           {"node_path", e.node_path.str()},
                           {"prior_style", e.prior_style ? json(*e.prior_style) : json(nullptr)}});
    }
    return {{"source_ref", r.source_ref}, {"entries", std::move(entries)}};
}

MutationRecord mutation_record_from_json(const json& j) {
    MutationRecord r;
    try {
        r.source_ref = j.at("source_ref").get<std::string>();
        for (const auto& e : j.at("entries")) {
            MutationEntry entry;
            entry.element_id = e.at("element_id").get<int>();
            auto path = NodePath::parse(e.at("node_path").get<std::string>());
            if (!path) throw Error(ErrorCode::SchemaViolation, "bad node_path");
            entry.node_path = *path;
            if (!e.at("prior_style").is_null()) entry.prior_style = e["prior_style"].get<std::string>();
            r.entries.push_back(std::move(entry));
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw Error(ErrorCode::SchemaViolation, std::string("mutation record: ") + ex.what());
    }
    return r;
}

}  // namespace pageguide::hide
