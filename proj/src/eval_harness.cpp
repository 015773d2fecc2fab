#include "pageguide/eval_harness.hpp"

#include <array>
#include <fstream>
#include <functional>
#include <sstream>

#include "pageguide/error.hpp"
#include "pageguide/find_engine.hpp"
#include "pageguide/text.hpp"

namespace pageguide::eval {

using nlohmann::json;
namespace fs = std::filesystem;

double token_f1(std::string_view predicted, std::string_view gold) {
    const auto p = text::answer_tokens(predicted);
    const auto g = text::answer_tokens(gold);
    if (p.empty() && g.empty()) return 1.0;
    std::map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return prf_from_counts(static_cast<double>(overlap), static_cast<double>(p.size()),
                           static_cast<double>(g.size()))
        .f1;
}

bool contains_answer(std::string_view answer, std::string_view gold) {
    const auto a = text::answer_tokens(answer);
    const auto g = text::answer_tokens(gold);
    if (g.empty() || g.size() > a.size()) return false;
    return std::search(a.begin(), a.end(), g.begin(), g.end()) != a.end();
}

std::string_view to_string(Kind k) noexcept {
    switch (k) {
        case Kind::Router: return "router";
        case Kind::Find: return "find";
        case Kind::Hide: return "hide";
        case Kind::Guide: return "guide";
    }
    return "router";
}

std::optional<Kind> parse_kind(std::string_view s) noexcept {
    for (Kind k : {Kind::Router, Kind::Find, Kind::Hide, Kind::Guide}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::string normalize_action(std::string_view action) {
    const std::string a = text::to_lower_ascii(action);
    if (a == "type") return "input";
    if (a == "navigate") return "click";
    return a;
}

namespace {

// Field accessors that report schema problems with a readable message.
std::string req_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
        throw Error(ErrorCode::SchemaViolation, std::string("missing or empty string field \"") + key + "\"");
    }
    return j[key].get<std::string>();
}

NodePath req_path(const json& v) {
    if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, "node path must be a string");
    auto p = NodePath::parse(v.get<std::string>());
    if (!p) throw Error(ErrorCode::SchemaViolation, "invalid node path \"" + v.get<std::string>() + "\"");
    return *p;
}

std::vector<NodePath> req_paths(const json& j, const char* key, bool allow_empty) {
    if (!j.contains(key) || !j[key].is_array()) {
        throw Error(ErrorCode::SchemaViolation, std::string("missing array field \"") + key + "\"");
    }
    std::vector<NodePath> out;
    for (const auto& v : j[key]) out.push_back(req_path(v));
    if (out.empty() && !allow_empty) throw Error(ErrorCode::SchemaViolation, std::string("\"") + key + "\" is empty");
    return out;
}

hide::Difficulty req_difficulty(const json& j) {
    const auto d = hide::parse_difficulty(req_string(j, "difficulty"));
    if (!d) throw Error(ErrorCode::SchemaViolation, "difficulty must be easy, medium or hard");
    return *d;
}

template <typename Case>
std::vector<Case> load_lines(const fs::path& file, const std::function<Case(const json&, const fs::path&, std::size_t)>& read) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "dataset not found: " + file.string());
    const fs::path base = file.parent_path();
    std::vector<Case> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "case must be a JSON object");
            out.push_back(read(j, base, line_no));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.what(),
                        {{"line", line_no}});
        } catch (const Error& e) {
            throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.message(),
                        {{"line", line_no}});
        }
    }
    if (out.empty()) throw Error(ErrorCode::EmptyDataset, "no cases in " + file.string());
    return out;
}

std::string case_id(const json& j, std::size_t line_no) {
    if (j.contains("id") && j["id"].is_string()) return j["id"].get<std::string>();
    return "line-" + std::to_string(line_no);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

json prf_json(const std::vector<PRF>& rows) {
    std::vector<double> p, r, f;
    for (const auto& row : rows) {
        p.push_back(row.precision);
        r.push_back(row.recall);
        f.push_back(row.f1);
    }
    const double mp = mean(p), mr = mean(r), mf = mean(f);
    return {{"precision", mp}, {"recall", mr}, {"f1", mf}, {"avg", (mp + mr + mf) / 3.0}, {"cases", rows.size()}};
}

json error_entry(const std::string& id, const Error& e) {
    return {{"case", id}, {"code", std::string(to_string(e.code()))}, {"message", e.message()}};
}

// Node paths of the indexed elements named by `ids`.
std::set<std::string> paths_of(const ElementIndex& index, const std::set<int>& ids) {
    std::set<std::string> out;
    for (int id : ids) {
        if (const auto* e = index.find(id)) out.insert(e->node_path.str());
    }
    return out;
}

std::set<std::string> path_strings(const std::vector<NodePath>& paths) {
    std::set<std::string> out;
    for (const auto& p : paths) out.insert(p.str());
    return out;
}

void require_resolvable(const Snapshot& s, const std::vector<NodePath>& paths, const std::string& id) {
    const html::Document doc = html::Document::parse(s.html);
    for (const auto& p : paths) {
        if (!doc.resolve(p)) {
            throw Error(ErrorCode::SchemaViolation, "case " + id + ": gold path " + p.str() + " does not resolve");
        }
    }
}

const std::array<hide::Difficulty, 3> kSplits = {hide::Difficulty::Easy, hide::Difficulty::Medium,
                                                 hide::Difficulty::Hard};

}  // namespace

std::vector<RouterCase> load_router_cases(const fs::path& file) {
    return load_lines<RouterCase>(file, [](const json& j, const fs::path& base, std::size_t line_no) {
        RouterCase c;
        c.id = case_id(j, line_no);
        c.query = req_string(j, "query");
        const auto gold = router::parse_handler(req_string(j, "gold_class"));
        if (!gold || (*gold != router::Handler::Find && *gold != router::Handler::Guide && *gold != router::Handler::Hide)) {
            throw Error(ErrorCode::SchemaViolation, "gold_class must be find, guide or hide");
        }
        c.gold = *gold;
        if (j.contains("snapshot")) c.snapshot = base / req_string(j, "snapshot");
        return c;
    });
}

std::vector<FindCase> load_find_cases(const fs::path& file) {
    return load_lines<FindCase>(file, [](const json& j, const fs::path& base, std::size_t line_no) {
        FindCase c;
        c.id = case_id(j, line_no);
        c.snapshot = base / req_string(j, "snapshot");
        c.query = req_string(j, "query");
        if (!j.contains("gold_answers") || !j["gold_answers"].is_array() || j["gold_answers"].empty()) {
            throw Error(ErrorCode::SchemaViolation, "gold_answers must be a non-empty array");
        }
        for (const auto& a : j["gold_answers"]) {
            if (!a.is_string()) throw Error(ErrorCode::SchemaViolation, "gold answers must be strings");
            c.gold_answers.push_back(a.get<std::string>());
        }
        c.gold_element_paths = req_paths(j, "gold_element_paths", false);
        return c;
    });
}

std::vector<HideCase> load_hide_cases(const fs::path& file) {
    return load_lines<HideCase>(file, [](const json& j, const fs::path& base, std::size_t line_no) {
        HideCase c;
        c.id = case_id(j, line_no);
        c.snapshot = base / req_string(j, "snapshot");
        c.request = req_string(j, "request");
        c.difficulty = req_difficulty(j);
        if (j.contains("target_types")) {
            if (!j["target_types"].is_number_integer()) throw Error(ErrorCode::SchemaViolation, "target_types must be an integer");
            c.target_types = j["target_types"].get<int>();
            if (hide::classify_difficulty(*c.target_types) != c.difficulty) {
                throw Error(ErrorCode::SchemaViolation, "difficulty does not match target_types");
            }
        }
        c.gold_target_paths = req_paths(j, "gold_target_paths", false);
        return c;
    });
}

std::vector<GuideCase> load_guide_cases(const fs::path& file) {
    return load_lines<GuideCase>(file, [](const json& j, const fs::path& base, std::size_t line_no) {
        GuideCase c;
        c.id = case_id(j, line_no);
        c.sequence = base / req_string(j, "sequence");
        c.query = req_string(j, "query");
        c.difficulty = req_difficulty(j);
        if (!j.contains("gold_trace") || !j["gold_trace"].is_array() || j["gold_trace"].empty()) {
            throw Error(ErrorCode::SchemaViolation, "gold_trace must be a non-empty array");
        }
        for (const auto& step : j["gold_trace"]) {
            if (!step.is_object()) throw Error(ErrorCode::SchemaViolation, "trace steps must be objects");
            const std::string action = text::to_lower_ascii(req_string(step, "action"));
            static const std::set<std::string> kActions = {"click", "type", "input", "scroll", "navigate"};
            if (!kActions.count(action)) throw Error(ErrorCode::SchemaViolation, "unknown trace action \"" + action + "\"");
            c.gold_trace.push_back({action, req_path(step.value("target", json()))});
        }
        if (!j.contains("reference_length") || !j["reference_length"].is_number_integer()) {
            throw Error(ErrorCode::SchemaViolation, "reference_length must be an integer");
        }
        c.reference_length = j["reference_length"].get<int>();
        if (c.reference_length != static_cast<int>(c.gold_trace.size())) {
            throw Error(ErrorCode::SchemaViolation, "reference_length differs from gold_trace length");
        }
        return c;
    });
}

json eval_router(const std::vector<RouterCase>& cases, llm::Gateway& gateway) {
    if (cases.empty()) throw Error(ErrorCode::EmptyDataset, "no router cases");
    std::map<std::string, int> total, correct;
    std::map<std::string, std::map<std::string, int>> confusion;
    json errors = json::array();
    json per_case = json::array();
    int all_correct = 0;
    for (const auto& c : cases) {
        const std::string gold(router::to_string(c.gold));
        std::string predicted;
        try {
            router::PageContext ctx;
            if (c.snapshot) ctx = router::page_context(load_snapshot(*c.snapshot));
            const auto d = router::classify(c.query, ctx, gateway);
            predicted = std::string(router::to_string(d.handler));
        } catch (const Error& e) {
            predicted = "error";
            json entry = error_entry(c.id, e);
            entry["query"] = c.query;
            errors.push_back(std::move(entry));
        }
        ++total[gold];
        if (predicted == gold) {
            ++correct[gold];
            ++all_correct;
        } else {
            ++confusion[gold][predicted];
        }
        per_case.push_back({{"case", c.id}, {"gold", gold}, {"predicted", predicted}});
    }
    json classes = json::object();
    for (const auto& [cls, n] : total) {
        json tallies = json::array();
        for (const auto& [pred, k] : confusion[cls]) tallies.push_back(pred + " × " + std::to_string(k));
        classes[cls] = {{"total", n},
                        {"correct", correct[cls]},
                        {"accuracy", static_cast<double>(correct[cls]) / n},
                        {"errors", confusion[cls]},
                        {"error_types", std::move(tallies)}};
    }
    return {{"kind", "router"},
            {"cases", cases.size()},
            {"metrics", {{"accuracy", static_cast<double>(all_correct) / static_cast<double>(cases.size())}}},
            {"classes", std::move(classes)},
            {"per_case", std::move(per_case)},
            {"errors", std::move(errors)}};
}

json eval_find(const std::vector<FindCase>& cases, llm::Gateway& gateway) {
    if (cases.empty()) throw Error(ErrorCode::EmptyDataset, "no find cases");
    std::vector<PRF> prf;
    std::vector<double> correctness, answer_f1, evidence_f1;
    json errors = json::array();
    json per_case = json::array();
    for (const auto& c : cases) {
        PRF row;
        double correct = 0.0, af1 = 0.0, ef1 = 0.0;
        try {
            const Snapshot s = load_snapshot(c.snapshot);
            require_resolvable(s, c.gold_element_paths, c.id);
            const ElementIndex index = build_index(s);
            const auto a = find::answer(c.query, index, {}, gateway);
            std::set<int> cited;
            std::string evidence;
            for (const auto& e : a.resolution.plan.entries) {
                cited.insert(e.element_id);
                if (!evidence.empty()) evidence += ' ';
                evidence += e.phrase;
            }
            row = set_prf(paths_of(index, cited), path_strings(c.gold_element_paths));
            const std::string plain = find::strip_anchors(a.display_text);
            for (const auto& g : c.gold_answers) {
                if (contains_answer(plain, g)) correct = 1.0;
                af1 = std::max(af1, token_f1(plain, g));
                ef1 = std::max(ef1, token_f1(evidence, g));
            }
        } catch (const Error& e) {
            errors.push_back(error_entry(c.id, e));
        }
        prf.push_back(row);
        correctness.push_back(correct);
        answer_f1.push_back(af1);
        evidence_f1.push_back(ef1);
        per_case.push_back({{"case", c.id},
                            {"precision", row.precision},
                            {"recall", row.recall},
                            {"f1", row.f1},
                            {"answer_correct", correct},
                            {"answer_f1", af1},
                            {"evidence_f1", ef1}});
    }
    json metrics = prf_json(prf);
    metrics.erase("avg");
    metrics.erase("cases");
    metrics["answer_correctness"] = mean(correctness);
    metrics["answer_f1"] = mean(answer_f1);
    metrics["evidence_f1"] = mean(evidence_f1);
    return {{"kind", "find"},
            {"cases", cases.size()},
            {"metrics", std::move(metrics)},
            {"per_case", std::move(per_case)},
            {"errors", std::move(errors)}};
}

json eval_hide(const std::vector<HideCase>& cases, llm::Gateway& gateway) {
    if (cases.empty()) throw Error(ErrorCode::EmptyDataset, "no hide cases");
    std::vector<PRF> all;
    std::map<hide::Difficulty, std::vector<PRF>> by_split;
    json errors = json::array();
    json per_case = json::array();
    for (const auto& c : cases) {
        PRF row;
        try {
            const Snapshot s = load_snapshot(c.snapshot);
            require_resolvable(s, c.gold_target_paths, c.id);
            const ElementIndex index = build_index(s);
            const auto proposal = hide::propose(c.request, index, gateway);
            const auto decision = hide::review(proposal, {});
            row = set_prf(paths_of(index, decision.confirmed_ids), path_strings(c.gold_target_paths));
        } catch (const Error& e) {
            errors.push_back(error_entry(c.id, e));
        }
        all.push_back(row);
        by_split[c.difficulty].push_back(row);
        per_case.push_back({{"case", c.id},
                            {"difficulty", std::string(hide::to_string(c.difficulty))},
                            {"precision", row.precision},
                            {"recall", row.recall},
                            {"f1", row.f1}});
    }
    json splits = json::object();
    for (auto d : kSplits) splits[std::string(hide::to_string(d))] = prf_json(by_split[d]);
    return {{"kind", "hide"},
            {"cases", cases.size()},
            {"metrics", prf_json(all)},
            {"difficulty", std::move(splits)},
            {"per_case", std::move(per_case)},
            {"errors", std::move(errors)}};
}

json eval_guide(const std::vector<GuideCase>& cases, llm::Gateway& gateway) {
    if (cases.empty()) throw Error(ErrorCode::EmptyDataset, "no guide cases");
    std::map<hide::Difficulty, std::vector<double>> by_split;
    std::vector<double> all;
    json errors = json::array();
    json per_case = json::array();
    for (const auto& c : cases) {
        bool success = false;
        std::string outcome;
        int steps = 0;
        try {
            guide::GuideSession session(c.query, load_sequence(c.sequence));
            bool matches = true;
            while (session.state() == guide::SessionState::AwaitingStep ||
                   session.state() == guide::SessionState::Replanning) {
                const auto& step = session.next_step(gateway);
                const auto pos = static_cast<std::size_t>(steps);
                if (pos >= c.gold_trace.size() || !step.highlight ||
                    step.highlight->node_path != c.gold_trace[pos].target ||
                    guide::to_string(step.wait_for) != normalize_action(c.gold_trace[pos].action)) {
                    matches = false;
                }
                ++steps;
                session.confirm_step();
            }
            success = matches && session.state() == guide::SessionState::Completed &&
                      steps == static_cast<int>(c.gold_trace.size());
            outcome = std::string(guide::to_string(session.state()));
        } catch (const Error& e) {
            json entry = error_entry(c.id, e);
            entry["step"] = steps + 1;
            // A session that fails on its own terms is a task failure, not a
            // harness error.
            const bool task_failure = e.code() == ErrorCode::MalformedStep || e.code() == ErrorCode::SequenceExhausted ||
                                      e.code() == ErrorCode::StepLimit;
            if (!task_failure) errors.push_back(std::move(entry));
            outcome = std::string(to_string(e.code()));
        }
        const double v = success ? 1.0 : 0.0;
        all.push_back(v);
        by_split[c.difficulty].push_back(v);
        per_case.push_back({{"case", c.id},
                            {"difficulty", std::string(hide::to_string(c.difficulty))},
                            {"success", success},
                            {"steps", steps},
                            {"outcome", outcome}});
    }
    json splits = json::object();
    std::vector<double> split_rates;
    for (auto d : kSplits) {
        const auto& v = by_split[d];
        splits[std::string(hide::to_string(d))] = {{"cases", v.size()}, {"success_rate", mean(v)}};
        if (!v.empty()) split_rates.push_back(mean(v));
    }
    return {{"kind", "guide"},
            {"cases", cases.size()},
            {"metrics", {{"success_rate", mean(all)}, {"avg", mean(split_rates)}}},
            {"difficulty", std::move(splits)},
            {"per_case", std::move(per_case)},
            {"errors", std::move(errors)}};
}

json run_eval(Kind kind, const fs::path& dataset, llm::Gateway& gateway) {
    json report;
    switch (kind) {
        case Kind::Router: report = eval_router(load_router_cases(dataset), gateway); break;
        case Kind::Find: report = eval_find(load_find_cases(dataset), gateway); break;
        case Kind::Hide: report = eval_hide(load_hide_cases(dataset), gateway); break;
        case Kind::Guide: report = eval_guide(load_guide_cases(dataset), gateway); break;
    }
    std::ifstream in(dataset, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    report["provenance"] = {{"model", gateway.config().model},
                            {"store_mode", std::string(llm::to_string(gateway.store()->mode()))},
                            {"dataset", dataset.filename().string()},
                            {"dataset_sha256", text::sha256_hex(ss.str())},
                            {"transcript_sha256", gateway.store()->file_digest()}};
    return report;
}

}  // namespace pageguide::eval
