// Regenerates the bundled replay transcript from data/fixtures/canned.json.
// Every model call the sample datasets and pipelines make is answered from the
// canned table, so the output is byte-identical across runs.
//
//   make_fixtures [DATA_DIR] [OUT_FILE]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "pageguide/error.hpp"
#include "pageguide/eval_harness.hpp"
#include "pageguide/guide_engine.hpp"
#include "pageguide/intent_router.hpp"
#include "pageguide/llm_gateway.hpp"
#include "pageguide/prompts.hpp"
#include "pageguide/snapshot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pageguide;

namespace {

std::string between(const std::string& s, std::string_view open, std::string_view close) {
    const auto a = s.find(open);
    if (a == std::string::npos) return {};
    const auto start = a + open.size();
    const auto b = s.find(close, start);
    return s.substr(start, b == std::string::npos ? std::string::npos : b - start);
}

class CannedTransport : public llm::Transport {
public:
    explicit CannedTransport(const json& canned) {
        for (const auto& e : canned.at("router")) add("router|" + e.at("query").get<std::string>(), e);
        for (const auto& e : canned.at("find")) add("find|" + e.at("query").get<std::string>(), e);
        for (const auto& e : canned.at("hide")) add("hide|" + e.at("request").get<std::string>(), e);
        for (const auto& e : canned.at("guide")) {
            add(guide_key(e.at("query").get<std::string>(), e.at("step").get<int>(), e.value("replan", false),
                          e.value("attempt", 1)),
                e);
        }
    }

    llm::HttpReply post(const std::string&, const std::vector<std::pair<std::string, std::string>>&, const std::string& body,
                        std::chrono::milliseconds) override {
        const json req = json::parse(body);
        const auto& messages = req.at("messages");
        const std::string system = messages.at(0).at("content").get<std::string>();
        const std::string user = messages.at(1).at("content").get<std::string>();
        std::string key;
        if (system == prompts::kRouter) {
            key = "router|" + between(user, "Query: \"", "\"\n\nPage title:");
        } else if (system == prompts::kHide) {
            key = "hide|" + between(user, "USER REQUEST: ", "\n\nPAGE INDEX:");
        } else if (system == prompts::kGuide) {
            const int step = std::stoi(between(user, "STEP NUMBER: ", "\n"));
            const bool replan = user.find("NOTE: The page did not change") != std::string::npos;
            key = guide_key(between(user, "USER QUESTION: ", "\n"), step, replan, messages.size() > 2 ? 2 : 1);
        } else {
            key = "find|" + messages.back().at("content").get<std::string>();
        }
        auto it = table_.find(key);
        if (it == table_.end()) {
            std::cerr << "no canned response for " << key << "\n";
            return {404, "no canned response"};
        }
        used_.insert(key);
        const json reply = {{"model", req.at("model")},
                            {"choices", json::array({{{"message", {{"role", "assistant"}, {"content", it->second}}}}})}};
        return {200, reply.dump()};
    }

    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : table_) {
            if (!used_.count(k)) out.push_back(k);
        }
        return out;
    }

private:
    static std::string guide_key(const std::string& query, int step, bool replan, int attempt) {
        return "guide|" + query + "|" + std::to_string(step) + (replan ? "|replan" : "") + "|" + std::to_string(attempt);
    }
    void add(const std::string& key, const json& entry) {
        if (!table_.emplace(key, entry.at("response").get<std::string>()).second) {
            throw std::runtime_error("duplicate canned entry " + key);
        }
    }

    std::map<std::string, std::string> table_;
    std::set<std::string> used_;
};

void run_pipeline(const json& p, const fs::path& data, llm::Gateway& gateway) {
    const std::string query = p.at("query");
    std::vector<Snapshot> pages = p.contains("sequence") ? load_sequence(data / p.at("sequence").get<std::string>())
                                                         : std::vector<Snapshot>{load_snapshot(data / p.at("snapshot").get<std::string>())};
    const auto decision = router::classify(query, router::page_context(pages.front()), gateway);
    if (decision.handler == router::Handler::Guide) {
        guide::GuideSession session(query, pages);
        while (session.state() == guide::SessionState::AwaitingStep || session.state() == guide::SessionState::Replanning) {
            session.next_step(gateway);
            session.confirm_step();
        }
        return;
    }
    router::dispatch(decision, {query, pages, {}, {}}, gateway);
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path data = argc > 1 ? argv[1] : "data";
    const fs::path out = argc > 2 ? fs::path(argv[2]) : data / "transcripts" / "sample.transcript.jsonl";
    try {
        std::ifstream in(data / "fixtures" / "canned.json");
        if (!in) throw std::runtime_error("cannot read " + (data / "fixtures" / "canned.json").string());
        auto transport = std::make_shared<CannedTransport>(json::parse(in));

        fs::create_directories(out.parent_path());
        fs::remove(out);
        auto store = llm::TranscriptStore::open(out, llm::StoreMode::Record);
        llm::GatewayConfig config;
        config.api_key = "fixture";
        config.clock = [] { return std::chrono::steady_clock::time_point{}; };
        llm::Gateway gateway(config, store, transport);

        int errors = 0;
        for (const char* kind : {"router", "find", "hide", "guide"}) {
            const json report = eval::run_eval(*eval::parse_kind(kind), data / "datasets" / (std::string(kind) + ".jsonl"), gateway);
            for (const auto& e : report.at("errors")) {
                std::cerr << kind << ": " << e.dump() << "\n";
                ++errors;
            }
        }
        std::ifstream pl(data / "fixtures" / "pipelines.json");
        for (const auto& p : json::parse(pl)) run_pipeline(p, data, gateway);

        for (const auto& k : transport->unused()) std::cerr << "unused canned entry: " << k << "\n";
        std::cout << out.string() << ": " << store->size() << " entries\n";
        return errors == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "make_fixtures: " << e.what() << "\n";
        return 1;
    }
}
