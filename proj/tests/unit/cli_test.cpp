#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "pageguide/cli.hpp"
#include "pageguide/error.hpp"
#include "pageguide/hide_engine.hpp"
#include "test_support.hpp"

namespace pageguide::cli {
namespace {

using nlohmann::json;
using testing::TempDir;

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args, const std::string& input = "") {
    args.insert(args.begin(), "pageguide");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    std::istringstream in(input);
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err, in);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& rel) { return (testing::data_dir() / rel).string(); }
std::string transcript() { return testing::transcript_path().string(); }

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

TEST(ResolveConfig, FlagsBeatEnvBeatFiles) {
    TempDir tmp;
    testing::write_file(tmp / "a.toml", "model = \"file-a\"\nbase_url = \"http://file-a\"\ntimeout_ms = 5\nelem_clip = 40\n");
    testing::write_file(tmp / "b.toml", "model = \"file-b\"\nfuzzy_min = 0.5\nelem_clip = 99\n");
    ConfigSources src;
    src.files = {tmp / "a.toml", tmp / "b.toml"};
    std::map<std::string, std::string> env = {{kModelEnv, "env-model"}, {llm::kApiKeyEnv, "k"}};
    src.env = [&env](const std::string& name) -> std::optional<std::string> {
        if (auto it = env.find(name); it != env.end()) return it->second;
        return std::nullopt;
    };
    Config c = resolve_config(src);
    EXPECT_EQ(c.model, "env-model");
    EXPECT_EQ(c.base_url, "http://file-a");
    EXPECT_EQ(c.timeout_ms, 5);
    EXPECT_EQ(c.elem_clip, 40u);
    EXPECT_DOUBLE_EQ(c.fuzzy_min, 0.5);
    EXPECT_EQ(c.api_key, "k");

    src.flags["model"] = "flag-model";
    EXPECT_EQ(resolve_config(src).model, "flag-model");
    EXPECT_EQ(resolve_config({}).model, llm::kDefaultModel);
    EXPECT_FALSE(resolve_config({}).api_key);
}

TEST(ResolveConfig, ValidationIsUsage) {
    for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
             {"timeout_ms", "0"}, {"timeout_ms", "abc"}, {"fuzzy_min", "0"}, {"fuzzy_min", "1.5"},
             {"elem_clip", "0"}, {"mode", "sometimes"}, {"model", ""}}) {
        ConfigSources src;
        src.flags[key] = value;
        EXPECT_EQ(code_of([&] { resolve_config(src); }), ErrorCode::Usage) << key << "=" << value;
    }
}

TEST(MakeGateway, ModeNeedsTranscript) {
    Config c;
    c.mode = llm::StoreMode::Replay;
    EXPECT_EQ(code_of([&] { make_gateway(c); }), ErrorCode::Usage);
    c.mode = llm::StoreMode::Record;
    EXPECT_EQ(code_of([&] { make_gateway(c); }), ErrorCode::Usage);
    c.mode.reset();
    EXPECT_EQ(c.effective_mode(), llm::StoreMode::Passthrough);
    c.replay = testing::transcript_path();
    EXPECT_EQ(c.effective_mode(), llm::StoreMode::Replay);
    EXPECT_EQ(make_gateway(c)->store()->mode(), llm::StoreMode::Replay);
}

TEST(Run, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"find", "--snapshot", data("snapshots/minimal")}).code, 2);
    EXPECT_EQ(run_cli({"route", "--query", "q", "--replay", transcript()}).code, 2);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Run, RouteHideWithReplay) {
    const auto r = run_cli({"route", "--snapshot", data("snapshots/product-page"), "--query", "Hide the ads on this page",
                            "--replay", transcript()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["handler"], "hide");
}

TEST(Run, ReplayMissIsDomainError) {
    const auto r = run_cli({"route", "--snapshot", data("snapshots/product-page"), "--query", "never recorded",
                            "--replay", transcript()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("detail:"), std::string::npos);
}

TEST(Run, IndexJsonLinesAndPrompt) {
    const auto lines = run_cli({"index", "--snapshot", data("snapshots/film-article")});
    ASSERT_EQ(lines.code, 0) << lines.err;
    std::istringstream in(lines.out);
    std::string line;
    int expected_id = 1;
    while (std::getline(in, line)) {
        const json e = json::parse(line);
        EXPECT_EQ(e["id"], expected_id++);
        EXPECT_TRUE(e.contains("node_path"));
    }
    EXPECT_GT(expected_id, 1);
    const auto prompt = run_cli({"index", "--snapshot", data("snapshots/film-article"), "--prompt"});
    ASSERT_EQ(prompt.code, 0);
    EXPECT_EQ(prompt.out.rfind("[1] (", 0), 0u);
    EXPECT_EQ(run_cli({"index", "--snapshot", "/nonexistent/bundle"}).code, 1);
}

TEST(Run, FindJsonMatchesTable) {
    const auto j = run_cli({"find", "--snapshot", data("snapshots/film-article"), "--query", "Who directed Inception?",
                            "--replay", transcript(), "--json"});
    ASSERT_EQ(j.code, 0) << j.err;
    const json answer = json::parse(j.out);
    EXPECT_FALSE(answer["not_on_page"]);
    const auto text = run_cli({"find", "--snapshot", data("snapshots/film-article"), "--query", "Who directed Inception?",
                               "--replay", transcript()});
    ASSERT_EQ(text.code, 0);
    EXPECT_EQ(text.out.rfind(answer["display_text"].get<std::string>() + "\n", 0), 0u);
    EXPECT_NE(text.out.find("element  match"), std::string::npos);
}

TEST(Run, GuideReadsCommandsFromStdin) {
    const std::vector<std::string> args = {"guide",    "--sequence", data("sequences/video-report.json"),
                                           "--query",  "How do I report this video?",
                                           "--replay", transcript(), "--json"};
    const auto all = run_cli(args, "n\nn\nn\nn\n");
    ASSERT_EQ(all.code, 0) << all.err;
    const json done = json::parse(all.out);
    EXPECT_EQ(done["session"]["state"], "Completed");
    EXPECT_EQ(done["cards"].back()["controls"][0], "Finish");

    const auto stopped = run_cli(args, "s\n");
    ASSERT_EQ(stopped.code, 0) << stopped.err;
    const json s = json::parse(stopped.out);
    EXPECT_EQ(s["session"]["state"], "Stopped");
    EXPECT_EQ(s["cards"].size(), 1u);
    EXPECT_EQ(run_cli(args, "").code, 0);
    EXPECT_EQ(run_cli(args, "maybe\n").code, 2);
}

TEST(Run, HideConfirmWritesBundle) {
    TempDir tmp;
    const auto r = run_cli({"hide", "--snapshot", data("snapshots/product-page"), "--request",
                            "Hide all advertisements on the page", "--replay", transcript(), "--confirm", "--out",
                            (tmp / "out").string(), "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json result = json::parse(r.out);
    EXPECT_FALSE(result["confirmed_ids"].empty());
    const Snapshot mutated = load_snapshot(tmp / "out");
    const auto record = hide::mutation_record_from_json(json::parse(testing::read_file(tmp / "out" / "mutation.json")));
    EXPECT_EQ(record.entries.size(), result["confirmed_ids"].size());
    const Snapshot original = load_snapshot(testing::snapshot_dir("product-page"));
    EXPECT_EQ(canonical_html(hide::restore(mutated, record)), canonical_html(original));

    EXPECT_EQ(run_cli({"hide", "--snapshot", data("snapshots/product-page"), "--request",
                       "Hide all advertisements on the page", "--replay", transcript(), "--confirm", "--uncheck", "x"})
                  .code,
              2);
}

TEST(Run, EvalPrintsReport) {
    TempDir tmp;
    const auto r = run_cli({"eval", "--kind", "hide", "--data", data("datasets/hide.jsonl"), "--replay", transcript(),
                            "--report", (tmp / "r.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const json report = json::parse(r.out);
    EXPECT_EQ(report["kind"], "hide");
    EXPECT_EQ(json::parse(testing::read_file(tmp / "r.json")), report);
    EXPECT_EQ(run_cli({"eval", "--kind", "bogus", "--data", data("datasets/hide.jsonl")}).code, 2);
}

// Minimal chat-completions endpoint on 127.0.0.1 that counts requests.
class FakeModel {
public:
    FakeModel() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
            ++requests;
            const auto reply = testing::chat_reply(R"({"handler":"hide","confidence":0.9,"reason":"ads"})");
            res.status = reply.status;
            res.set_content(reply.body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeModel() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::atomic<int> requests{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

TEST(Run, RecordIsIdempotent) {
    FakeModel model;
    TempDir tmp;
    ::setenv(llm::kApiKeyEnv, "test-key", 1);
    const std::vector<std::string> args = {"record",   "--transcript", (tmp / "t.jsonl").string(), "--pipeline",
                                           "route",    "--snapshot",   data("snapshots/product-page"),
                                           "--query",  "Hide the ads on this page", "--base-url", model.base_url()};
    const auto first = run_cli(args);
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_EQ(first.err, "1 new transcript entries\n");
    const auto second = run_cli(args);
    ASSERT_EQ(second.code, 0) << second.err;
    EXPECT_EQ(second.err, "0 new transcript entries\n");
    EXPECT_EQ(model.requests.load(), 1);
    const std::string content = testing::read_file(tmp / "t.jsonl");
    EXPECT_EQ(std::count(content.begin(), content.end(), '\n'), 1);

    const auto replayed = run_cli({"route", "--snapshot", data("snapshots/product-page"), "--query",
                                   "Hide the ads on this page", "--replay", (tmp / "t.jsonl").string(), "--base-url",
                                   model.base_url()});
    ASSERT_EQ(replayed.code, 0) << replayed.err;
    EXPECT_EQ(json::parse(replayed.out)["handler"], "hide");
    ::unsetenv(llm::kApiKeyEnv);
}

}  // namespace
}  // namespace pageguide::cli
