#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "pageguide/error.hpp"
#include "pageguide/find_engine.hpp"
#include "pageguide/service_api.hpp"
#include "test_support.hpp"

namespace pageguide::service {
namespace {

using nlohmann::json;

json upload_body(const Snapshot& s) {
    json j = {{"html", s.html}, {"url", s.url}, {"title", s.title}, {"captured_at", s.captured_at}};
    if (s.layout) j["layout"] = layout_to_json(*s.layout);
    return j;
}

class ServiceTest : public ::testing::Test {
protected:
    Response call(const std::string& method, const std::string& path, const json& body = json::object()) {
        return service->handle(method, path, body.dump());
    }
    std::string upload(const Snapshot& s) {
        const auto r = call("POST", "/v1/snapshot", upload_body(s));
        EXPECT_EQ(r.status, 200) << r.body.dump();
        return r.body.at("snapshot_id");
    }
    void use(std::shared_ptr<llm::Gateway> gw, ServiceConfig config = {}) {
        service = std::make_unique<Service>(std::move(gw), std::move(config));
    }

    std::unique_ptr<Service> service = std::make_unique<Service>(testing::replay_gateway(), ServiceConfig{});
};

TEST_F(ServiceTest, Health) {
    const auto r = call("GET", "/v1/health");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body["status"], "ok");
    EXPECT_EQ(call("GET", "/v1/nope").status, 404);
}

TEST_F(ServiceTest, SnapshotUpload) {
    const std::string a = upload(testing::page("<p>a</p>"));
    const std::string b = upload(testing::page("<p>a</p>"));
    EXPECT_NE(a, b);
    EXPECT_TRUE(service->snapshot(a));
    EXPECT_EQ(call("POST", "/v1/snapshot", {{"url", "https://a.test/"}}).status, 400);

    json body = upload_body(testing::page("<p>a</p>"));
    body["layout"] = json::array({{{"path", "/html[1]/body[1]/p[7]"}, {"x", 0}, {"y", 0}, {"w", 1}, {"h", 1}}});
    const auto r = call("POST", "/v1/snapshot", body);
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body["dropped_layout_entries"], 1);
}

TEST_F(ServiceTest, OversizedBodyIs413) {
    const std::string big = "<p>" + std::string(9u * 1024u * 1024u, 'x') + "</p>";
    const auto r = call("POST", "/v1/snapshot", {{"html", big}, {"url", "https://a.test/"}, {"title", "t"}});
    EXPECT_EQ(r.status, 413);
    EXPECT_EQ(r.body["error"]["code"], "too_large");
}

TEST_F(ServiceTest, UnknownIdsAre404) {
    const auto r = call("POST", "/v1/find", {{"snapshot_id", "missing"}, {"query", "q"}});
    EXPECT_EQ(r.status, 404);
    EXPECT_EQ(r.body["error"]["code"], "unknown_snapshot");
    EXPECT_EQ(call("POST", "/v1/guide/nope/next").status, 404);
    EXPECT_EQ(call("GET", "/v1/guide/nope").body["error"]["code"], "unknown_session");
}

TEST_F(ServiceTest, MalformedJsonIs400) {
    EXPECT_EQ(service->handle("POST", "/v1/find", "{not json").status, 400);
    EXPECT_EQ(service->handle("POST", "/v1/find", "[1]").status, 400);
}

TEST_F(ServiceTest, RouteReplay) {
    const std::string id = upload(load_snapshot(testing::snapshot_dir("product-page")));
    const auto r = call("POST", "/v1/route", {{"snapshot_id", id}, {"query", "Hide the ads on this page"}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(r.body["handler"], "hide");
    EXPECT_GE(r.body["confidence"].get<double>(), 0.0);
}

// The service returns exactly what the engine returns for the same inputs.
TEST_F(ServiceTest, FindMatchesDirectCall) {
    const Snapshot film = load_snapshot(testing::snapshot_dir("film-article"));
    const std::string id = upload(film);
    const auto r = call("POST", "/v1/find", {{"snapshot_id", id}, {"query", "Who directed Inception?"}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    auto gw = testing::replay_gateway();
    const auto direct = find::answer("Who directed Inception?", build_index(film), {}, *gw);
    EXPECT_EQ(r.body, find::to_json(direct));
    EXPECT_NE(r.body["display_text"].get<std::string>().find("Christopher Nolan"), std::string::npos);
    EXPECT_FALSE(r.body["highlight_plan"]["entries"].empty());
}

TEST_F(ServiceTest, FindNotOnPageAndEmptyQuery) {
    use(testing::canned_gateway({std::string(find::kNotOnPage) + " However, it is about 828 m tall."}));
    const std::string id = upload(testing::page("<p>Weather today</p>"));
    const auto r = call("POST", "/v1/find", {{"snapshot_id", id}, {"query", "How tall is the Burj Khalifa?"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_TRUE(r.body["not_on_page"]);
    EXPECT_TRUE(r.body["highlight_plan"]["entries"].empty());
    EXPECT_EQ(call("POST", "/v1/find", {{"snapshot_id", id}, {"query", "  "}}).status, 400);
    EXPECT_EQ(call("POST", "/v1/find", {{"snapshot_id", id}}).status, 400);
}

TEST_F(ServiceTest, GuideLifecycle) {
    use(testing::canned_gateway(
        {R"({"instruction":"Click Report","highlight":{"index":2},"waitFor":"click","isLastStep":true,"nextStepHint":""})"}));
    const std::string id = upload(testing::page("<button>Share</button><button>Report</button>"));
    const auto start = call("POST", "/v1/guide/start", {{"snapshot_id", id}, {"query", "How do I report this?"}});
    ASSERT_EQ(start.status, 200) << start.body.dump();
    EXPECT_EQ(start.body["state"], "AwaitingStep");
    const std::string sid = start.body["session_id"];

    const auto next = call("POST", "/v1/guide/" + sid + "/next");
    ASSERT_EQ(next.status, 200) << next.body.dump();
    EXPECT_EQ(next.body["state"], "AwaitingUser");
    EXPECT_EQ(next.body["step"]["highlight"]["node_path"], "/html[1]/body[1]/button[2]");
    EXPECT_EQ(next.body["step_card"]["controls"], json::array({"Finish", "Stop"}));

    const auto again = call("POST", "/v1/guide/" + sid + "/next");
    EXPECT_EQ(again.status, 409);
    EXPECT_EQ(again.body["error"]["code"], "invalid_state");

    const auto confirm = call("POST", "/v1/guide/" + sid + "/confirm");
    ASSERT_EQ(confirm.status, 200) << confirm.body.dump();
    EXPECT_EQ(confirm.body["state"], "Completed");
    EXPECT_TRUE(confirm.body["report"]["terminal"]);

    const auto state = call("GET", "/v1/guide/" + sid);
    EXPECT_EQ(state.body["session"]["history"].size(), 1u);
    EXPECT_EQ(call("POST", "/v1/guide/" + sid + "/stop").status, 409);
}

TEST_F(ServiceTest, GuideStartWithSequenceAndStop) {
    use(testing::canned_gateway({R"({"instruction":"Open","highlight":{"index":1},"waitFor":"click","isLastStep":false})"}));
    const std::string a = upload(testing::page("<button>Menu</button>", "https://a.test/1"));
    const std::string b = upload(testing::page("<button>Report</button>", "https://a.test/2"));
    const auto start = call("POST", "/v1/guide/start", {{"snapshot_ids", {a, b}}, {"query", "report"}});
    ASSERT_EQ(start.status, 200);
    const std::string sid = start.body["session_id"];
    call("POST", "/v1/guide/" + sid + "/next");
    const auto confirm = call("POST", "/v1/guide/" + sid + "/confirm");
    ASSERT_EQ(confirm.status, 200) << confirm.body.dump();
    EXPECT_EQ(confirm.body["report"]["verdict"], "consistent");
    EXPECT_EQ(confirm.body["state"], "AwaitingStep");
    const auto stop = call("POST", "/v1/guide/" + sid + "/stop");
    EXPECT_EQ(stop.body["state"], "Stopped");
    EXPECT_EQ(stop.body["history_length"], 1);
    EXPECT_EQ(call("POST", "/v1/guide/start", {{"snapshot_id", a}, {"query", ""}}).status, 400);
}

TEST_F(ServiceTest, HideEmptyProposal) {
    use(testing::canned_gateway({R"({"found": [], "message": "No matching content found"})"}));
    const std::string id = upload(testing::page("<p>clean page</p>"));
    const auto r = call("POST", "/v1/hide/propose", {{"snapshot_id", id}, {"request", "Hide ads"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_TRUE(r.body["candidates"].empty());
    EXPECT_EQ(r.body["message"], "No matching content found");
}

TEST_F(ServiceTest, HideUncheckOneOfThree) {
    use(testing::canned_gateway({R"({"found":[{"index":1},{"index":3},{"index":4}]})"}));
    const Snapshot s = testing::page("<p>ad one</p><p>article</p><p>ad two</p><p>ad three</p>");
    const std::string id = upload(s);
    EXPECT_EQ(call("POST", "/v1/hide/apply", {{"snapshot_id", id}, {"confirmed_ids", {1}}}).body["error"]["code"],
              "invalid_state");
    const auto p = call("POST", "/v1/hide/propose", {{"snapshot_id", id}, {"request", "Hide ads"}});
    ASSERT_EQ(p.body["candidates"].size(), 3u);
    EXPECT_EQ(call("POST", "/v1/hide/apply", {{"snapshot_id", id}, {"confirmed_ids", {2}}}).status, 400);

    const auto r = call("POST", "/v1/hide/apply", {{"snapshot_id", id}, {"confirmed_ids", {1, 4}}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    ASSERT_EQ(r.body["directives"].size(), 2u);
    EXPECT_EQ(r.body["directives"][0], (json{{"element_id", 1}, {"node_path", "/html[1]/body[1]/p[1]"}, {"set_style", "display:none"}}));
    EXPECT_EQ(r.body["directives"][1]["node_path"], "/html[1]/body[1]/p[4]");

    const auto mutated = service->snapshot(r.body["mutated_snapshot_id"]);
    ASSERT_TRUE(mutated);
    const auto record = hide::mutation_record_from_json(r.body["mutation_record"]);
    EXPECT_EQ(canonical_html(hide::restore(*mutated, record)), canonical_html(s));

    const auto twice = call("POST", "/v1/hide/apply", {{"snapshot_id", id}, {"confirmed_ids", {1}}});
    EXPECT_EQ(twice.status, 409);
    EXPECT_EQ(twice.body["error"]["code"], "already_applied");
}

TEST_F(ServiceTest, SharedSecret) {
    ServiceConfig config;
    config.secret = "s3cret";
    use(testing::replay_gateway(), config);
    EXPECT_EQ(service->handle("GET", "/v1/health", "").status, 401);
    EXPECT_EQ(service->handle("GET", "/v1/health", "", {{"X-PageGuide-Secret", "wrong"}}).status, 401);
    EXPECT_EQ(service->handle("GET", "/v1/health", "", {{"x-pageguide-secret", "s3cret"}}).status, 200);
    EXPECT_EQ(generate_secret().size(), 32u);
    EXPECT_NE(generate_secret(), generate_secret());
}

TEST(MapError, TotalAndDistinctCodes) {
    std::set<std::string> codes;
    for (ErrorCode c : kAllErrorCodes) {
        const auto m = map_error(c);
        EXPECT_GE(m.status, 400);
        EXPECT_LT(m.status, 600);
        EXPECT_TRUE(codes.insert(m.code).second) << m.code;
        EXPECT_EQ(m.code.find_first_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ"), std::string::npos);
    }
    EXPECT_EQ(map_error(ErrorCode::Busy).status, 409);
    EXPECT_EQ(map_error(ErrorCode::UnknownSession).code, "unknown_session");
    EXPECT_EQ(map_error(ErrorCode::Upstream).status, 502);
}

TEST_F(ServiceTest, ConcurrentNextIsBusy) {
    auto transport = testing::sequence_transport(
        {R"({"instruction":"Click","highlight":{"index":1},"waitFor":"click","isLastStep":true})"});
    transport->delay = std::chrono::milliseconds(400);
    use(testing::live_gateway(transport));
    const std::string id = upload(testing::page("<button>Go</button>"));
    const std::string sid = call("POST", "/v1/guide/start", {{"snapshot_id", id}, {"query", "go"}}).body["session_id"];

    Response first;
    std::thread t([&] { first = call("POST", "/v1/guide/" + sid + "/next"); });
    while (transport->calls.load() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    const auto second = call("POST", "/v1/guide/" + sid + "/next");
    t.join();
    EXPECT_EQ(first.status, 200);
    EXPECT_EQ(second.status, 409);
    EXPECT_EQ(second.body["error"]["code"], "busy");
    EXPECT_EQ(transport->calls.load(), 1);
}

TEST_F(ServiceTest, SweepDropsIdleSessions) {
    auto now = std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::time_point{});
    ServiceConfig config;
    config.session_ttl = std::chrono::seconds(60);
    config.clock = [now] { return *now; };
    use(testing::canned_gateway({"x"}), config);
    const std::string id = upload(testing::page("<button>Go</button>"));
    const std::string sid = call("POST", "/v1/guide/start", {{"snapshot_id", id}, {"query", "go"}}).body["session_id"];
    EXPECT_EQ(service->session_count(), 1u);
    *now += std::chrono::seconds(59);
    EXPECT_EQ(service->sweep(), 0u);
    EXPECT_EQ(call("GET", "/v1/guide/" + sid).status, 200);
    *now += std::chrono::seconds(61);
    EXPECT_EQ(service->sweep(), 1u);
    EXPECT_EQ(call("GET", "/v1/guide/" + sid).status, 404);
}

TEST(Serve, HttpRoundTrip) {
    ServiceConfig config;
    config.secret = "abc";
    Service service(testing::replay_gateway(), config);
    testing::TempDir tmp;
    std::thread server([&] { service.serve(0, tmp / "handshake.json"); });
    ASSERT_TRUE(service.wait_until_listening(std::chrono::seconds(5)));
    const json hs = json::parse(testing::read_file(tmp / "handshake.json"));
    EXPECT_EQ(hs["port"], service.bound_port());
    EXPECT_EQ(hs["secret"], "abc");

    httplib::Client client("127.0.0.1", service.bound_port());
    const auto denied = client.Get("/v1/health");
    ASSERT_TRUE(denied);
    EXPECT_EQ(denied->status, 401);
    const auto ok = client.Get("/v1/health", httplib::Headers{{"X-PageGuide-Secret", "abc"}});
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(json::parse(ok->body)["status"], "ok");
    service.stop();
    server.join();
}

}  // namespace
}  // namespace pageguide::service
