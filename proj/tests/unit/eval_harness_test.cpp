#include <gtest/gtest.h>

#include <random>

#include "pageguide/error.hpp"
#include "pageguide/eval_harness.hpp"
#include "test_support.hpp"

namespace pageguide::eval {
namespace {

using nlohmann::json;
using testing::TempDir;
using testing::write_file;

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Usage;
}

std::string between(const std::string& s, const std::string& open, const std::string& close) {
    const auto a = s.find(open);
    if (a == std::string::npos) return {};
    const auto b = s.find(close, a + open.size());
    return s.substr(a + open.size(), b == std::string::npos ? std::string::npos : b - a - open.size());
}

/// Gateway answering by a key pulled from the last user message.
std::shared_ptr<llm::Gateway> keyed_gateway(std::function<std::string(const std::string& last_user)> reply) {
    return testing::live_gateway(std::make_shared<testing::ScriptedTransport>([reply](const json& body) {
        return testing::chat_reply(reply(body["messages"].back()["content"].get<std::string>()));
    }));
}

std::string route(const std::string& handler) {
    return json{{"handler", handler}, {"confidence", 0.8}, {"reason", "r"}}.dump();
}

TEST(SetPrf, HandCases) {
    const PRF r = set_prf<int>({1, 2, 3}, {2, 3, 4});
    EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
    EXPECT_EQ(set_prf<int>({5, 6}, {5, 6}), (PRF{1, 1, 1}));
    EXPECT_EQ(set_prf<int>({}, {1}), (PRF{0, 0, 0}));
    EXPECT_EQ(set_prf<int>({1}, {}), (PRF{0, 0, 0}));
}

TEST(TokenF1, HandCases) {
    EXPECT_DOUBLE_EQ(token_f1("the cat sat", "cat sat down"), 2.0 / 3.0);
    EXPECT_EQ(token_f1("Same answer.", "same answer"), 1.0);
    EXPECT_EQ(token_f1("alpha", "beta"), 0.0);
    EXPECT_EQ(token_f1("", "..."), 1.0);
    EXPECT_EQ(token_f1("", "x"), 0.0);
}

// Property: swapping arguments leaves F1 unchanged and exchanges P and R.
TEST(TokenF1Property, Symmetry) {
    std::mt19937 rng(9);
    const std::vector<std::string> words = {"a", "b", "c", "the", "The", "c,", "d"};
    for (int iter = 0; iter < 500; ++iter) {
        std::string p, g;
        for (int i = static_cast<int>(rng() % 6); i > 0; --i) p += words[rng() % words.size()] + " ";
        for (int i = static_cast<int>(rng() % 6); i > 0; --i) g += words[rng() % words.size()] + " ";
        EXPECT_DOUBLE_EQ(token_f1(p, g), token_f1(g, p)) << p << "|" << g;
    }
    std::set<int> a = {1, 2, 3, 4}, b = {3, 4, 5};
    const PRF ab = set_prf(a, b), ba = set_prf(b, a);
    EXPECT_EQ(ab.precision, ba.recall);
    EXPECT_EQ(ab.recall, ba.precision);
    EXPECT_EQ(ab.f1, ba.f1);
}

TEST(ContainsAnswer, ContiguousTokens) {
    EXPECT_TRUE(contains_answer("It was directed by Christopher Nolan.", "christopher nolan"));
    EXPECT_FALSE(contains_answer("Nolan, Christopher", "Christopher Nolan"));
    EXPECT_FALSE(contains_answer("anything", "..."));
    EXPECT_TRUE(contains_answer("Price: $24.99 today", "24.99"));
}

TEST(NormalizeAction, Vocabulary) {
    EXPECT_EQ(normalize_action("type"), "input");
    EXPECT_EQ(normalize_action("navigate"), "click");
    EXPECT_EQ(normalize_action("Click"), "click");
    EXPECT_EQ(normalize_action("scroll"), "scroll");
}

TEST(Loaders, BundledSampleCounts) {
    const auto dir = testing::data_dir() / "datasets";
    EXPECT_EQ(load_router_cases(dir / "router.jsonl").size(), 30u);
    EXPECT_EQ(load_find_cases(dir / "find.jsonl").size(), 6u);
    EXPECT_EQ(load_guide_cases(dir / "guide.jsonl").size(), 4u);
    const auto hide_cases = load_hide_cases(dir / "hide.jsonl");
    ASSERT_EQ(hide_cases.size(), 9u);
    std::map<hide::Difficulty, int> histogram;
    for (const auto& c : hide_cases) ++histogram[c.difficulty];
    EXPECT_EQ(histogram[hide::Difficulty::Easy], 4);
    EXPECT_EQ(histogram[hide::Difficulty::Medium], 3);
    EXPECT_EQ(histogram[hide::Difficulty::Hard], 2);
}

TEST(Loaders, SchemaViolationNamesLine) {
    TempDir tmp;
    write_file(tmp / "r.jsonl", R"({"id":"a","query":"q","gold_class":"find"}
{"id":"b","query":"q"}
)");
    try {
        load_router_cases(tmp / "r.jsonl");
        FAIL() << "expected SchemaViolation";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
        EXPECT_EQ(e.detail().at("line"), 2);
    }
    write_file(tmp / "g.jsonl",
               R"({"id":"g","sequence":"s.json","query":"q","difficulty":"easy","reference_length":2,"gold_trace":[{"action":"click","target":"/html[1]"}]})");
    EXPECT_EQ(code_of([&] { load_guide_cases(tmp / "g.jsonl"); }), ErrorCode::SchemaViolation);
    write_file(tmp / "h.jsonl",
               R"({"id":"h","snapshot":"x","request":"r","difficulty":"easy","target_types":2,"gold_target_paths":["/html[1]"]})");
    EXPECT_EQ(code_of([&] { load_hide_cases(tmp / "h.jsonl"); }), ErrorCode::SchemaViolation);
    write_file(tmp / "r2.jsonl", R"({"id":"x","query":"q","gold_class":"pdf_find"})");
    EXPECT_EQ(code_of([&] { load_router_cases(tmp / "r2.jsonl"); }), ErrorCode::SchemaViolation);
    write_file(tmp / "empty.jsonl", "\n\n");
    EXPECT_EQ(code_of([&] { load_find_cases(tmp / "empty.jsonl"); }), ErrorCode::EmptyDataset);
    EXPECT_EQ(code_of([&] { load_find_cases(tmp / "missing.jsonl"); }), ErrorCode::MissingFile);
}

TEST(EvalRouter, AllCorrect) {
    const std::vector<RouterCase> cases = {{"1", "find it", router::Handler::Find, {}},
                                           {"2", "guide me", router::Handler::Guide, {}},
                                           {"3", "hide it", router::Handler::Hide, {}}};
    auto gw = keyed_gateway([](const std::string& user) {
        const std::string q = between(user, "Query: \"", "\"");
        return route(q == "find it" ? "find" : q == "guide me" ? "guide" : "hide");
    });
    const json r = eval_router(cases, *gw);
    for (const char* cls : {"find", "guide", "hide"}) EXPECT_EQ(r["classes"][cls]["accuracy"], 1.0);
    EXPECT_EQ(r["metrics"]["accuracy"], 1.0);
}

TEST(EvalRouter, ConfusionTally) {
    const std::vector<RouterCase> cases = {{"1", "a", router::Handler::Find, {}},
                                           {"2", "b", router::Handler::Find, {}},
                                           {"3", "c", router::Handler::Find, {}}};
    auto gw = keyed_gateway([](const std::string& user) {
        return route(between(user, "Query: \"", "\"") == "c" ? "guide" : "find");
    });
    const json r = eval_router(cases, *gw);
    EXPECT_DOUBLE_EQ(r["classes"]["find"]["accuracy"].get<double>(), 2.0 / 3.0);
    EXPECT_EQ(r["classes"]["find"]["error_types"], json::array({"guide × 1"}));
    EXPECT_EQ(code_of([&] { eval_router({}, *gw); }), ErrorCode::EmptyDataset);
}

TEST(EvalRouter, ReplayMissIsReportedPerCase) {
    const std::vector<RouterCase> cases = {{"1", "never recorded", router::Handler::Find, {}}};
    auto gw = testing::replay_gateway();
    const json r = eval_router(cases, *gw);
    ASSERT_EQ(r["errors"].size(), 1u);
    EXPECT_EQ(r["errors"][0]["code"], "ReplayMiss");
    EXPECT_EQ(r["errors"][0]["query"], "never recorded");
    EXPECT_EQ(r["metrics"]["accuracy"], 0.0);
}

class FindFixture : public ::testing::Test {
protected:
    void SetUp() override {
        save_snapshot(testing::page("<p>Directed by Christopher Nolan</p><p>Music by Hans Zimmer</p><p>Runtime 148 min</p>",
                                    "https://film.test/", "Film"),
                      tmp_ / "film");
    }
    FindCase make_case() {
        return {"c", tmp_ / "film", "Who directed it?", {"Christopher Nolan"}, {*NodePath::parse("/html[1]/body[1]/p[1]")}};
    }
    TempDir tmp_;
};

TEST_F(FindFixture, ExactGoldCitation) {
    auto gw = testing::canned_gateway({R"(It was Christopher Nolan [1:"Christopher Nolan"].)"});
    const json r = eval_find({make_case()}, *gw);
    EXPECT_EQ(r["per_case"][0]["precision"], 1.0);
    EXPECT_EQ(r["per_case"][0]["recall"], 1.0);
    EXPECT_EQ(r["per_case"][0]["f1"], 1.0);
    EXPECT_EQ(r["metrics"]["answer_correctness"], 1.0);
    EXPECT_EQ(r["per_case"][0]["evidence_f1"], 1.0);
}

TEST_F(FindFixture, ExtraCitationHalvesPrecision) {
    auto gw = testing::canned_gateway({R"(Christopher Nolan [1:"Christopher Nolan"], scored by [2:"Hans Zimmer"].)"});
    const json r = eval_find({make_case()}, *gw);
    EXPECT_EQ(r["per_case"][0]["precision"], 0.5);
    EXPECT_EQ(r["per_case"][0]["recall"], 1.0);
}

TEST_F(FindFixture, UnresolvableGoldPathIsAnError) {
    FindCase c = make_case();
    c.gold_element_paths = {*NodePath::parse("/html[1]/body[1]/p[9]")};
    auto gw = testing::canned_gateway({"x"});
    const json r = eval_find({c}, *gw);
    ASSERT_EQ(r["errors"].size(), 1u);
    EXPECT_EQ(r["errors"][0]["code"], "SchemaViolation");
    EXPECT_EQ(r["per_case"][0]["f1"], 0.0);
}

TEST(EvalHide, PartialRecallAndSplits) {
    TempDir tmp;
    save_snapshot(testing::page("<p>adA</p><p>content</p><p>adB</p>"), tmp / "p");
    const auto ad_a = *NodePath::parse("/html[1]/body[1]/p[1]");
    const auto ad_b = *NodePath::parse("/html[1]/body[1]/p[3]");
    const std::vector<HideCase> cases = {{"1", tmp / "p", "hide ads", hide::Difficulty::Easy, 1, {ad_a, ad_b}},
                                         {"2", tmp / "p", "hide everything ad", hide::Difficulty::Hard, 3, {ad_a, ad_b}}};
    auto gw = keyed_gateway([](const std::string& user) {
        if (user.find("USER REQUEST: hide ads\n") != std::string::npos) return std::string(R"({"found":[{"index":1}]})");
        return std::string(R"({"found":[{"index":1},{"index":3}]})");
    });
    const json r = eval_hide(cases, *gw);
    EXPECT_EQ(r["per_case"][0]["recall"], 0.5);
    EXPECT_EQ(r["per_case"][0]["precision"], 1.0);
    EXPECT_EQ(r["per_case"][1]["f1"], 1.0);
    int total = 0;
    for (const auto& [name, split] : r["difficulty"].items()) total += split["cases"].get<int>();
    EXPECT_EQ(total, 2);
    const double p = r["metrics"]["precision"], rc = r["metrics"]["recall"], f = r["metrics"]["f1"];
    EXPECT_DOUBLE_EQ(r["metrics"]["avg"].get<double>(), (p + rc + f) / 3.0);
}

TEST(EvalGuide, SplitAverage) {
    TempDir tmp;
    save_snapshot(testing::page("<button>Go</button>", "https://a.test/1"), tmp / "a");
    save_snapshot(testing::page("<button>Done</button>", "https://a.test/2"), tmp / "b");
    write_file(tmp / "seq.json", R"(["a", "b"])");
    const auto button = *NodePath::parse("/html[1]/body[1]/button[1]");
    auto make = [&](const std::string& id, hide::Difficulty d) {
        return GuideCase{id, tmp / "seq.json", "task " + id, {{"click", button}}, 1, d};
    };
    const std::vector<GuideCase> cases = {make("e", hide::Difficulty::Easy), make("m1", hide::Difficulty::Medium),
                                          make("m2", hide::Difficulty::Medium), make("h", hide::Difficulty::Hard)};
    auto gw = keyed_gateway([](const std::string& user) {
        const std::string task = between(user, "USER QUESTION: task ", "\n");
        // e and m1 follow the gold trace; m2 types instead; h never finishes.
        const std::string wait = task == "m2" ? "type" : "click";
        const bool last = task != "h";
        return json{{"instruction", "press"}, {"highlight", {{"index", 1}}}, {"waitFor", wait}, {"isLastStep", last}}.dump();
    });
    const json r = eval_guide(cases, *gw);
    EXPECT_EQ(r["difficulty"]["easy"]["success_rate"], 1.0);
    EXPECT_EQ(r["difficulty"]["medium"]["success_rate"], 0.5);
    EXPECT_EQ(r["difficulty"]["hard"]["success_rate"], 0.0);
    EXPECT_EQ(r["metrics"]["avg"], 0.5);
    EXPECT_EQ(r["metrics"]["success_rate"], 0.5);
    // Running out of snapshots is a task failure, not a harness error.
    EXPECT_TRUE(r["errors"].empty());
    EXPECT_EQ(r["per_case"][3]["outcome"], "SequenceExhausted");
}

TEST(RunEval, ReplayIsStableAndCarriesProvenance) {
    for (const char* kind : {"router", "find", "hide", "guide"}) {
        const auto file = testing::data_dir() / "datasets" / (std::string(kind) + ".jsonl");
        auto a = testing::replay_gateway();
        auto b = testing::replay_gateway();
        const json ra = run_eval(*parse_kind(kind), file, *a);
        const json rb = run_eval(*parse_kind(kind), file, *b);
        EXPECT_EQ(ra.dump(), rb.dump()) << kind;
        EXPECT_TRUE(ra["errors"].empty()) << kind << ra["errors"].dump();
        EXPECT_EQ(ra["provenance"]["store_mode"], "replay");
        EXPECT_EQ(ra["provenance"]["transcript_sha256"].get<std::string>().size(), 64u);
        for (const auto& [name, value] : ra["metrics"].items()) {
            EXPECT_GE(value.get<double>(), 0.0) << kind << " " << name;
            if (name != "cases") EXPECT_LE(value.get<double>(), 1.0) << kind << " " << name;
        }
    }
}

TEST(Kinds, Names) {
    for (Kind k : {Kind::Router, Kind::Find, Kind::Hide, Kind::Guide}) EXPECT_EQ(parse_kind(to_string(k)), k);
    EXPECT_FALSE(parse_kind("nope"));
}

}  // namespace
}  // namespace pageguide::eval
