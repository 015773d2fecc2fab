#include <gtest/gtest.h>

#include "pageguide/error.hpp"
#include "pageguide/snapshot.hpp"
#include "test_support.hpp"

namespace pageguide {
namespace {

using testing::TempDir;
using testing::write_file;

void write_bundle(const std::filesystem::path& dir, const std::string& html, const std::string& meta) {
    write_file(dir / "page.html", html);
    write_file(dir / "meta.json", meta);
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Usage;
}

TEST(LoadSnapshot, MinimalBundle) {
    TempDir tmp;
    write_bundle(tmp.path(), "<html><body><p>hi</p></body></html>", R"({"url":"https://a.test/","title":"A"})");
    const Snapshot s = load_snapshot(tmp.path());
    EXPECT_EQ(s.url, "https://a.test/");
    EXPECT_EQ(s.title, "A");
    EXPECT_FALSE(s.layout);
    const auto doc = html::Document::parse(s.html);
    int paragraphs = 0;
    html::walk(*doc.body(), [&](const html::Node& n) { paragraphs += n.is_element("p"); });
    EXPECT_EQ(paragraphs, 1);
}

TEST(LoadSnapshot, MissingMetaIsMissingFile) {
    TempDir tmp;
    write_file(tmp / "page.html", "<p>x</p>");
    EXPECT_EQ(code_of([&] { load_snapshot(tmp.path()); }), ErrorCode::MissingFile);
}

TEST(LoadSnapshot, MetaWithoutTitleOrRelativeUrlIsMalformed) {
    TempDir tmp;
    write_bundle(tmp.path(), "<p>x</p>", R"({"url":"https://a.test/"})");
    EXPECT_EQ(code_of([&] { load_snapshot(tmp.path()); }), ErrorCode::MalformedMeta);
    write_bundle(tmp.path(), "<p>x</p>", R"({"url":"/relative","title":"A"})");
    EXPECT_EQ(code_of([&] { load_snapshot(tmp.path()); }), ErrorCode::MalformedMeta);
    write_bundle(tmp.path(), "<p>x</p>", "not json");
    EXPECT_EQ(code_of([&] { load_snapshot(tmp.path()); }), ErrorCode::MalformedMeta);
}

TEST(LoadSnapshot, EmptyOrInvalidHtmlIsUnparseable) {
    TempDir tmp;
    write_bundle(tmp.path(), "  \n", R"({"url":"https://a.test/","title":"A"})");
    EXPECT_EQ(code_of([&] { load_snapshot(tmp.path()); }), ErrorCode::UnparseableHtml);
    write_bundle(tmp.path(), "<p>\xC0\xAF</p>", R"({"url":"https://a.test/","title":"A"})");
    EXPECT_EQ(code_of([&] { load_snapshot(tmp.path()); }), ErrorCode::UnparseableHtml);
}

TEST(LoadSnapshot, DanglingLayoutEntryIsDroppedAndCounted) {
    TempDir tmp;
    write_bundle(tmp.path(), "<html><body><p>hi</p></body></html>", R"({"url":"https://a.test/","title":"A"})");
    write_file(tmp / "layout.json", R"([
        {"path":"/html[1]/body[1]/p[1]","x":1,"y":2,"w":3,"h":4,"visible":true},
        {"path":"/html[1]/body[1]/div[7]","x":0,"y":0,"w":1,"h":1,"visible":true}])");
    const Snapshot s = load_snapshot(tmp.path());
    ASSERT_TRUE(s.layout);
    EXPECT_EQ(s.layout->size(), 1u);
    EXPECT_EQ(s.dropped_layout_entries, 1);
    EXPECT_EQ(s.layout->at("/html[1]/body[1]/p[1]"), (LayoutBox{1, 2, 3, 4, true}));
}

TEST(LoadSnapshot, BundledDocsLayoutDropsItsDanglingEntry) {
    const Snapshot s = load_snapshot(testing::snapshot_dir("docs-layout"));
    ASSERT_TRUE(s.layout);
    EXPECT_EQ(s.dropped_layout_entries, 1);
    EXPECT_EQ(s.layout->size(), 4u);
}

TEST(SaveSnapshot, RoundTripIsEquivalent) {
    TempDir tmp;
    const Snapshot s = make_snapshot("<html><body><p>hi</p></body></html>", "https://a.test/", "A",
                                     "2026-01-02T03:04:05Z");
    save_snapshot(s, tmp / "b");
    const Snapshot back = load_snapshot(tmp / "b");
    EXPECT_TRUE(equivalent(s, back));
    EXPECT_EQ(s.digest(), back.digest());
}

TEST(SaveSnapshot, LayoutKeySetSurvives) {
    TempDir tmp;
    Snapshot s = make_snapshot("<html><body><p>a</p><p>b</p></body></html>", "https://a.test/", "A");
    s.layout = std::map<std::string, LayoutBox>{{"/html[1]/body[1]/p[1]", {0, 0, 10, 10, true}},
                                                {"/html[1]/body[1]/p[2]", {0, 10, 10, 10, false}}};
    save_snapshot(s, tmp / "b");
    ASSERT_TRUE(std::filesystem::exists(tmp / "b" / "layout.json"));
    const Snapshot back = load_snapshot(tmp / "b");
    ASSERT_TRUE(back.layout);
    EXPECT_EQ(*back.layout, *s.layout);
}

TEST(SaveSnapshot, UnwritableDirectoryIsIoError) {
    TempDir tmp;
    write_file(tmp / "file", "x");
    const Snapshot s = make_snapshot("<p>x</p>", "https://a.test/", "A");
    EXPECT_EQ(code_of([&] { save_snapshot(s, tmp / "file" / "sub"); }), ErrorCode::IoError);
}

TEST(SaveSnapshot, MetaJsonBytesStableAcrossRoundTrips) {
    TempDir tmp;
    const Snapshot s = load_snapshot(testing::snapshot_dir("film-article"));
    save_snapshot(s, tmp / "one");
    save_snapshot(load_snapshot(tmp / "one"), tmp / "two");
    EXPECT_EQ(testing::read_file(tmp / "one" / "meta.json"), testing::read_file(tmp / "two" / "meta.json"));
    EXPECT_EQ(testing::read_file(tmp / "one" / "meta.json"), meta_json(s));
}

TEST(LoadSequence, BundledSignupHasThreePagesInOrder) {
    const auto pages = load_sequence(testing::data_dir() / "sequences" / "signup.json");
    ASSERT_EQ(pages.size(), 3u);
    EXPECT_TRUE(equivalent(pages[0], load_snapshot(testing::snapshot_dir("signup-form"))));
    EXPECT_TRUE(equivalent(pages[1], load_snapshot(testing::snapshot_dir("signup-form-email"))));
    EXPECT_TRUE(equivalent(pages[2], load_snapshot(testing::snapshot_dir("signup-form-filled"))));
}

TEST(LoadSequence, EmptyManifest) {
    TempDir tmp;
    write_file(tmp / "seq.json", "[]");
    EXPECT_EQ(code_of([&] { load_sequence(tmp / "seq.json"); }), ErrorCode::EmptySequence);
}

TEST(LoadSequence, ErrorNamesFailingIndex) {
    TempDir tmp;
    write_bundle(tmp / "a", "<p>a</p>", R"({"url":"https://a.test/","title":"A"})");
    write_bundle(tmp / "b", "<p>b</p>", R"({"title":"B"})");
    write_file(tmp / "seq.json", R"(["a", "b"])");
    try {
        load_sequence(tmp / "seq.json");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedMeta);
        EXPECT_EQ(e.detail().at("index"), 1);
    }
}

TEST(SnapshotProperty, LoadingTwiceIsFieldEqual) {
    for (const auto& dir : testing::corpus_dirs()) {
        const Snapshot a = load_snapshot(dir);
        const Snapshot b = load_snapshot(dir);
        EXPECT_EQ(a.html, b.html) << dir;
        EXPECT_TRUE(equivalent(a, b)) << dir;
        EXPECT_EQ(a.digest(), b.digest()) << dir;
    }
}

TEST(Validation, UrlAndTimestampPredicates) {
    EXPECT_TRUE(is_absolute_url("https://a.test/x?y"));
    EXPECT_TRUE(is_absolute_url("http://localhost:8080"));
    EXPECT_FALSE(is_absolute_url("/path"));
    EXPECT_FALSE(is_absolute_url("a.test"));
    EXPECT_TRUE(is_rfc3339("2026-10-16T12:00:00Z"));
    EXPECT_TRUE(is_rfc3339("2026-10-16T12:00:00.123+02:00"));
    EXPECT_FALSE(is_rfc3339("2026-10-16 12:00"));
    EXPECT_FALSE(is_rfc3339("yesterday"));
}

TEST(Validation, NegativeLayoutSizesAreDropped) {
    Snapshot s = make_snapshot("<html><body><p>a</p></body></html>", "https://a.test/", "A");
    s.layout = std::map<std::string, LayoutBox>{{"/html[1]/body[1]/p[1]", {0, 0, -1, 10, true}}};
    validate(s);
    EXPECT_TRUE(s.layout->empty());
    EXPECT_EQ(s.dropped_layout_entries, 1);
}

}  // namespace
}  // namespace pageguide
