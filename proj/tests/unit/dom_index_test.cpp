#include <gtest/gtest.h>

#include <numeric>

#include "pageguide/dom_index.hpp"
#include "pageguide/error.hpp"
#include "pageguide/text.hpp"
#include "test_support.hpp"

namespace pageguide {
namespace {

using testing::page;

IndexedElement element_with(const std::string& text) {
    IndexedElement e;
    e.id = 1;
    e.text = text;
    e.tag = "p";
    return e;
}

TEST(BuildIndex, TwoElementBody) {
    const ElementIndex idx = build_index(page("<p>hi</p><button>Go</button>"));
    ASSERT_EQ(idx.size(), 2u);
    EXPECT_EQ(idx.elements[0].id, 1);
    EXPECT_EQ(idx.elements[0].text, "hi");
    EXPECT_EQ(idx.elements[0].tag, "p");
    EXPECT_FALSE(idx.elements[0].interactive);
    EXPECT_EQ(idx.elements[1].id, 2);
    EXPECT_EQ(idx.elements[1].text, "Go");
    EXPECT_EQ(idx.elements[1].tag, "button");
    EXPECT_TRUE(idx.elements[1].interactive);
    EXPECT_EQ(idx.elements[1].node_path.str(), "/html[1]/body[1]/button[1]");
}

TEST(BuildIndex, DisplayNoneSubtreeExcluded) {
    const ElementIndex idx = build_index(page(R"(<div style="display:none">secret</div><p>shown</p>)"));
    ASSERT_EQ(idx.size(), 1u);
    EXPECT_EQ(idx.elements[0].text, "shown");
}

TEST(BuildIndex, OtherHidingMechanisms) {
    const ElementIndex idx = build_index(page(
        R"(<div hidden><p>a</p></div><p aria-hidden="true">b</p><section style="visibility: hidden"><p>c</p></section>)"
        R"(<template><p>d</p></template><script>e()</script><p>visible</p>)"));
    ASSERT_EQ(idx.size(), 1u);
    EXPECT_EQ(idx.elements[0].text, "visible");
}

TEST(BuildIndex, LayoutVisibilityAndZeroArea) {
    Snapshot s = page("<p>one</p><p>two</p><p>three</p>");
    s.layout = std::map<std::string, LayoutBox>{{"/html[1]/body[1]/p[1]", {5, 6, 70, 8, true}},
                                                {"/html[1]/body[1]/p[2]", {0, 0, 10, 10, false}},
                                                {"/html[1]/body[1]/p[3]", {0, 0, 0, 10, true}}};
    const ElementIndex idx = build_index(s);
    ASSERT_EQ(idx.size(), 1u);
    EXPECT_EQ(idx.elements[0].text, "one");
    EXPECT_EQ(idx.elements[0].bbox, (LayoutBox{5, 6, 70, 8, true}));
}

TEST(BuildIndex, PseudoBoxesFollowDocumentRank) {
    const ElementIndex idx = build_index(page("<p>a</p><p>b</p><p>c</p>"));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        EXPECT_EQ(idx.elements[k].bbox, (LayoutBox{0, 20.0 * static_cast<double>(k), 0, 20.0, true}));
    }
}

TEST(BuildIndex, EmptyBody) {
    const ElementIndex idx = build_index(load_snapshot(testing::snapshot_dir("empty-body")));
    EXPECT_TRUE(idx.empty());
}

TEST(BuildIndex, ContainersWithoutDirectTextAreSkipped) {
    const ElementIndex idx = build_index(page("<div><span>x</span></div><div>y<b>z</b></div>"));
    std::vector<std::string> tags;
    for (const auto& e : idx.elements) tags.push_back(e.tag);
    EXPECT_EQ(tags, (std::vector<std::string>{"span", "div", "b"}));
}

TEST(BuildIndex, InteractiveWithoutTextGetsLabel) {
    const ElementIndex idx =
        build_index(page(R"(<input type="email" placeholder="Email"><a href="/x"><img alt="Logo"></a><div role="button"></div>)"));
    ASSERT_EQ(idx.size(), 3u);
    for (const auto& e : idx.elements) EXPECT_TRUE(e.interactive) << e.tag;
    EXPECT_EQ(idx.elements[0].tag, "input");
    EXPECT_NE(idx.elements[0].text.find("Email"), std::string::npos);
}

TEST(BuildIndex, RefOverride) {
    const Snapshot s = page("<p>x</p>");
    EXPECT_EQ(build_index(s).snapshot_ref, s.digest());
    EXPECT_EQ(build_index(s, {}, "custom").snapshot_ref, "custom");
}

// Properties over the bundled corpus: determinism, density, document order,
// and node paths that resolve in the source.
TEST(IndexProperty, DeterministicDenseOrderedResolvable) {
    for (const auto& dir : testing::corpus_dirs()) {
        const Snapshot s = load_snapshot(dir);
        const ElementIndex a = build_index(s);
        const ElementIndex b = build_index(s);
        EXPECT_EQ(a, b) << dir;
        const auto doc = html::Document::parse(s.html);
        std::vector<const html::Node*> order;
        html::walk(doc.root(), [&](const html::Node& n) {
            if (n.is_element()) order.push_back(&n);
        });
        std::size_t last = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto& e = a.elements[i];
            EXPECT_EQ(e.id, static_cast<int>(i) + 1) << dir;
            EXPECT_FALSE(e.tag.empty());
            EXPECT_TRUE(!e.text.empty() || e.interactive) << dir << " " << e.id;
            const html::Node* node = doc.resolve(e.node_path);
            ASSERT_NE(node, nullptr) << dir << " " << e.node_path.str();
            const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), node) - order.begin());
            if (i > 0) EXPECT_GT(pos, last) << dir << " " << e.id;
            last = pos;
        }
    }
}

TEST(SerializeIndex, Formatting) {
    const ElementIndex idx = build_index(page("<p>hi</p><button>Go</button>"));
    EXPECT_EQ(serialize_index(idx, 1000000), "[1] (p) hi\n[2] (button) Go");
    EXPECT_EQ(serialize_index(idx, 0), "…(2 more elements)");
}

TEST(SerializeIndex, ClipsLongText) {
    const ElementIndex idx = build_index(page("<p>" + std::string(200, 'x') + "</p>"));
    const std::string out = serialize_index(idx, 1000000);
    ASSERT_GE(out.size(), 3u);
    EXPECT_EQ(out.substr(out.size() - 3), "…");
    EXPECT_EQ(text::length(out), std::string("[1] (p) ").size() + 120 + 1);
}

TEST(SerializeIndex, TruncatesAtWholeLines) {
    const ElementIndex idx = build_index(page("<p>aaaa</p><p>bbbb</p><p>cccc</p>"));
    const std::string full = serialize_index(idx, 1000000);
    const std::string first = "[1] (p) aaaa";
    const std::string out = serialize_index(idx, first.size() + 1);
    EXPECT_EQ(out.rfind(first + "\n", 0), 0u);
    EXPECT_NE(out.find("…(2 more elements)"), std::string::npos);
    EXPECT_EQ(out.find("bbbb"), std::string::npos);
}

TEST(ResolveElement, InAndOutOfRange) {
    const ElementIndex idx = build_index(page("<p>hi</p><button>Go</button>"));
    EXPECT_EQ(resolve_element(idx, 2).tag, "button");
    EXPECT_THROW(resolve_element(idx, 99), Error);
    EXPECT_THROW(resolve_element(idx, 0), Error);
    EXPECT_THROW(resolve_element(ElementIndex{}, 1), Error);
    try {
        resolve_element(idx, 99);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownElementId);
    }
}

TEST(FindTextSpan, ExactTier) {
    const SpanMatch m = find_text_span(element_with("Directed by Christopher Nolan"), "Christopher Nolan");
    EXPECT_EQ(m.start, 12u);
    EXPECT_EQ(m.end, 29u);
    EXPECT_EQ(m.tier, MatchTier::Exact);
    EXPECT_EQ(m.score, 1.0);
}

TEST(FindTextSpan, CaseInsensitiveTier) {
    const SpanMatch m = find_text_span(element_with("FOO BAR"), "foo bar");
    EXPECT_EQ(m.tier, MatchTier::CaseInsensitive);
    EXPECT_EQ(m.start, 0u);
    EXPECT_EQ(m.end, 7u);
}

TEST(FindTextSpan, WhitespaceTierMapsBackToSource) {
    const SpanMatch m = find_text_span(element_with("set  the channel width"), "the channel");
    EXPECT_EQ(m.tier, MatchTier::WhitespaceNormalized);
    EXPECT_EQ(m.start, 5u);
    EXPECT_EQ(m.end, 16u);
}

TEST(FindTextSpan, FuzzyTier) {
    const SpanMatch m =
        find_text_span(element_with("Speeds are back, thanks: set it to 80 MHz."), "set it back to 80 MHz");
    EXPECT_EQ(m.tier, MatchTier::Fuzzy);
    EXPECT_GE(m.score, 0.8);
    EXPECT_LT(m.start, m.end);
}

TEST(FindTextSpan, NoMatch) {
    try {
        find_text_span(element_with("alpha"), "zzz");
        FAIL() << "expected NoSpanMatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoSpanMatch);
    }
}

TEST(FindTextSpan, LeftmostOccurrence) {
    const SpanMatch m = find_text_span(element_with("ab ab ab"), "ab");
    EXPECT_EQ(m.start, 0u);
    const SpanMatch ci = find_text_span(element_with("xAB Ab ab"), "aB");
    EXPECT_EQ(ci.tier, MatchTier::CaseInsensitive);
    EXPECT_EQ(ci.start, 1u);
}

TEST(FindTextSpan, OffsetsAreCodePoints) {
    const SpanMatch m = find_text_span(element_with("café ⋮ menu"), "menu");
    EXPECT_EQ(m.start, 7u);
    EXPECT_EQ(m.end, 11u);
}

TEST(HiddenByMarkup, InlineChecks) {
    const auto doc = html::Document::parse(
        R"(<p style="DISPLAY : none">a</p><p style="color:red">b</p><p hidden>c</p><p aria-hidden="false">d</p>)");
    std::vector<bool> hidden;
    html::walk(*doc.body(), [&](const html::Node& n) {
        if (n.is_element("p")) hidden.push_back(hidden_by_markup(n));
    });
    EXPECT_EQ(hidden, (std::vector<bool>{true, false, true, false}));
}

}  // namespace
}  // namespace pageguide
