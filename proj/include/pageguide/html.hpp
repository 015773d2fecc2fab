#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Lenient HTML parsing into a mutable node tree plus stable root-to-node
// addressing (NodePath).
namespace pageguide::html {

enum class NodeKind { Document, Element, Text, Comment, Doctype };

struct Attribute {
    std::string name;
    std::string value;

    bool operator==(const Attribute&) const = default;
};

class Node {
public:
    explicit Node(NodeKind kind, std::string name = {}) : kind_(kind), name_(std::move(name)) {}

    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    NodeKind kind() const noexcept { return kind_; }
    bool is_element() const noexcept { return kind_ == NodeKind::Element; }
    bool is_element(std::string_view tag) const noexcept { return is_element() && name_ == tag; }

    /// Lowercase tag name for elements, doctype name for doctypes.
    const std::string& name() const noexcept { return name_; }

    /// Character data for text and comment nodes (entities decoded).
    const std::string& data() const noexcept { return data_; }
    void set_data(std::string data) { data_ = std::move(data); }

    const std::vector<Attribute>& attributes() const noexcept { return attrs_; }
    const std::string* attribute(std::string_view name) const noexcept;
    bool has_attribute(std::string_view name) const noexcept { return attribute(name) != nullptr; }
    /// Sets in place when present, appends otherwise.
    void set_attribute(std::string_view name, std::string value);
    void remove_attribute(std::string_view name);

    Node* parent() const noexcept { return parent_; }
    const std::vector<std::unique_ptr<Node>>& children() const noexcept { return children_; }

    Node& append_child(std::unique_ptr<Node> child);

    std::unique_ptr<Node> clone() const;

private:
    friend class TreeBuilder;

    NodeKind kind_;
    std::string name_;
    std::string data_;
    std::vector<Attribute> attrs_;
    std::vector<std::unique_ptr<Node>> children_;
    Node* parent_ = nullptr;
};

/// One step of a NodePath: tag plus 1-based ordinal among same-tag element siblings.
struct PathStep {
    std::string tag;
    int ordinal = 1;

    bool operator==(const PathStep&) const = default;
    auto operator<=>(const PathStep&) const = default;
};

/// Root-to-node address, written as `/html[1]/body[1]/div[2]`.
class NodePath {
public:
    NodePath() = default;
    explicit NodePath(std::vector<PathStep> steps) : steps_(std::move(steps)) {}

    /// Parses the textual form; nullopt when malformed.
    static std::optional<NodePath> parse(std::string_view s);
    /// Computes the path of an element node.
    static NodePath of(const Node& element);

    const std::vector<PathStep>& steps() const noexcept { return steps_; }
    bool empty() const noexcept { return steps_.empty(); }
    std::string str() const;

    bool operator==(const NodePath&) const = default;
    auto operator<=>(const NodePath&) const = default;

private:
    std::vector<PathStep> steps_;
};

class Document {
public:
    Document();
    Document(const Document& other);
    Document& operator=(const Document& other);
    Document(Document&&) noexcept = default;
    Document& operator=(Document&&) noexcept = default;

    /// Browser-style lenient parse. Never fails; html/head/body always exist.
    static Document parse(std::string_view html);

    Node& root() noexcept { return *root_; }
    const Node& root() const noexcept { return *root_; }

    Node* html() const noexcept;
    Node* head() const noexcept;
    Node* body() const noexcept;

    Node* resolve(const NodePath& path) const noexcept;

    /// Canonical serialization: attributes in source order, double-quoted,
    /// minimal escaping, void elements without end tags.
    std::string serialize() const;

private:
    std::unique_ptr<Node> root_;
};

std::string serialize(const Node& node);
/// Serializes only the start tag of an element (`<p class="x">`).
std::string serialize_start_tag(const Node& element);

bool is_void_element(std::string_view tag) noexcept;
bool is_raw_text_element(std::string_view tag) noexcept;

/// Calls `fn(node)` on `node` and every descendant in document (pre-)order.
template <typename Fn>
void walk(const Node& node, Fn&& fn) {
    fn(node);
    for (const auto& child : node.children()) walk(*child, fn);
}

/// Decodes character references (`&amp;`, `&#233;`, `&#x1F600;`).
std::string decode_entities(std::string_view s);

}  // namespace pageguide::html
