#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace semb {

// A hierarchical slate: leaves reference schema features, internal nodes
// hold an ordered, nonempty list of children. The MovieLens slate is a
// depth-2 tree (slots over movie/position leaves); a session is a tree of
// action nodes over action-feature leaves.
class SlateNode {
 public:
  static SlateNode categorical(std::string family, std::uint32_t id) {
    return SlateNode(CatLeaf{std::move(family), id});
  }
  static SlateNode numerical(std::string family, double value) {
    return SlateNode(NumLeaf{std::move(family), value});
  }
  static SlateNode internal(std::vector<SlateNode> children);

  bool is_internal() const noexcept { return std::holds_alternative<Children>(node_); }
  bool is_leaf() const noexcept { return !is_internal(); }
  bool is_categorical() const noexcept { return std::holds_alternative<CatLeaf>(node_); }
  bool is_numerical() const noexcept { return std::holds_alternative<NumLeaf>(node_); }

  // Leaf accessors; calling on the wrong node kind throws std::bad_variant_access.
  const std::string& family() const {
    if (auto* c = std::get_if<CatLeaf>(&node_)) return c->family;
    return std::get<NumLeaf>(node_).family;
  }
  std::uint32_t feature_id() const { return std::get<CatLeaf>(node_).id; }
  double value() const { return std::get<NumLeaf>(node_).value; }

  std::span<const SlateNode> children() const {
    const auto& c = std::get<Children>(node_);
    return {c.data(), c.size()};
  }

  std::size_t node_count() const noexcept;

 private:
  struct CatLeaf {
    std::string family;
    std::uint32_t id;
  };
  struct NumLeaf {
    std::string family;
    double value;
  };
  using Children = std::vector<SlateNode>;

  template <class T>
  explicit SlateNode(T&& node) : node_(std::forward<T>(node)) {}

  std::variant<CatLeaf, NumLeaf, Children> node_;
};

}  // namespace semb
