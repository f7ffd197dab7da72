#include "semb/slate.hpp"

#include <stdexcept>

namespace semb {

SlateNode SlateNode::internal(std::vector<SlateNode> children) {
  if (children.empty()) {
    throw std::invalid_argument("internal slate node must have at least one child");
  }
  return SlateNode(Children{std::move(children)});
}

std::size_t SlateNode::node_count() const noexcept {
  if (is_leaf()) return 1;
  std::size_t n = 1;
  for (const SlateNode& c : children()) n += c.node_count();
  return n;
}

}  // namespace semb
