#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsnn {

/// Two-level label tree: every sub-label has exactly one top-level parent.
class LabelHierarchy {
 public:
  /// Registers sub -> top. Re-adding the same pair is a no-op; a conflicting
  /// parent is rejected.
  void add(const std::string& sub, const std::string& top) {
    auto it = parent_.find(sub);
    if (it != parent_.end()) {
      if (it->second != top) {
        throw std::invalid_argument("label '" + sub + "' already maps to '" + it->second + "', not '" + top + "'");
      }
      return;
    }
    parent_.emplace(sub, top);
    children_[top].push_back(sub);
  }

  bool contains(const std::string& sub) const { return parent_.count(sub) != 0; }

  const std::string& parent(const std::string& sub) const {
    auto it = parent_.find(sub);
    if (it == parent_.end()) throw std::out_of_range("unknown sub-label '" + sub + "'");
    return it->second;
  }

  std::vector<std::string> tops() const {
    std::vector<std::string> out;
    for (const auto& [top, subs] : children_) out.push_back(top);
    return out;
  }

  const std::vector<std::string>& children(const std::string& top) const {
    static const std::vector<std::string> none;
    auto it = children_.find(top);
    return it == children_.end() ? none : it->second;
  }

  std::size_t size() const { return parent_.size(); }
  const std::map<std::string, std::string>& pairs() const { return parent_; }

  /// Merges another hierarchy into this one (conflicts rejected).
  void merge(const LabelHierarchy& other) {
    for (const auto& [sub, top] : other.parent_) add(sub, top);
  }

  static LabelHierarchy flat(const std::vector<std::string>& labels) {
    LabelHierarchy h;
    for (const auto& l : labels) h.add(l, l);
    return h;
  }

  bool operator==(const LabelHierarchy& o) const { return parent_ == o.parent_; }

 private:
  std::map<std::string, std::string> parent_;
  std::map<std::string, std::vector<std::string>> children_;
};

}  // namespace gsnn
