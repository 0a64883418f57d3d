#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlrank {

/// An immutable set of label indices (0-based internally). Members are kept
/// sorted ascending and unique; that ordering is relied on everywhere pair
/// enumeration order matters.
class LabelSet {
 public:
  LabelSet() = default;

  explicit LabelSet(std::vector<int> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_[i] < 0)
        throw std::invalid_argument("label index must be non-negative, got " +
                                    std::to_string(members_[i]));
      if (i > 0 && members_[i] == members_[i - 1])
        throw std::invalid_argument("duplicate label index " +
                                    std::to_string(members_[i]));
    }
  }

  static LabelSet from_mask(std::uint32_t mask, int vocab_size) {
    std::vector<int> m;
    for (int k = 0; k < vocab_size; ++k)
      if (mask & (1u << k)) m.push_back(k);
    return LabelSet(std::move(m));
  }

  bool contains(int label) const {
    return std::binary_search(members_.begin(), members_.end(), label);
  }

  int size() const { return static_cast<int>(members_.size()); }
  bool empty() const { return members_.empty(); }
  const std::vector<int>& members() const { return members_; }

  /// Complement within {0, ..., vocab_size-1}, ascending.
  std::vector<int> absent(int vocab_size) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(vocab_size) - members_.size());
    std::size_t j = 0;
    for (int k = 0; k < vocab_size; ++k) {
      if (j < members_.size() && members_[j] == k) {
        ++j;
      } else {
        out.push_back(k);
      }
    }
    return out;
  }

  /// Throws if any member falls outside {0, ..., vocab_size-1}.
  void check_range(int vocab_size) const {
    if (!members_.empty() && members_.back() >= vocab_size)
      throw std::invalid_argument(
          "label index " + std::to_string(members_.back()) +
          " out of range for vocabulary of size " + std::to_string(vocab_size));
  }

  std::uint32_t to_mask(int vocab_size) const {
    check_range(vocab_size);
    std::uint32_t mask = 0;
    for (int k : members_) mask |= (1u << k);
    return mask;
  }

  bool operator==(const LabelSet& other) const = default;

 private:
  std::vector<int> members_;
};

}  // namespace mlrank
