#pragma once

// Balanced binary Merkle tree. Odd-width levels pair their last node with
// itself. Authentication paths carry explicit sides so they can be folded
// without knowing the tree size, and verify_path cross-checks those sides
// against the leaf index.

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nostra/crypto.hpp"

namespace nostra {

/// Which side the sibling concatenates on at one level of the fold.
enum class Side : std::uint8_t { left, right };

struct PathStep {
  Digest sibling;
  Side side = Side::right;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct AuthPath {
  std::uint64_t leaf_index = 0;
  std::vector<PathStep> steps;

  friend bool operator==(const AuthPath&, const AuthPath&) = default;
};

/// Number of path steps for a tree with `leaf_count` leaves.
inline std::size_t tree_depth(std::size_t leaf_count) {
  if (leaf_count <= 1) return 0;
  return static_cast<std::size_t>(std::bit_width(leaf_count - 1));
}

class MerkleTree {
 public:
  explicit MerkleTree(std::vector<Digest> leaves, HashAlgorithm algo = kDefaultHash)
      : algo_(algo) {
    if (leaves.empty()) throw std::invalid_argument("merkle tree needs at least one leaf");
    for (const auto& leaf : leaves) {
      if (leaf.size() != digest_size(algo))
        throw std::invalid_argument("leaf digest length does not match " +
                                    std::string(to_string(algo)));
    }
    levels_.push_back(std::move(leaves));
    while (levels_.back().size() > 1) {
      const auto& below = levels_.back();
      std::vector<Digest> above;
      above.reserve((below.size() + 1) / 2);
      for (std::size_t i = 0; i < below.size(); i += 2) {
        const Digest& right = i + 1 < below.size() ? below[i + 1] : below[i];
        above.push_back(hash_node(below[i], right, algo_));
      }
      levels_.push_back(std::move(above));
    }
  }

  const Digest& root() const { return levels_.back().front(); }
  const std::vector<Digest>& leaves() const { return levels_.front(); }
  const std::vector<std::vector<Digest>>& levels() const { return levels_; }
  std::size_t leaf_count() const { return levels_.front().size(); }
  std::size_t depth() const { return levels_.size() - 1; }
  HashAlgorithm algorithm() const { return algo_; }

  AuthPath auth_path(std::size_t leaf_index) const {
    if (leaf_index >= leaf_count())
      throw std::out_of_range("leaf index " + std::to_string(leaf_index) +
                              " out of range for " + std::to_string(leaf_count()) +
                              " leaves");
    AuthPath path;
    path.leaf_index = leaf_index;
    std::size_t pos = leaf_index;
    for (std::size_t level = 0; level + 1 < levels_.size(); ++level) {
      const auto& nodes = levels_[level];
      if (pos % 2 == 0) {
        const Digest& sib = pos + 1 < nodes.size() ? nodes[pos + 1] : nodes[pos];
        path.steps.push_back({sib, Side::right});
      } else {
        path.steps.push_back({nodes[pos - 1], Side::left});
      }
      pos /= 2;
    }
    return path;
  }

 private:
  HashAlgorithm algo_;
  std::vector<std::vector<Digest>> levels_;
};

inline MerkleTree build_tree(std::vector<Digest> leaves, HashAlgorithm algo = kDefaultHash) {
  return MerkleTree(std::move(leaves), algo);
}

inline const Digest& root(const MerkleTree& tree) { return tree.root(); }

inline AuthPath auth_path(const MerkleTree& tree, std::size_t leaf_index) {
  return tree.auth_path(leaf_index);
}

/// Folds `leaf` up through `path`. Returns nullopt when the path is
/// internally inconsistent: a side that disagrees with the leaf index bit at
/// that level, an index too large for the path length, or a sibling of the
/// wrong length.
inline std::optional<Digest> fold_path(const Digest& leaf, const AuthPath& path,
                                       HashAlgorithm algo = kDefaultHash) {
  const std::size_t width = digest_size(algo);
  if (leaf.size() != width) return std::nullopt;
  if (path.steps.size() >= 64) return std::nullopt;
  if ((path.leaf_index >> path.steps.size()) != 0) return std::nullopt;
  Digest acc = leaf;
  for (std::size_t level = 0; level < path.steps.size(); ++level) {
    const auto& step = path.steps[level];
    if (step.sibling.size() != width) return std::nullopt;
    const bool is_right_child = (path.leaf_index >> level) & 1u;
    if (is_right_child != (step.side == Side::left)) return std::nullopt;
    acc = step.side == Side::right ? hash_node(acc, step.sibling, algo)
                                   : hash_node(step.sibling, acc, algo);
  }
  return acc;
}

inline bool verify_path(const Digest& leaf, const AuthPath& path, const Digest& expected_root,
                        HashAlgorithm algo = kDefaultHash) {
  auto folded = fold_path(leaf, path, algo);
  return folded && *folded == expected_root;
}

}  // namespace nostra
