#pragma once

// Single-document certification by an ordered list of organizations.
//
//   r_0 = doc_hash
//   r_i = hash_node(r_{i-1}, H(0x00 || sig_i || 0x1f || pubkey_location_i))
//   sig_i = sign(org_i, r_{i-1})
//
// The running hash sits on the left of every layer, the signature node on
// the right. The locator is hashed into the layer so it cannot be swapped
// after certification.

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nostra/crypto.hpp"

namespace nostra {

struct CertLayer {
  Signature signature;
  std::string pubkey_location;

  friend bool operator==(const CertLayer&, const CertLayer&) = default;
};

struct CertChain {
  Digest doc_hash;
  std::vector<CertLayer> layers;
  Digest root;

  friend bool operator==(const CertChain&, const CertChain&) = default;
};

/// An organization taking part in certification: its key and the locator a
/// verifier uses to find the matching public key.
struct Certifier {
  KeyPair key;
  std::string pubkey_location;
};

/// Maps a public-key locator to a verifying key, or nullopt when unknown.
using KeyResolver = std::function<std::optional<PublicKey>(std::string_view)>;

inline constexpr std::uint8_t kLocatorSeparator = 0x1f;

inline Digest layer_node(const CertLayer& layer, HashAlgorithm algo = kDefaultHash) {
  const std::uint8_t sep = kLocatorSeparator;
  return hash_prefixed(algo, prefix::kLeaf,
                       {layer.signature.bytes, ByteView(&sep, 1),
                        as_bytes(layer.pubkey_location)});
}

inline CertChain certify(const Digest& doc_hash, std::span<const Certifier> orgs,
                         HashAlgorithm algo = kDefaultHash) {
  if (orgs.empty()) throw std::invalid_argument("certification needs at least one organization");
  if (doc_hash.size() != digest_size(algo))
    throw std::invalid_argument("document digest length does not match algorithm");
  CertChain chain;
  chain.doc_hash = doc_hash;
  Digest running = doc_hash;
  for (const auto& org : orgs) {
    CertLayer layer{sign(org.key.secret, running.bytes()), org.pubkey_location};
    running = hash_node(running, layer_node(layer, algo), algo);
    chain.layers.push_back(std::move(layer));
  }
  chain.root = running;
  return chain;
}

struct ChainCheck {
  enum class Status { ok, doc_hash_mismatch, missing_pubkey, bad_signature, root_mismatch };

  Status status = Status::ok;
  std::size_t layer = 0;  // 1-based; set for missing_pubkey and bad_signature

  bool ok() const { return status == Status::ok; }
};

/// Recomputes the chain from the document. Layers are checked in
/// certification order and the first failing layer is reported.
inline ChainCheck check_chain(const Digest& doc_hash, const CertChain& chain,
                              const KeyResolver& resolve, HashAlgorithm algo = kDefaultHash) {
  using S = ChainCheck::Status;
  if (doc_hash != chain.doc_hash) return {S::doc_hash_mismatch, 0};
  if (chain.layers.empty()) return {S::root_mismatch, 0};
  Digest running = chain.doc_hash;
  for (std::size_t i = 0; i < chain.layers.size(); ++i) {
    const auto& layer = chain.layers[i];
    auto pk = resolve ? resolve(layer.pubkey_location) : std::nullopt;
    if (!pk) return {S::missing_pubkey, i + 1};
    if (!verify_sig(*pk, running.bytes(), layer.signature)) return {S::bad_signature, i + 1};
    running = hash_node(running, layer_node(layer, algo), algo);
  }
  if (running != chain.root) return {S::root_mismatch, 0};
  return {};
}

inline ChainCheck verify_chain(ByteView document, const CertChain& chain,
                               const KeyResolver& resolve, HashAlgorithm algo = kDefaultHash) {
  return check_chain(hash_leaf(document, algo), chain, resolve, algo);
}

}  // namespace nostra
