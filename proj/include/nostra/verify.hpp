#pragma once

// Third-party verification from document bytes, a stamp and a ledger
// snapshot. Checks run cheapest-first and the first failure decides the
// cause, so a given fault always yields the same cause.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nostra/certchain.hpp"
#include "nostra/ledger.hpp"
#include "nostra/merkle.hpp"
#include "nostra/nostrify.hpp"

namespace nostra {

enum class Cause : std::uint8_t {
  ok,
  tx_not_found,
  doc_hash_mismatch,
  hash_not_in_set,
  path_mismatch,
  root_mismatch,
  bad_issuer_signature,
  bad_chain_layer,
  missing_pubkey,
};

inline std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::ok: return "ok";
    case Cause::tx_not_found: return "tx_not_found";
    case Cause::doc_hash_mismatch: return "doc_hash_mismatch";
    case Cause::hash_not_in_set: return "hash_not_in_set";
    case Cause::path_mismatch: return "path_mismatch";
    case Cause::root_mismatch: return "root_mismatch";
    case Cause::bad_issuer_signature: return "bad_issuer_signature";
    case Cause::bad_chain_layer: return "bad_chain_layer";
    case Cause::missing_pubkey: return "missing_pubkey";
  }
  return "unknown";
}

struct Verdict {
  Cause cause = Cause::ok;
  std::size_t layer = 0;  // 1-based CertChain layer for bad_chain_layer / missing_pubkey

  bool accepted() const { return cause == Cause::ok; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline Json to_json(const Verdict& v) {
  Json j{{"cause", to_string(v.cause)}, {"result", v.accepted() ? "accept" : "reject"}};
  if (v.cause == Cause::bad_chain_layer || v.cause == Cause::missing_pubkey) j["layer"] = v.layer;
  return j;
}

namespace detail {

/// The issuer's signature over the canonical payload, with the verifying
/// key taken from the block and bound to the transaction by issuer_key_id.
inline bool issuer_signature_valid(const Block& block) {
  const Transaction& tx = block.tx;
  if (key_id_of(block.issuer_pubkey, tx.algo) != tx.issuer_key_id) return false;
  if (compute_tx_id(tx) != tx.tx_id) return false;
  return verify_sig(block.issuer_pubkey, as_bytes(canonical_payload(tx)), tx.signature);
}

inline Verdict check_merkle_membership(const Digest& doc_hash, const AuthPath& path,
                                       const Transaction& tx) {
  if (tx.root_kind != RootKind::merkle) return {Cause::path_mismatch};
  if (path.steps.size() != tree_depth(tx.hash_set.size())) return {Cause::path_mismatch};
  if (!verify_path(doc_hash, path, tx.h_root, tx.algo)) return {Cause::path_mismatch};
  if (MerkleTree(tx.hash_set, tx.algo).root() != tx.h_root) return {Cause::root_mismatch};
  return {};
}

}  // namespace detail

/// Order: transaction lookup (and the CASE2 predecessor), document digest,
/// set membership at leaf_index, path fold or certification chain, full
/// root regeneration, issuer signature.
inline Verdict verify_document(ByteView document, const Stamp& stamp, const Ledger& ledger,
                               const KeyResolver& resolve) {
  const Block* block = ledger.find_block(stamp.tx_id);
  if (!block) return {Cause::tx_not_found};
  const Transaction& tx = block->tx;
  if (stamp.prev_tx_id) {
    const Block* prev = ledger.find_block(*stamp.prev_tx_id);
    if (!prev || prev->height >= block->height) return {Cause::tx_not_found};
  }

  const Digest doc_hash = hash_leaf(document, tx.algo);
  if (doc_hash != stamp.doc_hash) return {Cause::doc_hash_mismatch};

  const auto idx = stamp.leaf_index();
  if (idx >= tx.hash_set.size() || tx.hash_set[idx] != doc_hash) return {Cause::hash_not_in_set};

  if (!stamp.well_formed()) return {Cause::path_mismatch};

  if (stamp.case_tag != CaseTag::case3) {
    if (auto v = detail::check_merkle_membership(doc_hash, stamp.auth_path, tx); !v.accepted())
      return v;
  } else {
    const CertChain& chain = *stamp.cert_chain;
    if (tx.root_kind != RootKind::cert_chain || tx.hash_set.size() != 1 ||
        !stamp.auth_path.steps.empty())
      return {Cause::path_mismatch};
    auto check = check_chain(doc_hash, chain, resolve, tx.algo);
    switch (check.status) {
      case ChainCheck::Status::ok: break;
      case ChainCheck::Status::doc_hash_mismatch: return {Cause::doc_hash_mismatch};
      case ChainCheck::Status::missing_pubkey: return {Cause::missing_pubkey, check.layer};
      case ChainCheck::Status::bad_signature: return {Cause::bad_chain_layer, check.layer};
      case ChainCheck::Status::root_mismatch: return {Cause::root_mismatch};
    }
    if (chain.root != tx.h_root) return {Cause::root_mismatch};
    // The anchor must be signed by the last certifying organization.
    auto last = resolve(chain.layers.back().pubkey_location);
    if (!last || *last != block->issuer_pubkey) return {Cause::bad_issuer_signature};
  }

  if (!detail::issuer_signature_valid(*block)) return {Cause::bad_issuer_signature};
  return {};
}

inline Verdict verify_document(std::string_view document, const Stamp& stamp,
                               const Ledger& ledger, const KeyResolver& resolve) {
  return verify_document(as_bytes(document), stamp, ledger, resolve);
}

struct PresentedDocument {
  Bytes bytes;
  Stamp stamp;
};

struct PortfolioVerdict {
  std::vector<Verdict> documents;
  bool overall = false;
};

/// Verifies a holder's documents against the most recent transaction of
/// their portfolio. That transaction is loaded and its signature checked
/// once. A document whose own stamp points at the latest transaction is
/// checked with its own path; an older stamp (e.g. the original issuance)
/// is checked by locating its digest in the latest set.
inline PortfolioVerdict verify_portfolio(std::span<const PresentedDocument> documents,
                                         const Stamp& latest_stamp, const Ledger& ledger) {
  PortfolioVerdict out;
  auto all = [&](Verdict v) {
    out.documents.assign(documents.size(), v);
    out.overall = false;
    return out;
  };

  const Block* block = ledger.find_block(latest_stamp.tx_id);
  if (!block) return all({Cause::tx_not_found});
  const Transaction& tx = block->tx;
  if (tx.root_kind != RootKind::merkle || latest_stamp.case_tag == CaseTag::case3)
    return all({Cause::path_mismatch});
  const MerkleTree tree(tx.hash_set, tx.algo);
  if (tree.root() != tx.h_root) return all({Cause::root_mismatch});
  if (!detail::issuer_signature_valid(*block)) return all({Cause::bad_issuer_signature});

  out.overall = !documents.empty();
  for (const auto& doc : documents) {
    Verdict v;
    const Digest doc_hash = hash_leaf(doc.bytes, tx.algo);
    if (doc_hash != doc.stamp.doc_hash) {
      v = {Cause::doc_hash_mismatch};
    } else if (doc.stamp.tx_id == tx.tx_id) {
      const auto idx = doc.stamp.leaf_index();
      if (idx >= tx.hash_set.size() || tx.hash_set[idx] != doc_hash)
        v = {Cause::hash_not_in_set};
      else
        v = detail::check_merkle_membership(doc_hash, doc.stamp.auth_path, tx);
    } else {
      auto it = std::find(tx.hash_set.begin(), tx.hash_set.end(), doc_hash);
      if (it == tx.hash_set.end()) {
        v = {Cause::hash_not_in_set};
      } else {
        auto path = tree.auth_path(static_cast<std::size_t>(it - tx.hash_set.begin()));
        if (!verify_path(doc_hash, path, tx.h_root, tx.algo)) v = {Cause::path_mismatch};
      }
    }
    out.overall = out.overall && v.accepted();
    out.documents.push_back(v);
  }
  return out;
}

inline Json to_json(const PortfolioVerdict& p) {
  Json docs = Json::array();
  for (const auto& v : p.documents) docs.push_back(to_json(v));
  return Json{{"documents", std::move(docs)}, {"result", p.overall ? "accept" : "reject"}};
}

}  // namespace nostra
