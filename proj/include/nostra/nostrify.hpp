#pragma once

// Issuer-side workflows. Each call anchors exactly one transaction and
// returns one stamp per document.
//
//   issue_batch      one issuer, many documents, Merkle root anchored
//   issue_chained    a later issuer extends a holder's portfolio: new
//                    document digests first, then the prior ones
//   issue_certified  one document, ordered organizations, CertChain root
//                    anchored and signed by the last organization

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nostra/certchain.hpp"
#include "nostra/ledger.hpp"
#include "nostra/merkle.hpp"

namespace nostra {

enum class CaseTag : std::uint8_t { case1, case2, case3 };

inline std::string_view to_string(CaseTag c) {
  switch (c) {
    case CaseTag::case1: return "CASE1";
    case CaseTag::case2: return "CASE2";
    case CaseTag::case3: return "CASE3";
  }
  return "unknown";
}

inline CaseTag parse_case_tag(std::string_view s) {
  if (s == "CASE1") return CaseTag::case1;
  if (s == "CASE2") return CaseTag::case2;
  if (s == "CASE3") return CaseTag::case3;
  throw std::invalid_argument("unknown case tag: " + std::string(s));
}

struct Stamp {
  Digest tx_id;
  Digest doc_hash;
  AuthPath auth_path;  // carries leaf_index
  CaseTag case_tag = CaseTag::case1;
  std::optional<CertChain> cert_chain;  // CASE3 only
  std::optional<Digest> prev_tx_id;     // CASE2 only

  std::uint64_t leaf_index() const { return auth_path.leaf_index; }

  /// cert_chain iff CASE3, prev_tx_id iff CASE2.
  bool well_formed() const {
    return cert_chain.has_value() == (case_tag == CaseTag::case3) &&
           prev_tx_id.has_value() == (case_tag == CaseTag::case2);
  }

  friend bool operator==(const Stamp&, const Stamp&) = default;
};

struct Document {
  std::string name;
  Bytes bytes;
};

using NamedStamp = std::pair<std::string, Stamp>;

struct IssuanceReceipt {
  Digest tx_id;
  std::vector<NamedStamp> stamps;
};

class IssueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Stamp files

inline Json to_json(const CertChain& chain) {
  Json layers = Json::array();
  for (const auto& l : chain.layers)
    layers.push_back(Json{{"pubkey_location", l.pubkey_location}, {"sig", l.signature.hex()}});
  return Json{{"doc_hash", chain.doc_hash.hex()}, {"layers", std::move(layers)},
              {"root", chain.root.hex()}};
}

inline CertChain cert_chain_from_json(const Json& j) {
  CertChain chain;
  chain.doc_hash = detail::digest_field(j, "doc_hash");
  chain.root = detail::digest_field(j, "root");
  const Json& layers = detail::field(j, "layers");
  if (!layers.is_array()) throw std::invalid_argument("layers must be an array");
  for (const auto& l : layers) {
    chain.layers.push_back(CertLayer{detail::signature_field(l, "sig"),
                                     detail::string_field(l, "pubkey_location")});
  }
  return chain;
}

inline Json to_json(const Stamp& s) {
  Json steps = Json::array();
  for (const auto& step : s.auth_path.steps)
    steps.push_back(Json{{"side", step.side == Side::left ? "L" : "R"},
                         {"sibling", step.sibling.hex()}});
  Json j{{"auth_path", std::move(steps)},
         {"case_tag", to_string(s.case_tag)},
         {"doc_hash", s.doc_hash.hex()},
         {"leaf_index", s.auth_path.leaf_index},
         {"tx_id", s.tx_id.hex()}};
  if (s.cert_chain) j["cert_chain"] = to_json(*s.cert_chain);
  if (s.prev_tx_id) j["prev_tx_id"] = s.prev_tx_id->hex();
  return j;
}

inline Stamp stamp_from_json(const Json& j) {
  Stamp s;
  s.tx_id = detail::digest_field(j, "tx_id");
  s.doc_hash = detail::digest_field(j, "doc_hash");
  s.case_tag = parse_case_tag(detail::string_field(j, "case_tag"));
  s.auth_path.leaf_index = detail::uint_field(j, "leaf_index");
  const Json& steps = detail::field(j, "auth_path");
  if (!steps.is_array()) throw std::invalid_argument("auth_path must be an array");
  for (const auto& step : steps) {
    const std::string side = detail::string_field(step, "side");
    if (side != "L" && side != "R") throw std::invalid_argument("side must be \"L\" or \"R\"");
    s.auth_path.steps.push_back(
        {detail::digest_field(step, "sibling"), side == "L" ? Side::left : Side::right});
  }
  if (j.contains("cert_chain")) s.cert_chain = cert_chain_from_json(j.at("cert_chain"));
  if (j.contains("prev_tx_id")) s.prev_tx_id = detail::digest_field(j, "prev_tx_id");
  if (!s.well_formed())
    throw std::invalid_argument("stamp optional fields do not match case_tag");
  return s;
}

inline std::string serialize_stamp(const Stamp& s) { return canonical_dump(to_json(s)); }

inline Stamp parse_stamp(std::string_view text) { return stamp_from_json(Json::parse(text)); }

inline std::string stamp_file_name(std::string_view document_file_name) {
  return std::string(document_file_name) + ".stamp.json";
}

// ---------------------------------------------------------------------------
// Issuance

namespace detail {

inline IssuanceReceipt anchor_merkle(const KeyPair& issuer, std::vector<Digest> hash_set,
                                     const std::vector<std::string>& names, CaseTag tag,
                                     const std::optional<Digest>& prev_tx_id, Ledger& ledger,
                                     HashAlgorithm algo) {
  MerkleTree tree(hash_set, algo);
  Transaction tx = make_transaction(issuer, std::move(hash_set), tree.root(), RootKind::merkle,
                                    ledger.now(), algo);
  IssuanceReceipt receipt;
  receipt.tx_id = ledger.append_tx(tx, issuer.public_key);
  receipt.stamps.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    Stamp s;
    s.tx_id = receipt.tx_id;
    s.doc_hash = tree.leaves()[i];
    s.auth_path = tree.auth_path(i);
    s.case_tag = tag;
    s.prev_tx_id = prev_tx_id;
    receipt.stamps.emplace_back(names[i], std::move(s));
  }
  return receipt;
}

}  // namespace detail

inline IssuanceReceipt issue_batch(const KeyPair& issuer, std::span<const Document> documents,
                                   Ledger& ledger, HashAlgorithm algo = kDefaultHash) {
  if (documents.empty()) throw IssueError("issue_batch: no documents");
  std::vector<Digest> hashes;
  std::vector<std::string> names;
  for (const auto& d : documents) {
    hashes.push_back(hash_leaf(d.bytes, algo));
    names.push_back(d.name);
  }
  return detail::anchor_merkle(issuer, std::move(hashes), names, CaseTag::case1, std::nullopt,
                               ledger, algo);
}

/// Prior stamps must point at transactions already on the ledger and their
/// doc_hash must sit at leaf_index of that transaction's set. Every
/// document, new and prior, receives a fresh CASE2 stamp against the new
/// transaction. With no priors this is issue_batch.
inline IssuanceReceipt issue_chained(const KeyPair& issuer,
                                     std::span<const Document> new_documents,
                                     std::span<const NamedStamp> prior_stamps, Ledger& ledger,
                                     HashAlgorithm algo = kDefaultHash) {
  if (new_documents.empty()) throw IssueError("issue_chained: no new documents");
  if (prior_stamps.empty()) return issue_batch(issuer, new_documents, ledger, algo);

  std::vector<Digest> hashes;
  std::vector<std::string> names;
  for (const auto& d : new_documents) {
    hashes.push_back(hash_leaf(d.bytes, algo));
    names.push_back(d.name);
  }

  const Block* latest = nullptr;
  std::unordered_set<Digest, DigestHash> seen_priors;
  for (const auto& [name, stamp] : prior_stamps) {
    const Block* block = ledger.find_block(stamp.tx_id);
    if (!block) throw IssueError("prior stamp for '" + name + "' references unknown tx " +
                                 stamp.tx_id.hex());
    const auto& set = block->tx.hash_set;
    if (stamp.leaf_index() >= set.size() || set[stamp.leaf_index()] != stamp.doc_hash)
      throw IssueError("prior stamp for '" + name + "': doc_hash is not in tx " +
                       stamp.tx_id.hex() + " at leaf " + std::to_string(stamp.leaf_index()));
    if (stamp.doc_hash.size() != digest_size(algo))
      throw IssueError("prior stamp for '" + name + "' uses a different hash algorithm");
    if (!latest || block->height > latest->height) latest = block;
    // The same prior document presented twice gets one leaf.
    if (!seen_priors.insert(stamp.doc_hash).second) continue;
    hashes.push_back(stamp.doc_hash);
    names.push_back(name);
  }
  const Digest prev = latest->tx.tx_id;
  return detail::anchor_merkle(issuer, std::move(hashes), names, CaseTag::case2, prev, ledger,
                               algo);
}

inline IssuanceReceipt issue_certified(const Document& document, std::span<const Certifier> orgs,
                                       Ledger& ledger, HashAlgorithm algo = kDefaultHash) {
  if (orgs.empty()) throw IssueError("issue_certified: no organizations");
  const Digest doc_hash = hash_leaf(document.bytes, algo);
  CertChain chain = certify(doc_hash, orgs, algo);
  const KeyPair& last = orgs.back().key;
  Transaction tx = make_transaction(last, {doc_hash}, chain.root, RootKind::cert_chain,
                                    ledger.now(), algo);
  IssuanceReceipt receipt;
  receipt.tx_id = ledger.append_tx(tx, last.public_key);
  Stamp s;
  s.tx_id = receipt.tx_id;
  s.doc_hash = doc_hash;
  s.auth_path.leaf_index = 0;
  s.case_tag = CaseTag::case3;
  s.cert_chain = std::move(chain);
  receipt.stamps.emplace_back(document.name, std::move(s));
  return receipt;
}

}  // namespace nostra
