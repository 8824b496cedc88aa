#pragma once

// Append-only, hash-chained ledger of nostrification transactions.
//
// Single writer. One transaction per block. Persisted as newline-delimited
// canonical JSON (sorted keys, no whitespace, lowercase hex, integer
// timestamps); the file is the source of truth and the tx index is rebuilt
// on load. A const Ledger may be queried and audited from any number of
// threads; append_tx must not run concurrently with anything else.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nostra/crypto.hpp"
#include "nostra/merkle.hpp"

namespace nostra {

using Json = nlohmann::json;

/// Compact, key-sorted, UTF-8. nlohmann::json objects are std::map backed, so
/// dump() already orders keys; this only pins the remaining knobs.
inline std::string canonical_dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

/// How h_root relates to hash_set. Batch issuance commits to the Merkle root
/// of the set; certification commits to a CertChain root over the single
/// document digest in the set.
enum class RootKind : std::uint8_t { merkle, cert_chain };

inline std::string_view to_string(RootKind k) {
  return k == RootKind::merkle ? "merkle" : "cert_chain";
}

inline RootKind parse_root_kind(std::string_view s) {
  if (s == "merkle") return RootKind::merkle;
  if (s == "cert_chain") return RootKind::cert_chain;
  throw std::invalid_argument("unknown root kind: " + std::string(s));
}

struct Transaction {
  Digest tx_id;
  Digest issuer_key_id;
  Digest h_root;
  std::vector<Digest> hash_set;
  HashAlgorithm algo = kDefaultHash;
  RootKind root_kind = RootKind::merkle;
  Signature signature;
  std::int64_t created_at = 0;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

inline Json payload_json(const Transaction& tx) {
  Json set = Json::array();
  for (const auto& h : tx.hash_set) set.push_back(h.hex());
  return Json{{"algo", to_string(tx.algo)},
              {"created_at", tx.created_at},
              {"h_root", tx.h_root.hex()},
              {"hash_set", std::move(set)},
              {"issuer_key_id", tx.issuer_key_id.hex()},
              {"root_kind", to_string(tx.root_kind)}};
}

/// The bytes that are hashed into tx_id and signed by the issuer: every
/// field except tx_id and signature.
inline std::string canonical_payload(const Transaction& tx) {
  return canonical_dump(payload_json(tx));
}

inline Digest compute_tx_id(const Transaction& tx) {
  return hash_prefixed(tx.algo, prefix::kTransaction, {as_bytes(canonical_payload(tx))});
}

inline Transaction make_transaction(const KeyPair& issuer, std::vector<Digest> hash_set,
                                    const Digest& h_root, RootKind kind,
                                    std::int64_t created_at,
                                    HashAlgorithm algo = kDefaultHash) {
  Transaction tx;
  tx.issuer_key_id = key_id_of(issuer.public_key, algo);
  tx.h_root = h_root;
  tx.hash_set = std::move(hash_set);
  tx.algo = algo;
  tx.root_kind = kind;
  tx.created_at = created_at;
  const std::string payload = canonical_payload(tx);
  tx.tx_id = hash_prefixed(algo, prefix::kTransaction, {as_bytes(payload)});
  tx.signature = sign(issuer.secret, as_bytes(payload));
  return tx;
}

class LedgerError : public std::runtime_error {
 public:
  enum class Code {
    bad_signature,
    key_mismatch,
    tx_id_mismatch,
    root_mismatch,
    duplicate_tx,
    malformed,
    io,
  };

  LedgerError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

namespace detail {

// Checks everything about a transaction that does not depend on its
// position in the chain. No code means valid.
inline std::pair<std::optional<LedgerError::Code>, std::string> check_transaction(
    const Transaction& tx, const PublicKey& issuer_pubkey) {
  using C = LedgerError::Code;
  const std::size_t width = digest_size(tx.algo);
  if (tx.hash_set.empty()) return {C::root_mismatch, "empty hash set"};
  if (tx.h_root.size() != width || tx.tx_id.size() != width ||
      tx.issuer_key_id.size() != width)
    return {C::malformed, "digest length does not match " + std::string(to_string(tx.algo))};
  for (const auto& h : tx.hash_set)
    if (h.size() != width) return {C::malformed, "hash set entry has wrong length"};
  if (compute_tx_id(tx) != tx.tx_id) return {C::tx_id_mismatch, "tx_id does not match payload"};
  if (key_id_of(issuer_pubkey, tx.algo) != tx.issuer_key_id)
    return {C::key_mismatch, "issuer public key does not match issuer_key_id"};
  if (!verify_sig(issuer_pubkey, as_bytes(canonical_payload(tx)), tx.signature))
    return {C::bad_signature, "issuer signature does not verify"};
  switch (tx.root_kind) {
    case RootKind::merkle:
      if (MerkleTree(tx.hash_set, tx.algo).root() != tx.h_root)
        return {C::root_mismatch, "h_root is not the Merkle root of hash_set"};
      break;
    case RootKind::cert_chain:
      if (tx.hash_set.size() != 1)
        return {C::root_mismatch, "certification transaction must carry one digest"};
      break;
  }
  return {std::nullopt, {}};
}

inline void put_be64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<std::uint8_t>(v & 0xff);
    v >>= 8;
  }
}

}  // namespace detail

// Block hashes are always SHA2-256, independent of per-transaction algorithms.
inline constexpr HashAlgorithm kBlockHash = HashAlgorithm::sha2_256;

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash;
  std::int64_t timestamp = 0;
  Transaction tx;
  PublicKey issuer_pubkey;
  Digest block_hash;

  friend bool operator==(const Block&, const Block&) = default;
};

/// H(0x03 || be64 height || prev_hash || be64 timestamp || tx_id).
inline Digest compute_block_hash(const Block& b) {
  std::uint8_t height[8];
  std::uint8_t ts[8];
  detail::put_be64(height, b.height);
  detail::put_be64(ts, static_cast<std::uint64_t>(b.timestamp));
  return hash_prefixed(kBlockHash, prefix::kBlock,
                       {ByteView(height), b.prev_hash.bytes(), ByteView(ts), b.tx.tx_id.bytes()});
}

inline Json to_json(const Transaction& tx) {
  Json j = payload_json(tx);
  j["signature"] = tx.signature.hex();
  j["tx_id"] = tx.tx_id.hex();
  return j;
}

inline Json to_json(const Block& b) {
  return Json{{"block_hash", b.block_hash.hex()},
              {"height", b.height},
              {"issuer_pubkey", b.issuer_pubkey.hex()},
              {"prev_hash", b.prev_hash.hex()},
              {"timestamp", b.timestamp},
              {"tx", to_json(b.tx)}};
}

namespace detail {

inline const Json& field(const Json& obj, const char* name) {
  if (!obj.is_object()) throw std::invalid_argument("expected JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw std::invalid_argument(std::string("missing field: ") + name);
  return *it;
}

inline std::string string_field(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_string()) throw std::invalid_argument(std::string("field must be a string: ") + name);
  return v.get<std::string>();
}

inline Digest digest_field(const Json& obj, const char* name) {
  auto d = Digest::parse_hex(string_field(obj, name));
  if (!d) throw std::invalid_argument(std::string("malformed digest in field: ") + name);
  return *d;
}

inline std::int64_t int_field(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string("field must be an integer: ") + name);
  return v.get<std::int64_t>();
}

inline std::uint64_t uint_field(const Json& obj, const char* name) {
  const Json& v = field(obj, name);
  if (!v.is_number_unsigned()) throw std::invalid_argument(std::string("field must be a non-negative integer: ") + name);
  return v.get<std::uint64_t>();
}

inline Signature signature_field(const Json& obj, const char* name) {
  auto raw = from_hex(string_field(obj, name));
  if (!raw) throw std::invalid_argument(std::string("malformed hex in field: ") + name);
  return Signature{std::move(*raw)};
}

}  // namespace detail

inline Transaction transaction_from_json(const Json& j) {
  Transaction tx;
  tx.algo = parse_hash_algorithm(detail::string_field(j, "algo"));
  tx.created_at = detail::int_field(j, "created_at");
  tx.h_root = detail::digest_field(j, "h_root");
  const Json& set = detail::field(j, "hash_set");
  if (!set.is_array()) throw std::invalid_argument("hash_set must be an array");
  for (const auto& h : set) {
    if (!h.is_string()) throw std::invalid_argument("hash_set entries must be strings");
    auto d = Digest::parse_hex(h.get<std::string>());
    if (!d) throw std::invalid_argument("malformed digest in hash_set");
    tx.hash_set.push_back(*d);
  }
  tx.issuer_key_id = detail::digest_field(j, "issuer_key_id");
  tx.root_kind = parse_root_kind(detail::string_field(j, "root_kind"));
  tx.signature = detail::signature_field(j, "signature");
  tx.tx_id = detail::digest_field(j, "tx_id");
  return tx;
}

inline Block block_from_json(const Json& j) {
  Block b;
  b.block_hash = detail::digest_field(j, "block_hash");
  b.height = detail::uint_field(j, "height");
  auto pk = PublicKey::parse_hex(detail::string_field(j, "issuer_pubkey"));
  if (!pk) throw std::invalid_argument("malformed issuer_pubkey");
  b.issuer_pubkey = *pk;
  b.prev_hash = detail::digest_field(j, "prev_hash");
  b.timestamp = detail::int_field(j, "timestamp");
  b.tx = transaction_from_json(detail::field(j, "tx"));
  return b;
}

inline std::string serialize_block(const Block& b) { return canonical_dump(to_json(b)); }

struct AuditReport {
  std::optional<std::uint64_t> corrupt_height;
  std::string reason;

  bool ok() const { return !corrupt_height.has_value(); }
};

/// Rechecks linkage, block hashes, timestamps and every transaction.
/// Reports the lowest height at which something is wrong.
inline AuditReport audit_blocks(std::span<const Block> blocks) {
  std::unordered_set<Digest, DigestHash> seen;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    auto corrupt = [&](std::string why) { return AuditReport{i, std::move(why)}; };
    if (b.height != i) return corrupt("height discontinuity");
    const Digest expected_prev = i == 0 ? Digest::zero(kBlockHash) : blocks[i - 1].block_hash;
    if (b.prev_hash != expected_prev) return corrupt("prev_hash does not link to parent");
    if (i > 0 && b.timestamp < blocks[i - 1].timestamp) return corrupt("timestamp decreases");
    if (compute_block_hash(b) != b.block_hash) return corrupt("block_hash mismatch");
    auto [code, why] = detail::check_transaction(b.tx, b.issuer_pubkey);
    if (code) return corrupt("transaction: " + why);
    if (!seen.insert(b.tx.tx_id).second) return corrupt("duplicate tx_id");
  }
  return {};
}

class Ledger {
 public:
  using Clock = std::function<std::int64_t()>;

  static std::int64_t system_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  explicit Ledger(Clock clock = &Ledger::system_now) : clock_(std::move(clock)) {}

  /// Wraps already-decoded blocks without validating them; call audit().
  static Ledger from_blocks(std::vector<Block> blocks, Clock clock = &Ledger::system_now) {
    Ledger l(std::move(clock));
    l.blocks_ = std::move(blocks);
    l.rebuild_index();
    return l;
  }

  /// Loads `path` if it exists and persists every later append to it.
  /// Structural decoding errors throw; semantic corruption is left for
  /// audit().
  static Ledger open(const std::filesystem::path& path, Clock clock = &Ledger::system_now) {
    Ledger l(std::move(clock));
    if (std::filesystem::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw LedgerError(LedgerError::Code::io, "cannot read ledger " + path.string());
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        try {
          l.blocks_.push_back(block_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
          throw LedgerError(LedgerError::Code::malformed,
                            path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
      }
      l.rebuild_index();
    }
    l.path_ = path;
    return l;
  }

  /// Validates `tx` and appends it in a new block. The block is written to
  /// the backing file (if any) before it becomes visible in memory.
  Digest append_tx(const Transaction& tx, const PublicKey& issuer_pubkey) {
    auto [code, why] = detail::check_transaction(tx, issuer_pubkey);
    if (code) throw LedgerError(*code, why);
    if (index_.contains(tx.tx_id))
      throw LedgerError(LedgerError::Code::duplicate_tx, "duplicate tx_id " + tx.tx_id.hex());

    Block b;
    b.height = blocks_.size();
    b.prev_hash = blocks_.empty() ? Digest::zero(kBlockHash) : blocks_.back().block_hash;
    b.timestamp = clock_();
    if (!blocks_.empty() && b.timestamp < blocks_.back().timestamp)
      b.timestamp = blocks_.back().timestamp;
    b.tx = tx;
    b.issuer_pubkey = issuer_pubkey;
    b.block_hash = compute_block_hash(b);

    if (path_) append_line(*path_, serialize_block(b));
    index_.emplace(b.tx.tx_id, blocks_.size());
    blocks_.push_back(std::move(b));
    return tx.tx_id;
  }

  std::optional<Transaction> query(const Digest& tx_id) const {
    const Block* b = find_block(tx_id);
    if (!b) return std::nullopt;
    return b->tx;
  }

  const Block* find_block(const Digest& tx_id) const {
    auto it = index_.find(tx_id);
    return it == index_.end() ? nullptr : &blocks_[it->second];
  }

  AuditReport audit() const { return audit_blocks(blocks_); }

  std::span<const Block> blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  std::int64_t now() const { return clock_(); }
  const std::optional<std::filesystem::path>& path() const { return path_; }

  std::string serialize() const {
    std::string out;
    for (const auto& b : blocks_) {
      out += serialize_block(b);
      out += '\n';
    }
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << serialize();
    if (!out) throw LedgerError(LedgerError::Code::io, "cannot write ledger " + path.string());
  }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < blocks_.size(); ++i) index_.try_emplace(blocks_[i].tx.tx_id, i);
  }

  static void append_line(const std::filesystem::path& path, const std::string& line) {
    const std::string data = line + '\n';
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0)
      throw LedgerError(LedgerError::Code::io,
                        "cannot open ledger " + path.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < data.size()) {
      ssize_t n = ::write(fd, data.data() + done, data.size() - done);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) {
        int err = errno;
        ::close(fd);
        throw LedgerError(LedgerError::Code::io,
                          "cannot append to ledger " + path.string() + ": " + std::strerror(err));
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
      int err = errno;
      ::close(fd);
      throw LedgerError(LedgerError::Code::io, "fsync failed: " + std::string(std::strerror(err)));
    }
    ::close(fd);
  }

  Clock clock_;
  std::vector<Block> blocks_;
  std::unordered_map<Digest, std::size_t, DigestHash> index_;
  std::optional<std::filesystem::path> path_;
};

inline Digest append_tx(Ledger& ledger, const Transaction& tx, const PublicKey& issuer_pubkey) {
  return ledger.append_tx(tx, issuer_pubkey);
}

inline std::optional<Transaction> query(const Ledger& ledger, const Digest& tx_id) {
  return ledger.query(tx_id);
}

inline AuditReport audit(const Ledger& ledger) { return ledger.audit(); }

/// Audits the persisted bytes directly. Every line must decode, re-encode to
/// exactly the same bytes, and then pass audit_blocks. A line that fails to
/// decode is reported at its own height.
inline AuditReport audit_serialized(std::string_view contents) {
  std::vector<Block> blocks;
  std::size_t start = 0;
  std::uint64_t height = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) return {height, "record not newline-terminated"};
    std::string_view line = contents.substr(start, end - start);
    try {
      Block b = block_from_json(Json::parse(line));
      if (serialize_block(b) != line) return {height, "record is not in canonical form"};
      blocks.push_back(std::move(b));
    } catch (const std::exception& e) {
      return {height, std::string("undecodable record: ") + e.what()};
    }
    start = end + 1;
    ++height;
  }
  return audit_blocks(blocks);
}

inline AuditReport audit_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LedgerError(LedgerError::Code::io, "cannot read ledger " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return audit_serialized(ss.str());
}

}  // namespace nostra
