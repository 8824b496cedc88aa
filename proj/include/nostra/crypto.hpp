#pragma once

// Hash and signature primitives. Digests are SHA-2 (256 default, 512
// optional) with one-byte domain prefixes; signatures are Ed25519.
// Everything here is a pure function and safe to call concurrently.

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nostra/hex.hpp"

namespace nostra {

namespace detail {

inline void ensure_sodium() {
  static const int status = sodium_init();
  if (status < 0) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace detail

enum class HashAlgorithm : std::uint8_t { sha2_256, sha2_512 };

inline constexpr HashAlgorithm kDefaultHash = HashAlgorithm::sha2_256;

inline std::string_view to_string(HashAlgorithm algo) {
  switch (algo) {
    case HashAlgorithm::sha2_256: return "sha2-256";
    case HashAlgorithm::sha2_512: return "sha2-512";
  }
  return "unknown";
}

inline HashAlgorithm parse_hash_algorithm(std::string_view name) {
  if (name == "sha2-256") return HashAlgorithm::sha2_256;
  if (name == "sha2-512") return HashAlgorithm::sha2_512;
  throw std::invalid_argument("unknown hash algorithm: " + std::string(name));
}

inline constexpr std::size_t digest_size(HashAlgorithm algo) {
  return algo == HashAlgorithm::sha2_512 ? 64 : 32;
}

/// Output of one of the supported hash functions. The length is part of the
/// value, so a 32-octet digest never compares equal to a 64-octet one.
class Digest {
 public:
  static constexpr std::size_t kMaxSize = 64;

  Digest() = default;

  static Digest from_bytes(ByteView bytes) {
    if (bytes.size() != 32 && bytes.size() != 64)
      throw std::invalid_argument("digest must be 32 or 64 octets, got " +
                                  std::to_string(bytes.size()));
    Digest d;
    std::copy(bytes.begin(), bytes.end(), d.bytes_.begin());
    d.size_ = static_cast<std::uint8_t>(bytes.size());
    return d;
  }

  static std::optional<Digest> parse_hex(std::string_view hex) {
    auto bytes = from_hex(hex);
    if (!bytes || (bytes->size() != 32 && bytes->size() != 64)) return std::nullopt;
    return from_bytes(*bytes);
  }

  static Digest from_hex_or_throw(std::string_view hex) {
    auto d = parse_hex(hex);
    if (!d) throw std::invalid_argument("malformed digest: " + std::string(hex));
    return *d;
  }

  static Digest zero(HashAlgorithm algo = kDefaultHash) {
    Digest d;
    d.size_ = static_cast<std::uint8_t>(digest_size(algo));
    return d;
  }

  ByteView bytes() const { return {bytes_.data(), size_}; }
  std::uint8_t* mutable_data() { return bytes_.data(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::string hex() const { return to_hex(bytes()); }

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;

 private:
  std::array<std::uint8_t, kMaxSize> bytes_{};
  std::uint8_t size_ = 0;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    auto b = d.bytes();
    std::copy_n(b.begin(), std::min(sizeof h, b.size()),
                reinterpret_cast<std::uint8_t*>(&h));
    return h;
  }
};

namespace prefix {
inline constexpr std::uint8_t kLeaf = 0x00;
inline constexpr std::uint8_t kNode = 0x01;
inline constexpr std::uint8_t kTransaction = 0x02;
inline constexpr std::uint8_t kBlock = 0x03;
}  // namespace prefix

/// H(prefix || parts...) under `algo`.
inline Digest hash_prefixed(HashAlgorithm algo, std::uint8_t domain,
                            std::initializer_list<ByteView> parts) {
  detail::ensure_sodium();
  Digest out = Digest::zero(algo);
  if (algo == HashAlgorithm::sha2_256) {
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, &domain, 1);
    for (ByteView p : parts) crypto_hash_sha256_update(&st, p.data(), p.size());
    crypto_hash_sha256_final(&st, out.mutable_data());
  } else {
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    crypto_hash_sha512_update(&st, &domain, 1);
    for (ByteView p : parts) crypto_hash_sha512_update(&st, p.data(), p.size());
    crypto_hash_sha512_final(&st, out.mutable_data());
  }
  return out;
}

/// Plain H(data), no domain prefix. Used for key identifiers.
inline Digest hash_raw(HashAlgorithm algo, ByteView data) {
  detail::ensure_sodium();
  Digest out = Digest::zero(algo);
  if (algo == HashAlgorithm::sha2_256)
    crypto_hash_sha256(out.mutable_data(), data.data(), data.size());
  else
    crypto_hash_sha512(out.mutable_data(), data.data(), data.size());
  return out;
}

inline Digest hash_leaf(ByteView document, HashAlgorithm algo = kDefaultHash) {
  return hash_prefixed(algo, prefix::kLeaf, {document});
}

inline Digest hash_leaf(std::string_view document, HashAlgorithm algo = kDefaultHash) {
  return hash_leaf(as_bytes(document), algo);
}

/// H(0x01 || left || right). Order matters.
inline Digest hash_node(const Digest& left, const Digest& right,
                        HashAlgorithm algo = kDefaultHash) {
  return hash_prefixed(algo, prefix::kNode, {left.bytes(), right.bytes()});
}

// ---------------------------------------------------------------------------
// Signatures

inline constexpr std::size_t kSeedSize = crypto_sign_SEEDBYTES;
inline constexpr std::size_t kPublicKeySize = crypto_sign_PUBLICKEYBYTES;
inline constexpr std::size_t kSignatureSize = crypto_sign_BYTES;

struct PublicKey {
  std::array<std::uint8_t, kPublicKeySize> bytes{};

  static std::optional<PublicKey> parse_hex(std::string_view hex) {
    auto raw = from_hex(hex);
    if (!raw || raw->size() != kPublicKeySize) return std::nullopt;
    PublicKey pk;
    std::copy(raw->begin(), raw->end(), pk.bytes.begin());
    return pk;
  }
  std::string hex() const { return to_hex(bytes); }

  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

/// Ed25519 signing key. Keeps the 32-octet seed (the persisted form) and the
/// expanded 64-octet key libsodium signs with. Wiped on destruction.
class SecretKey {
 public:
  SecretKey() = default;
  SecretKey(const SecretKey&) = default;
  SecretKey& operator=(const SecretKey&) = default;
  ~SecretKey() { sodium_memzero(expanded_.data(), expanded_.size()); sodium_memzero(seed_.data(), seed_.size()); }

  static SecretKey from_seed(ByteView seed, PublicKey* public_out = nullptr) {
    if (seed.size() != kSeedSize)
      throw std::invalid_argument("seed must be " + std::to_string(kSeedSize) +
                                  " octets, got " + std::to_string(seed.size()));
    detail::ensure_sodium();
    SecretKey sk;
    std::copy(seed.begin(), seed.end(), sk.seed_.begin());
    PublicKey pk;
    crypto_sign_seed_keypair(pk.bytes.data(), sk.expanded_.data(), sk.seed_.data());
    if (public_out) *public_out = pk;
    return sk;
  }

  ByteView seed() const { return seed_; }
  ByteView expanded() const { return expanded_; }

 private:
  std::array<std::uint8_t, kSeedSize> seed_{};
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> expanded_{};
};

struct Signature {
  Bytes bytes;

  std::string hex() const { return to_hex(bytes); }
  friend bool operator==(const Signature&, const Signature&) = default;
};

inline Digest key_id_of(const PublicKey& pk, HashAlgorithm algo = kDefaultHash) {
  return hash_raw(algo, pk.bytes);
}

struct KeyPair {
  SecretKey secret;
  PublicKey public_key;
  Digest key_id;
};

/// Deterministic when a 32-octet seed is supplied, random otherwise.
inline KeyPair keygen(std::optional<ByteView> seed = std::nullopt,
                      HashAlgorithm algo = kDefaultHash) {
  detail::ensure_sodium();
  std::array<std::uint8_t, kSeedSize> fresh{};
  ByteView use;
  if (seed) {
    use = *seed;
  } else {
    randombytes_buf(fresh.data(), fresh.size());
    use = fresh;
  }
  KeyPair kp;
  kp.secret = SecretKey::from_seed(use, &kp.public_key);
  sodium_memzero(fresh.data(), fresh.size());
  kp.key_id = key_id_of(kp.public_key, algo);
  return kp;
}

inline Signature sign(const SecretKey& secret, ByteView message) {
  detail::ensure_sodium();
  Signature sig;
  sig.bytes.resize(kSignatureSize);
  crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                       secret.expanded().data());
  return sig;
}

/// Malformed signatures (wrong length, non-canonical encoding) reject.
inline bool verify_sig(const PublicKey& pk, ByteView message, const Signature& sig) {
  detail::ensure_sodium();
  if (sig.bytes.size() != kSignatureSize) return false;
  return crypto_sign_verify_detached(sig.bytes.data(), message.data(), message.size(),
                                     pk.bytes.data()) == 0;
}

}  // namespace nostra
