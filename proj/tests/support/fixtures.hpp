#pragma once

#include <unistd.h>

#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nostra/nostra.hpp"
#include "support/oracle.hpp"

namespace fixtures {

using namespace nostra;

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

inline Digest random_digest(std::mt19937_64& rng, HashAlgorithm algo = kDefaultHash) {
  return Digest::from_bytes(random_bytes(rng, digest_size(algo)));
}

inline std::vector<Document> random_documents(std::mt19937_64& rng, std::size_t count,
                                              std::size_t min_size = 16,
                                              std::size_t max_size = 512) {
  std::uniform_int_distribution<std::size_t> size(min_size, max_size);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < count; ++i)
    docs.push_back({"doc" + std::to_string(i) + ".bin", random_bytes(rng, size(rng))});
  return docs;
}

inline KeyPair seeded_key(std::mt19937_64& rng, HashAlgorithm algo = kDefaultHash) {
  Bytes seed = random_bytes(rng, kSeedSize);
  return keygen(ByteView(seed), algo);
}

inline KeyPair fixed_key(std::uint8_t fill, HashAlgorithm algo = kDefaultHash) {
  Bytes seed(kSeedSize, fill);
  return keygen(ByteView(seed), algo);
}

/// In-memory locator -> key map.
class MapResolver {
 public:
  void add(const std::string& locator, const PublicKey& pk) { keys_[locator] = pk; }
  void erase(const std::string& locator) { keys_.erase(locator); }

  KeyResolver resolver() const {
    return [this](std::string_view loc) -> std::optional<PublicKey> {
      auto it = keys_.find(std::string(loc));
      if (it == keys_.end()) return std::nullopt;
      return it->second;
    };
  }

 private:
  std::map<std::string, PublicKey> keys_;
};

inline std::vector<Certifier> random_orgs(std::mt19937_64& rng, std::size_t count,
                                          MapResolver& resolver,
                                          HashAlgorithm algo = kDefaultHash) {
  std::vector<Certifier> orgs;
  for (std::size_t i = 0; i < count; ++i) {
    KeyPair kp = seeded_key(rng, algo);
    std::string loc = kp.key_id.hex();
    resolver.add(loc, kp.public_key);
    orgs.push_back({std::move(kp), std::move(loc)});
  }
  return orgs;
}

inline oracle::Bytes to_oracle(ByteView b) { return oracle::Bytes(b.begin(), b.end()); }

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("nostra-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline Ledger::Clock counter_clock(std::int64_t start = 1'700'000'000) {
  auto t = std::make_shared<std::int64_t>(start);
  return [t] { return (*t)++; };
}

}  // namespace fixtures
