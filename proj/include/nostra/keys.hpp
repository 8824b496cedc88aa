#pragma once

// Key files and a directory-backed KeyResolver.
//
// <dir>/<name>.key holds the 32-octet Ed25519 seed, <dir>/<name>.pub the
// public key; both lowercase hex followed by a newline. Locators resolved
// by KeyDirectory are the hex key_id of a public key.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nostra/certchain.hpp"
#include "nostra/crypto.hpp"

namespace nostra {

class KeyFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_trimmed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KeyFileError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text,
                       std::filesystem::perms perms) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw KeyFileError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw KeyFileError("cannot write " + path.string());
  std::error_code ec;
  std::filesystem::permissions(path, perms, ec);
}

}  // namespace detail

inline std::filesystem::path secret_key_path(const std::filesystem::path& dir,
                                             const std::string& name) {
  return dir / (name + ".key");
}

inline std::filesystem::path public_key_path(const std::filesystem::path& dir,
                                             const std::string& name) {
  return dir / (name + ".pub");
}

/// Refuses to replace existing files unless `force` is set.
inline void write_key_files(const std::filesystem::path& dir, const std::string& name,
                            const KeyPair& kp, bool force = false) {
  const auto sk_path = secret_key_path(dir, name);
  const auto pk_path = public_key_path(dir, name);
  if (!force && (std::filesystem::exists(sk_path) || std::filesystem::exists(pk_path)))
    throw KeyFileError("key files for '" + name + "' already exist in " + dir.string());
  using std::filesystem::perms;
  detail::write_text(sk_path, to_hex(kp.secret.seed()) + "\n", perms::owner_read | perms::owner_write);
  detail::write_text(pk_path, kp.public_key.hex() + "\n",
                     perms::owner_read | perms::owner_write | perms::group_read | perms::others_read);
}

inline PublicKey load_public_key(const std::filesystem::path& path) {
  auto pk = PublicKey::parse_hex(detail::read_trimmed(path));
  if (!pk) throw KeyFileError("malformed public key in " + path.string());
  return *pk;
}

inline KeyPair load_keypair(const std::filesystem::path& dir, const std::string& name,
                            HashAlgorithm algo = kDefaultHash) {
  const auto sk_path = secret_key_path(dir, name);
  auto seed = from_hex(detail::read_trimmed(sk_path));
  if (!seed || seed->size() != kSeedSize)
    throw KeyFileError("malformed secret key in " + sk_path.string());
  return keygen(ByteView(*seed), algo);
}

/// Resolves hex key_id locators (any supported algorithm) against the
/// public keys found in a directory at construction time.
class KeyDirectory {
 public:
  explicit KeyDirectory(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) return;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
      if (entry.path().extension() != ".pub") continue;
      try {
        add(load_public_key(entry.path()));
      } catch (const KeyFileError&) {
        // Unreadable or foreign .pub files are not keys we can vouch for.
      }
    }
  }

  void add(const PublicKey& pk) {
    for (auto algo : {HashAlgorithm::sha2_256, HashAlgorithm::sha2_512})
      keys_[key_id_of(pk, algo).hex()] = pk;
  }

  std::optional<PublicKey> resolve(std::string_view locator) const {
    auto it = keys_.find(std::string(locator));
    if (it == keys_.end()) return std::nullopt;
    return it->second;
  }

  KeyResolver resolver() const {
    return [this](std::string_view locator) { return resolve(locator); };
  }

 private:
  std::map<std::string, PublicKey, std::less<>> keys_;
};

}  // namespace nostra
