// nostra: issue, verify and inspect anchored document stamps.
//
// Exit codes: 0 success / accept, 1 negative result (reject, corruption,
// not found), 2 usage or operational error.

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nostra/bench.hpp"
#include "nostra/nostra.hpp"

namespace fs = std::filesystem;
using namespace nostra;

namespace {

constexpr int kOk = 0;
constexpr int kNegative = 1;
constexpr int kOperational = 2;

struct CliConfig {
  fs::path ledger_path = "nostra.ledger";
  fs::path keys_dir = "keys";
  std::string algo_name = "sha2-256";
  std::optional<fs::path> output_dir;
  std::optional<std::int64_t> now;
  HashAlgorithm algo = kDefaultHash;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

std::string read_text(const fs::path& path) {
  Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

void emit(const Json& j) { std::cout << canonical_dump(j) << "\n"; }

Ledger::Clock make_clock(const CliConfig& cfg) {
  if (cfg.now) return [t = *cfg.now] { return t; };
  return &Ledger::system_now;
}

// Advisory exclusive lock on <ledger>.lock for the lifetime of the object.
class LedgerLock {
 public:
  explicit LedgerLock(const fs::path& ledger) {
    const fs::path lock_path = ledger.string() + ".lock";
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open lock file " + lock_path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw std::runtime_error("cannot lock " + lock_path.string());
    }
  }
  LedgerLock(const LedgerLock&) = delete;
  LedgerLock& operator=(const LedgerLock&) = delete;
  ~LedgerLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_ = -1;
};

Ledger load_existing_ledger(const CliConfig& cfg) {
  if (!fs::exists(cfg.ledger_path))
    throw std::runtime_error("ledger not found: " + cfg.ledger_path.string());
  return Ledger::open(cfg.ledger_path, make_clock(cfg));
}

// ---------------------------------------------------------------------------

int cmd_keygen(const CliConfig& cfg, const std::string& name, const std::string& seed_hex,
               bool force) {
  std::optional<Bytes> seed;
  if (!seed_hex.empty()) {
    seed = from_hex(seed_hex);
    if (!seed) throw UsageError("--seed must be lowercase hex");
    if (seed->size() != kSeedSize)
      throw UsageError("--seed must be " + std::to_string(kSeedSize) + " octets");
  }
  KeyPair kp = seed ? keygen(ByteView(*seed), cfg.algo) : keygen(std::nullopt, cfg.algo);
  fs::create_directories(cfg.keys_dir);
  write_key_files(cfg.keys_dir, name, kp, force);
  emit({{"key_id", kp.key_id.hex()}, {"name", name}, {"public_key", kp.public_key.hex()}});
  return kOk;
}

struct IssueArgs {
  int case_number = 0;
  std::string issuer;
  std::vector<std::string> orgs;
  std::vector<fs::path> priors;
  std::vector<fs::path> documents;
  bool force = false;
};

fs::path stamp_path_for(const CliConfig& cfg, const fs::path& document_or_name,
                        const fs::path& default_dir) {
  const fs::path dir = cfg.output_dir ? *cfg.output_dir : default_dir;
  return dir / stamp_file_name(document_or_name.filename().string());
}

int cmd_issue(const CliConfig& cfg, const IssueArgs& args) {
  if (args.documents.empty()) throw UsageError("issue: at least one document is required");
  switch (args.case_number) {
    case 1:
      if (args.issuer.empty()) throw UsageError("issue --case 1 requires --issuer");
      if (!args.priors.empty()) throw UsageError("issue --case 1 does not take --prior");
      break;
    case 2:
      if (args.issuer.empty()) throw UsageError("issue --case 2 requires --issuer");
      if (args.priors.empty()) throw UsageError("issue --case 2 requires at least one --prior stamp");
      break;
    case 3:
      if (args.orgs.empty()) throw UsageError("issue --case 3 requires --orgs");
      if (args.documents.size() != 1) throw UsageError("issue --case 3 takes exactly one document");
      break;
    default:
      throw UsageError("--case must be 1, 2 or 3");
  }

  std::vector<Document> docs;
  std::vector<fs::path> targets;
  for (const auto& p : args.documents) {
    docs.push_back({p.filename().string(), read_file(p)});
    targets.push_back(stamp_path_for(cfg, p, p.parent_path()));
  }
  std::vector<NamedStamp> priors;
  for (const auto& p : args.priors) {
    std::string name = p.filename().string();
    const std::string suffix = ".stamp.json";
    if (name.size() > suffix.size() && name.ends_with(suffix))
      name.resize(name.size() - suffix.size());
    Stamp s;
    try {
      s = parse_stamp(read_text(p));
    } catch (const std::exception& e) {
      throw std::runtime_error("cannot parse prior stamp " + p.string() + ": " + e.what());
    }
    priors.emplace_back(name, std::move(s));
    targets.push_back(stamp_path_for(cfg, name, p.parent_path()));
  }
  if (!args.force) {
    for (const auto& t : targets)
      if (fs::exists(t)) throw std::runtime_error("refusing to overwrite " + t.string() + " (use --force)");
  }

  LedgerLock lock(cfg.ledger_path);
  Ledger ledger = Ledger::open(cfg.ledger_path, make_clock(cfg));
  IssuanceReceipt receipt;
  if (args.case_number == 1) {
    receipt = issue_batch(load_keypair(cfg.keys_dir, args.issuer, cfg.algo), docs, ledger, cfg.algo);
  } else if (args.case_number == 2) {
    receipt = issue_chained(load_keypair(cfg.keys_dir, args.issuer, cfg.algo), docs, priors,
                            ledger, cfg.algo);
  } else {
    std::vector<Certifier> orgs;
    for (const auto& name : args.orgs) {
      KeyPair kp = load_keypair(cfg.keys_dir, name, cfg.algo);
      std::string loc = kp.key_id.hex();
      orgs.push_back({std::move(kp), std::move(loc)});
    }
    receipt = issue_certified(docs.front(), orgs, ledger, cfg.algo);
  }

  // Receipt order matches targets: new documents first, then priors (a
  // prior presented twice is issued once and its duplicate target skipped).
  Json written = Json::array();
  std::size_t t = 0;
  for (const auto& [name, stamp] : receipt.stamps) {
    while (t < targets.size() && targets[t].filename().string() != stamp_file_name(name)) ++t;
    if (t == targets.size()) throw std::runtime_error("internal error: no target for " + name);
    if (!targets[t].parent_path().empty()) fs::create_directories(targets[t].parent_path());
    std::ofstream out(targets[t], std::ios::binary | std::ios::trunc);
    out << serialize_stamp(stamp) << "\n";
    if (!out) throw std::runtime_error("cannot write " + targets[t].string());
    written.push_back(targets[t].string());
    ++t;
  }
  emit({{"stamps", std::move(written)}, {"tx_id", receipt.tx_id.hex()}});
  return kOk;
}

int cmd_verify(const CliConfig& cfg, const fs::path& document, const fs::path& stamp_path) {
  Bytes bytes = read_file(document);
  Stamp stamp;
  try {
    stamp = parse_stamp(read_text(stamp_path));
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot parse stamp " + stamp_path.string() + ": " + e.what());
  }
  Ledger ledger = load_existing_ledger(cfg);
  KeyDirectory keys(cfg.keys_dir);
  Verdict v = verify_document(bytes, stamp, ledger, keys.resolver());
  emit(to_json(v));
  return v.accepted() ? kOk : kNegative;
}

Json block_summary(const Block& b) {
  return Json{{"block_hash", b.block_hash.hex()},
              {"h_root", b.tx.h_root.hex()},
              {"hash_count", b.tx.hash_set.size()},
              {"height", b.height},
              {"issuer_key_id", b.tx.issuer_key_id.hex()},
              {"root_kind", to_string(b.tx.root_kind)},
              {"timestamp", b.timestamp},
              {"tx_id", b.tx.tx_id.hex()}};
}

int cmd_ledger_show(const CliConfig& cfg) {
  Ledger ledger = load_existing_ledger(cfg);
  Json blocks = Json::array();
  for (const auto& b : ledger.blocks()) {
    std::cerr << "#" << b.height << "  " << b.tx.tx_id.hex() << "  " << b.tx.hash_set.size()
              << " digest(s)  t=" << b.timestamp << "\n";
    blocks.push_back(block_summary(b));
  }
  emit({{"blocks", std::move(blocks)}, {"height", ledger.size()}});
  return kOk;
}

int cmd_ledger_audit(const CliConfig& cfg) {
  if (!fs::exists(cfg.ledger_path))
    throw std::runtime_error("ledger not found: " + cfg.ledger_path.string());
  AuditReport r = audit_file(cfg.ledger_path);
  if (r.ok()) {
    std::cerr << "ok\n";
    emit({{"result", "ok"}});
    return kOk;
  }
  std::cerr << "corrupt at height " << *r.corrupt_height << ": " << r.reason << "\n";
  emit({{"corrupt_height", *r.corrupt_height}, {"reason", r.reason}, {"result", "corrupt"}});
  return kNegative;
}

int cmd_ledger_tx(const CliConfig& cfg, const std::string& id) {
  auto tx_id = Digest::parse_hex(id);
  if (!tx_id) throw UsageError("transaction id must be a lowercase hex digest");
  Ledger ledger = load_existing_ledger(cfg);
  auto tx = ledger.query(*tx_id);
  if (!tx) {
    std::cerr << "not-found\n";
    emit({{"result", "not-found"}, {"tx_id", id}});
    return kNegative;
  }
  emit(to_json(*tx));
  return kOk;
}

int cmd_bench(int case_number, std::size_t users, std::size_t docs, std::size_t runs,
              std::size_t orgs) {
  if (case_number != 1 && case_number != 3) throw UsageError("bench --case must be 1 or 3");
  if (runs < 1) throw UsageError("bench --runs must be at least 1");
  BenchConfig bc;
  bc.case_tag = case_number == 1 ? CaseTag::case1 : CaseTag::case3;
  bc.users = users;
  bc.docs = docs;
  bc.runs = runs;
  bc.orgs = orgs;
  emit(to_json(run_bench(bc)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor, stamp and verify documents against an append-only ledger"};
  app.require_subcommand(1);
  app.fallthrough();
  CliConfig cfg;
  std::string ledger_path = cfg.ledger_path.string();
  std::string keys_dir = cfg.keys_dir.string();
  std::string out_dir;
  app.add_option("--ledger", ledger_path, "Ledger file")->envname("NOSTRA_LEDGER");
  app.add_option("--keys", keys_dir, "Key directory")->envname("NOSTRA_KEYS");
  app.add_option("--algo", cfg.algo_name, "Hash algorithm (sha2-256, sha2-512)");
  app.add_option("--out", out_dir, "Directory for stamp files (default: beside each input)");
  app.add_option("--now", cfg.now, "Fixed clock, UTC seconds (default: system time)")
      ->envname("NOSTRA_NOW");

  auto* keygen_cmd = app.add_subcommand("keygen", "Create <name>.key / <name>.pub");
  std::string key_name, seed_hex;
  bool key_force = false;
  keygen_cmd->add_option("name", key_name)->required();
  keygen_cmd->add_option("--seed", seed_hex, "32-octet seed, hex");
  keygen_cmd->add_flag("--force", key_force, "Overwrite existing key files");

  auto* issue_cmd = app.add_subcommand("issue", "Anchor documents and write stamps");
  IssueArgs issue;
  std::vector<std::string> issue_docs, issue_priors;
  issue_cmd->add_option("--case", issue.case_number, "1, 2 or 3")->required();
  issue_cmd->add_option("--issuer", issue.issuer, "Issuer key name (cases 1, 2)");
  issue_cmd->add_option("--orgs", issue.orgs, "Certifying key names in order (case 3)")
      ->delimiter(',');
  issue_cmd->add_option("--prior", issue_priors, "Prior stamp file (case 2), repeatable")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  issue_cmd->add_flag("--force", issue.force, "Overwrite existing stamp files");
  issue_cmd->add_option("documents", issue_docs)->required();

  auto* verify_cmd = app.add_subcommand("verify", "Verify a document against its stamp");
  std::string verify_doc, verify_stamp;
  verify_cmd->add_option("document", verify_doc)->required();
  verify_cmd->add_option("stamp", verify_stamp)->required();

  auto* ledger_cmd = app.add_subcommand("ledger", "Inspect the ledger");
  ledger_cmd->require_subcommand(1);
  auto* show_cmd = ledger_cmd->add_subcommand("show", "List blocks");
  auto* audit_cmd = ledger_cmd->add_subcommand("audit", "Recheck every block and transaction");
  auto* tx_cmd = ledger_cmd->add_subcommand("tx", "Print one transaction");
  std::string tx_id;
  tx_cmd->add_option("id", tx_id)->required();

  auto* bench_cmd = app.add_subcommand("bench", "Time issuance and verification");
  int bench_case = 1;
  std::size_t bench_users = 1, bench_docs = 4, bench_runs = 5, bench_orgs = 3;
  bench_cmd->add_option("--case", bench_case, "1 or 3");
  bench_cmd->add_option("--users", bench_users);
  bench_cmd->add_option("--docs", bench_docs, "Documents per user");
  bench_cmd->add_option("--runs", bench_runs);
  bench_cmd->add_option("--orgs", bench_orgs, "Organizations per document (case 3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kOperational;
  }

  try {
    cfg.ledger_path = ledger_path;
    cfg.keys_dir = keys_dir;
    if (!out_dir.empty()) cfg.output_dir = fs::path(out_dir);
    try {
      cfg.algo = parse_hash_algorithm(cfg.algo_name);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }

    if (*keygen_cmd) return cmd_keygen(cfg, key_name, seed_hex, key_force);
    if (*issue_cmd) {
      for (const auto& d : issue_docs) issue.documents.emplace_back(d);
      for (const auto& p : issue_priors) issue.priors.emplace_back(p);
      return cmd_issue(cfg, issue);
    }
    if (*verify_cmd) return cmd_verify(cfg, verify_doc, verify_stamp);
    if (*show_cmd) return cmd_ledger_show(cfg);
    if (*audit_cmd) return cmd_ledger_audit(cfg);
    if (*tx_cmd) return cmd_ledger_tx(cfg, tx_id);
    if (*bench_cmd) return cmd_bench(bench_case, bench_users, bench_docs, bench_runs, bench_orgs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kOperational;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOperational;
  }
  return kOperational;
}
