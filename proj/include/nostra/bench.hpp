#pragma once

// Timing harness for the issue/verify cycle. Each run uses a fresh
// file-backed ledger in a temporary directory, so add time includes the
// durable append. Keys and document contents are prepared outside the
// timed regions.

#include <sys/resource.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "nostra/keys.hpp"
#include "nostra/nostrify.hpp"
#include "nostra/verify.hpp"

namespace nostra {

struct BenchConfig {
  CaseTag case_tag = CaseTag::case1;
  std::size_t users = 1;
  std::size_t docs = 4;  // per user
  std::size_t runs = 5;
  std::size_t orgs = 3;  // certifying organizations per document, case 3 only
  std::size_t doc_bytes = 64 * 1024;
  std::uint64_t seed = 1;
};

struct BenchReport {
  BenchConfig config;
  std::vector<double> add_seconds;     // per run: issuing the whole configuration
  std::vector<double> verify_seconds;  // per run: mean time to verify one document
  double mean_add_seconds = 0;
  double mean_verify_seconds = 0;
  long max_rss_kb = 0;
  bool all_verified = true;
};

inline BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.runs == 0) throw std::invalid_argument("bench: runs must be at least 1");
  if (cfg.users == 0 || cfg.docs == 0) throw std::invalid_argument("bench: users and docs must be at least 1");
  if (cfg.case_tag == CaseTag::case2) throw std::invalid_argument("bench: case must be 1 or 3");
  if (cfg.case_tag == CaseTag::case3 && cfg.orgs == 0)
    throw std::invalid_argument("bench: case 3 needs at least one organization");

  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(cfg.seed);
  BenchReport report;
  report.config = cfg;

  KeyDirectory keys{std::filesystem::path{}};
  std::vector<Certifier> orgs;
  const std::size_t key_count = cfg.case_tag == CaseTag::case1 ? 1 : cfg.orgs;
  for (std::size_t i = 0; i < key_count; ++i) {
    KeyPair kp = keygen();
    keys.add(kp.public_key);
    std::string loc = kp.key_id.hex();
    orgs.push_back({std::move(kp), std::move(loc)});
  }

  const auto tmp = std::filesystem::temp_directory_path() /
                   ("nostra-bench-" + std::to_string(::getpid()) + "-" +
                    std::to_string(rng()));
  std::filesystem::create_directories(tmp);

  for (std::size_t run = 0; run < cfg.runs; ++run) {
    std::vector<std::vector<Document>> per_user(cfg.users);
    for (auto& docs : per_user) {
      for (std::size_t d = 0; d < cfg.docs; ++d) {
        Document doc{"doc" + std::to_string(d), Bytes(cfg.doc_bytes)};
        for (auto& b : doc.bytes) b = static_cast<std::uint8_t>(rng());
        docs.push_back(std::move(doc));
      }
    }

    const auto ledger_path = tmp / ("run" + std::to_string(run) + ".ledger");
    Ledger ledger = Ledger::open(ledger_path);
    std::vector<std::pair<const Document*, Stamp>> issued;

    auto t0 = clock::now();
    for (const auto& docs : per_user) {
      if (cfg.case_tag == CaseTag::case1) {
        auto receipt = issue_batch(orgs.front().key, docs, ledger);
        for (std::size_t i = 0; i < docs.size(); ++i)
          issued.emplace_back(&docs[i], receipt.stamps[i].second);
      } else {
        for (const auto& doc : docs) {
          auto receipt = issue_certified(doc, orgs, ledger);
          issued.emplace_back(&doc, receipt.stamps.front().second);
        }
      }
    }
    auto t1 = clock::now();
    const auto resolver = keys.resolver();
    for (const auto& [doc, stamp] : issued) {
      if (!verify_document(doc->bytes, stamp, ledger, resolver).accepted())
        report.all_verified = false;
    }
    auto t2 = clock::now();

    report.add_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    report.verify_seconds.push_back(std::chrono::duration<double>(t2 - t1).count() /
                                    static_cast<double>(issued.size()));
  }
  std::error_code ec;
  std::filesystem::remove_all(tmp, ec);

  for (double s : report.add_seconds) report.mean_add_seconds += s;
  for (double s : report.verify_seconds) report.mean_verify_seconds += s;
  report.mean_add_seconds /= static_cast<double>(cfg.runs);
  report.mean_verify_seconds /= static_cast<double>(cfg.runs);

  rusage usage{};
  if (::getrusage(RUSAGE_SELF, &usage) == 0) report.max_rss_kb = usage.ru_maxrss;
  return report;
}

inline Json to_json(const BenchReport& r) {
  return Json{
      {"case", r.config.case_tag == CaseTag::case1 ? 1 : 3},
      {"users", r.config.users},
      {"docs", r.config.docs},
      {"runs", r.config.runs},
      {"orgs", r.config.case_tag == CaseTag::case3 ? r.config.orgs : 0},
      {"doc_bytes", r.config.doc_bytes},
      {"add_seconds", r.add_seconds},
      {"add_seconds_mean", r.mean_add_seconds},
      {"verify_seconds_per_document", r.verify_seconds},
      {"verify_seconds_per_document_mean", r.mean_verify_seconds},
      {"all_verified", r.all_verified},
      // Peak resident set of the whole process; not comparable across platforms.
      {"max_rss_kb_noncomparable", r.max_rss_kb},
  };
}

}  // namespace nostra
