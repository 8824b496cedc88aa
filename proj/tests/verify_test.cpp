#include <gtest/gtest.h>

#include <random>

#include "nostra/verify.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace nostra;
using fixtures::MapResolver;

struct Scenario {
  MapResolver resolver;
  std::vector<Certifier> orgs;
  Ledger ledger{fixtures::counter_clock()};
  std::vector<Document> batch;
  IssuanceReceipt batch_receipt;
  Document certified;
  IssuanceReceipt cert_receipt;
};

std::unique_ptr<Scenario> make_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto s = std::make_unique<Scenario>();
  s->orgs = fixtures::random_orgs(rng, 3, s->resolver);
  s->batch = fixtures::random_documents(rng, 5);
  s->batch_receipt = issue_batch(s->orgs[0].key, s->batch, s->ledger);
  s->certified = {"cert.bin", fixtures::random_bytes(rng, 128)};
  s->cert_receipt = issue_certified(s->certified, s->orgs, s->ledger);
  return s;
}

Ledger with_block(const Ledger& l, std::size_t height, const std::function<void(Block&)>& f) {
  std::vector<Block> blocks(l.blocks().begin(), l.blocks().end());
  f(blocks[height]);
  return Ledger::from_blocks(std::move(blocks));
}

TEST(VerifyDocumentTest, HonestStampsAccept) {
  auto s = make_scenario(71);
  for (std::size_t i = 0; i < s->batch.size(); ++i)
    EXPECT_EQ(verify_document(s->batch[i].bytes, s->batch_receipt.stamps[i].second, s->ledger,
                              s->resolver.resolver()),
              Verdict{});
  EXPECT_TRUE(verify_document(s->certified.bytes, s->cert_receipt.stamps[0].second, s->ledger,
                              s->resolver.resolver())
                  .accepted());
}

// One targeted fault per cause.
TEST(VerifyDocumentTest, CausePrecision) {
  auto s = make_scenario(72);
  std::mt19937_64 rng(720);
  const Bytes& doc = s->batch[1].bytes;
  const Stamp& stamp = s->batch_receipt.stamps[1].second;
  auto resolve = s->resolver.resolver();

  Stamp unknown = stamp;
  unknown.tx_id = fixtures::random_digest(rng);
  EXPECT_EQ(verify_document(doc, unknown, s->ledger, resolve).cause, Cause::tx_not_found);

  Bytes tampered = doc;
  tampered[0] ^= 0x01;
  EXPECT_EQ(verify_document(tampered, stamp, s->ledger, resolve).cause, Cause::doc_hash_mismatch);

  Stamp other_index = stamp;
  other_index.auth_path.leaf_index = 2;
  EXPECT_EQ(verify_document(doc, other_index, s->ledger, resolve).cause, Cause::hash_not_in_set);

  Stamp bad_sibling = stamp;
  bad_sibling.auth_path.steps[1].sibling.mutable_data()[0] ^= 0x01;
  EXPECT_EQ(verify_document(doc, bad_sibling, s->ledger, resolve).cause, Cause::path_mismatch);

  // A set entry away from this document's path: path folds, full rebuild fails.
  Ledger other_entry = with_block(s->ledger, 0, [](Block& b) {
    b.tx.hash_set[4].mutable_data()[0] ^= 0x01;
  });
  EXPECT_EQ(verify_document(doc, stamp, other_entry, resolve).cause, Cause::root_mismatch);

  Ledger bad_sig = with_block(s->ledger, 0, [](Block& b) { b.tx.signature.bytes[10] ^= 0x01; });
  EXPECT_EQ(verify_document(doc, stamp, bad_sig, resolve).cause, Cause::bad_issuer_signature);

  const Bytes& cdoc = s->certified.bytes;
  Stamp cstamp = s->cert_receipt.stamps[0].second;
  cstamp.cert_chain->layers[1].signature.bytes[0] ^= 0x01;
  auto v = verify_document(cdoc, cstamp, s->ledger, resolve);
  EXPECT_EQ(v.cause, Cause::bad_chain_layer);
  EXPECT_EQ(v.layer, 2u);

  MapResolver missing = s->resolver;
  missing.erase(s->orgs[2].pubkey_location);
  v = verify_document(cdoc, s->cert_receipt.stamps[0].second, s->ledger, missing.resolver());
  EXPECT_EQ(v.cause, Cause::missing_pubkey);
  EXPECT_EQ(v.layer, 3u);
}

TEST(VerifyDocumentTest, StampAgainstDifferentTransactionRejects) {
  std::mt19937_64 rng(73);
  auto issuer = fixtures::seeded_key(rng);
  Ledger ledger(fixtures::counter_clock());
  for (int trial = 0; trial < 50; ++trial) {
    auto d1 = fixtures::random_documents(rng, 1 + rng() % 6);
    auto d2 = fixtures::random_documents(rng, 1 + rng() % 6);
    auto r1 = issue_batch(issuer, d1, ledger);
    auto r2 = issue_batch(issuer, d2, ledger);
    std::size_t i = rng() % d1.size();
    Stamp crossed = r1.stamps[i].second;
    crossed.tx_id = r2.tx_id;
    auto v = verify_document(d1[i].bytes, crossed, ledger, {});
    EXPECT_TRUE(v.cause == Cause::hash_not_in_set || v.cause == Cause::path_mismatch)
        << to_string(v.cause);
  }
}

TEST(VerifyDocumentTest, Case3AnchorMustBeSignedByLastOrganization) {
  std::mt19937_64 rng(74);
  MapResolver r;
  auto orgs = fixtures::random_orgs(rng, 2, r);
  Ledger ledger(fixtures::counter_clock());
  Document doc{"d", fixtures::random_bytes(rng, 40)};
  CertChain chain = certify(hash_leaf(doc.bytes), orgs);
  // Anchored by the first organization instead of the last.
  auto tx = make_transaction(orgs[0].key, {chain.doc_hash}, chain.root, RootKind::cert_chain,
                             ledger.now());
  ledger.append_tx(tx, orgs[0].key.public_key);
  Stamp s;
  s.tx_id = tx.tx_id;
  s.doc_hash = chain.doc_hash;
  s.case_tag = CaseTag::case3;
  s.cert_chain = chain;
  EXPECT_EQ(verify_document(doc.bytes, s, ledger, r.resolver()).cause,
            Cause::bad_issuer_signature);
}

TEST(VerifyDocumentTest, CaseTagMismatchRejects) {
  auto s = make_scenario(75);
  Stamp st = s->batch_receipt.stamps[0].second;
  st.case_tag = CaseTag::case3;
  EXPECT_FALSE(verify_document(s->batch[0].bytes, st, s->ledger, s->resolver.resolver()).accepted());
  Stamp cs = s->cert_receipt.stamps[0].second;
  cs.case_tag = CaseTag::case1;
  EXPECT_FALSE(
      verify_document(s->certified.bytes, cs, s->ledger, s->resolver.resolver()).accepted());
}

TEST(VerifyDocumentTest, PrevTxIdMustExistAndPrecede) {
  std::mt19937_64 rng(76);
  auto a = fixtures::seeded_key(rng), b = fixtures::seeded_key(rng);
  Ledger ledger(fixtures::counter_clock());
  auto d1 = fixtures::random_documents(rng, 2);
  auto r1 = issue_batch(a, d1, ledger);
  auto d2 = fixtures::random_documents(rng, 1);
  auto r2 = issue_chained(b, d2, r1.stamps, ledger);
  Stamp st = r2.stamps[0].second;
  st.prev_tx_id = fixtures::random_digest(rng);
  EXPECT_EQ(verify_document(d2[0].bytes, st, ledger, {}).cause, Cause::tx_not_found);
  st.prev_tx_id = r2.tx_id;  // not earlier than itself
  EXPECT_EQ(verify_document(d2[0].bytes, st, ledger, {}).cause, Cause::tx_not_found);
}

TEST(VerdictTest, JsonShape) {
  EXPECT_EQ(canonical_dump(to_json(Verdict{})), R"({"cause":"ok","result":"accept"})");
  EXPECT_EQ(canonical_dump(to_json(Verdict{Cause::bad_chain_layer, 2})),
            R"({"cause":"bad_chain_layer","layer":2,"result":"reject"})");
}

TEST(VerifyPortfolioTest, ChainedPortfolio) {
  std::mt19937_64 rng(77);
  auto a = fixtures::seeded_key(rng), b = fixtures::seeded_key(rng);
  Ledger ledger(fixtures::counter_clock());
  auto a_docs = fixtures::random_documents(rng, 2);
  auto r1 = issue_batch(a, a_docs, ledger);
  auto b_docs = fixtures::random_documents(rng, 1);
  auto r2 = issue_chained(b, b_docs, r1.stamps, ledger);
  const Stamp& latest = r2.stamps[0].second;

  // Fresh stamps from the chained issuance.
  std::vector<PresentedDocument> fresh{{b_docs[0].bytes, r2.stamps[0].second},
                                       {a_docs[0].bytes, r2.stamps[1].second},
                                       {a_docs[1].bytes, r2.stamps[2].second}};
  auto pv = verify_portfolio(fresh, latest, ledger);
  EXPECT_TRUE(pv.overall);
  // Per-document oracle: each also verifies on its own.
  for (const auto& d : fresh) EXPECT_TRUE(verify_document(d.bytes, d.stamp, ledger, {}).accepted());

  // Original stamps from A's issuance are located in the latest set.
  std::vector<PresentedDocument> original{{a_docs[0].bytes, r1.stamps[0].second},
                                          {a_docs[1].bytes, r1.stamps[1].second}};
  EXPECT_TRUE(verify_portfolio(original, latest, ledger).overall);

  // Omitting a document does not affect the others.
  std::vector<PresentedDocument> partial{fresh[0], fresh[2]};
  EXPECT_TRUE(verify_portfolio(partial, latest, ledger).overall);

  // A document outside the latest set.
  auto stray_docs = fixtures::random_documents(rng, 1);
  auto stray = issue_batch(a, stray_docs, ledger);
  std::vector<PresentedDocument> with_stray{fresh[0], {stray_docs[0].bytes, stray.stamps[0].second}};
  pv = verify_portfolio(with_stray, latest, ledger);
  EXPECT_FALSE(pv.overall);
  EXPECT_TRUE(pv.documents[0].accepted());
  EXPECT_EQ(pv.documents[1].cause, Cause::hash_not_in_set);
}

TEST(VerifyPortfolioTest, UnknownLatestRejectsAll) {
  std::mt19937_64 rng(78);
  Ledger ledger(fixtures::counter_clock());
  auto docs = fixtures::random_documents(rng, 2);
  auto r = issue_batch(fixtures::seeded_key(rng), docs, ledger);
  Stamp latest = r.stamps[0].second;
  latest.tx_id = fixtures::random_digest(rng);
  std::vector<PresentedDocument> p{{docs[0].bytes, r.stamps[0].second}};
  auto pv = verify_portfolio(p, latest, ledger);
  EXPECT_FALSE(pv.overall);
  EXPECT_EQ(pv.documents[0].cause, Cause::tx_not_found);
}

}  // namespace
