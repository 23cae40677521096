#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "vfl/ledger.hpp"
#include "vfl/rng.hpp"
#include "vfl/sha256.hpp"

using namespace vfl;

TEST_CASE("sha256 FIPS vectors") {
    CHECK(to_hex(sha256(std::string_view(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(sha256(std::string_view("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(sha256(std::string_view(
              "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    const std::string million(1000000, 'a');
    CHECK(to_hex(sha256(million)) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");

    // streaming across block boundaries
    Sha256 h;
    h.update("ab", 2);
    h.update("c", 1);
    CHECK(to_hex(h.finish()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hex round trip") {
    Digest d = sha256(std::string_view("roundtrip"));
    Digest back{};
    REQUIRE(from_hex(to_hex(d), back));
    CHECK(back == d);
    CHECK_FALSE(from_hex("zz", back));
}

namespace {

Microblock make_microblock(const LedgerCopy& ledger, std::uint32_t producer, double ts,
                           std::uint64_t k = 1) {
    Microblock mb;
    mb.prev_keyblock_hash = ledger.latest_keyblock().block_hash;
    mb.payload_hash = sha256(std::string_view("payload-" + std::to_string(producer) + "-" +
                                              std::to_string(ts)));
    mb.producer_pseudonym = sha256(std::string_view("producer-" + std::to_string(producer)));
    mb.iteration = k;
    mb.timestamp = ts;
    mb.block_hash = mb.compute_hash();
    return mb;
}

}  // namespace

TEST_CASE("append_microblock: guard verdict, duplicates, anchors") {
    LedgerCopy ledger = LedgerCopy::with_genesis();
    const Microblock mb = make_microblock(ledger, 1, 1.0);

    CHECK(append_microblock(ledger, mb, true) == AppendStatus::Added);
    CHECK(ledger.microblock_count() == 1);

    // duplicate is an idempotent no-op
    CHECK(append_microblock(ledger, mb, true) == AppendStatus::Duplicate);
    CHECK(ledger.microblock_count() == 1);

    // failed guard leaves the ledger unchanged
    const Microblock mb2 = make_microblock(ledger, 2, 2.0);
    CHECK(append_microblock(ledger, mb2, false) == AppendStatus::RejectedByGuard);
    CHECK(ledger.microblock_count() == 1);

    // parallel microblocks on the same anchor coexist
    CHECK(append_microblock(ledger, mb2, true) == AppendStatus::Added);
    CHECK(ledger.microblocks.at(ledger.latest_keyblock().block_hash).size() == 2);

    // after sealing, the old anchor is stale
    const Digest old_anchor = ledger.latest_keyblock().block_hash;
    const SealOutcome sealed = seal_keyblock(ledger, sha256(std::string_view("g")), 2);
    REQUIRE(sealed.keyblock.has_value());
    Microblock stale = make_microblock(ledger, 3, 3.0);
    stale.prev_keyblock_hash = old_anchor;
    stale.block_hash = stale.compute_hash();
    CHECK(append_microblock(ledger, stale, true) == AppendStatus::StaleAnchor);

    Microblock unknown = make_microblock(ledger, 4, 4.0);
    unknown.prev_keyblock_hash = sha256(std::string_view("nowhere"));
    unknown.block_hash = unknown.compute_hash();
    CHECK(append_microblock(ledger, unknown, true) == AppendStatus::UnknownAnchor);

    Microblock bad = make_microblock(ledger, 5, 5.0);
    bad.timestamp += 1.0;  // stale hash
    CHECK(append_microblock(ledger, bad, true) == AppendStatus::BadHash);
}

TEST_CASE("seal_keyblock: exact count, earliest-first selection, shortfall") {
    LedgerCopy ledger = LedgerCopy::with_genesis();
    // five microblocks, timestamps 5,1,4,2,3
    const double stamps[] = {5, 1, 4, 2, 3};
    std::vector<Microblock> mbs;
    for (int i = 0; i < 5; ++i) {
        mbs.push_back(make_microblock(ledger, static_cast<std::uint32_t>(i), stamps[i]));
        REQUIRE(append_microblock(ledger, mbs.back(), true) == AppendStatus::Added);
    }

    SUBCASE("not enough microblocks reports the shortfall") {
        const SealOutcome out = seal_keyblock(ledger, sha256(std::string_view("g")), 7);
        CHECK(!out.keyblock.has_value());
        CHECK(out.shortfall == 2);
        CHECK(ledger.keyblocks.size() == 1);
    }

    SUBCASE("three earliest are sealed, two stay anchored") {
        const SealOutcome out = seal_keyblock(ledger, sha256(std::string_view("g")), 3);
        REQUIRE(out.keyblock.has_value());
        CHECK(out.keyblock->microblock_hashes.size() == 3);
        // timestamps 1,2,3 selected by hand
        std::vector<Digest> expect{mbs[1].block_hash, mbs[3].block_hash, mbs[4].block_hash};
        for (const auto& h : expect) {
            CHECK(std::find(out.keyblock->microblock_hashes.begin(),
                            out.keyblock->microblock_hashes.end(),
                            h) != out.keyblock->microblock_hashes.end());
        }
        CHECK(ledger.keyblocks.size() == 2);
        CHECK(verify_chain(ledger).pass);
    }
}

TEST_CASE("verify_chain: fresh, genesis-only, and missing-reference ledgers") {
    LedgerCopy genesis_only = LedgerCopy::with_genesis();
    CHECK(verify_chain(genesis_only).pass);

    LedgerCopy ledger = LedgerCopy::with_genesis();
    for (int i = 0; i < 3; ++i) {
        append_microblock(ledger, make_microblock(ledger, static_cast<std::uint32_t>(i), i), true);
    }
    seal_keyblock(ledger, sha256(std::string_view("g")), 3);
    CHECK(verify_chain(ledger).pass);

    // drop one referenced microblock: the report must fail at that keyblock
    LedgerCopy broken = ledger;
    auto& set = broken.microblocks.begin()->second;
    set.erase(set.begin());
    const VerifyReport rep = verify_chain(broken);
    CHECK(!rep.pass);
    bool found = false;
    for (const auto& f : rep.findings) {
        if (f.block == "keyblock 1" && f.problem.rfind("missing referenced", 0) == 0) found = true;
    }
    CHECK(found);
}

namespace {

// a shared evolving world from which random ledger copies are cut
struct World {
    std::vector<Keyblock> chain;
    std::vector<std::vector<Microblock>> pool;  // per anchor index (chain position)
    std::vector<MessageBlock> messages;
};

World make_world(Rng& rng) {
    World w;
    LedgerCopy ledger = LedgerCopy::with_genesis();
    const std::size_t epochs = 2 + rng.uniform_int(3);
    for (std::size_t e = 0; e < epochs; ++e) {
        w.chain.push_back(ledger.latest_keyblock());
        std::vector<Microblock> anchored;
        const std::size_t count = 1 + rng.uniform_int(5);
        for (std::size_t i = 0; i < count; ++i) {
            const Microblock mb = make_microblock(
                ledger, static_cast<std::uint32_t>(rng.uniform_int(1000)), rng.uniform(0, 100),
                e + 1);
            if (append_microblock(ledger, mb, true) == AppendStatus::Added) {
                anchored.push_back(mb);
            }
        }
        w.pool.push_back(anchored);
        seal_keyblock(ledger, sha256(std::string_view("g" + std::to_string(e))),
                      anchored.size());
    }
    w.chain.push_back(ledger.latest_keyblock());
    w.pool.push_back({});

    Digest prev = kZeroDigest;
    const std::size_t msgs = rng.uniform_int(4);
    for (std::size_t i = 0; i < msgs; ++i) {
        MessageBlock blk;
        blk.prev_hash = prev;
        blk.incident_time = rng.uniform(0, 300);
        blk.incident_x = rng.uniform(0, 2500);
        blk.incident_y = rng.uniform(0, 2500);
        blk.relay_pseudonym = sha256(std::string_view("relay" + std::to_string(i)));
        blk.hop = i + 1;
        blk.block_hash = blk.compute_hash();
        w.messages.push_back(blk);
        prev = blk.block_hash;
    }
    return w;
}

LedgerCopy random_copy(const World& w, Rng& rng) {
    LedgerCopy lc;
    const std::size_t len = 1 + rng.uniform_int(w.chain.size());
    for (std::size_t i = 0; i < len; ++i) lc.keyblocks.push_back(w.chain[i]);
    for (std::size_t i = 0; i < len; ++i) {
        for (const auto& mb : w.pool[i]) {
            if (rng.bernoulli(0.6)) lc.microblocks[mb.prev_keyblock_hash].emplace(mb.block_hash, mb);
        }
        if (lc.microblocks.count(w.chain[i].block_hash) &&
            lc.microblocks[w.chain[i].block_hash].empty()) {
            lc.microblocks.erase(w.chain[i].block_hash);
        }
    }
    const std::size_t msg_len = rng.uniform_int(w.messages.size() + 1);
    for (std::size_t i = 0; i < msg_len; ++i) lc.message_chain.push_back(w.messages[i]);
    return lc;
}

}  // namespace

TEST_CASE("merge laws: commutative, associative, idempotent on random copies") {
    Rng rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        const World w = make_world(rng);
        const LedgerCopy a = random_copy(w, rng);
        const LedgerCopy b = random_copy(w, rng);
        const LedgerCopy c = random_copy(w, rng);

        CHECK(dump_ledger(merge_ledgers(a, a)) == dump_ledger(a));
        CHECK(dump_ledger(merge_ledgers(a, b)) == dump_ledger(merge_ledgers(b, a)));
        CHECK(dump_ledger(merge_ledgers(merge_ledgers(a, b), c)) ==
              dump_ledger(merge_ledgers(a, merge_ledgers(b, c))));

        // merging never loses valid microblocks known for an anchor
        const LedgerCopy ab = merge_ledgers(a, b);
        for (const auto& [anchor, set] : a.microblocks) {
            for (const auto& [hash, mb] : set) {
                CHECK(ab.microblocks.at(anchor).count(hash) == 1);
            }
        }
    }
}

TEST_CASE("merge drops tampered incoming microblocks") {
    LedgerCopy a = LedgerCopy::with_genesis();
    LedgerCopy b = a;
    const Microblock good = make_microblock(a, 1, 1.0);
    REQUIRE(append_microblock(a, good, true) == AppendStatus::Added);

    // b carries a block whose payload was altered after hashing
    Microblock tampered = make_microblock(b, 2, 2.0);
    REQUIRE(append_microblock(b, tampered, true) == AppendStatus::Added);
    b.microblocks.begin()->second.begin()->second.payload_hash[0] ^= 0xff;

    const LedgerCopy merged = merge_ledgers(a, b);
    const auto& set = merged.microblocks.at(a.latest_keyblock().block_hash);
    CHECK(set.count(good.block_hash) == 1);
    CHECK(set.count(tampered.block_hash) == 0);  // excluded from the merged copy
    CHECK(verify_chain(merged).pass);

    // disjoint sets of sizes 2 and 3 on the same anchor union to 5
    LedgerCopy c = LedgerCopy::with_genesis();
    LedgerCopy d = LedgerCopy::with_genesis();
    for (int i = 0; i < 2; ++i) append_microblock(c, make_microblock(c, 10 + i, i), true);
    for (int i = 0; i < 3; ++i) append_microblock(d, make_microblock(d, 20 + i, i), true);
    CHECK(merge_ledgers(c, d).microblock_count() == 5);
}

TEST_CASE("single-bit tampering is always detected") {
    Rng rng(99);
    LedgerCopy ledger = LedgerCopy::with_genesis();
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < 3; ++i) {
            append_microblock(ledger,
                              make_microblock(ledger, static_cast<std::uint32_t>(10 * k + i),
                                              k + 0.1 * i, k + 1),
                              true);
        }
        seal_keyblock(ledger, sha256(std::string_view("g" + std::to_string(k))), 3);
    }
    REQUIRE(verify_chain(ledger).pass);

    for (int trial = 0; trial < 50; ++trial) {
        LedgerCopy copy = ledger;
        const std::size_t which = rng.uniform_int(3);
        if (which == 0) {
            auto& kb = copy.keyblocks[1 + rng.uniform_int(copy.keyblocks.size() - 1)];
            switch (rng.uniform_int(3)) {
                case 0: kb.global_model_hash[rng.uniform_int(32)] ^= std::uint8_t(1) << rng.uniform_int(8); break;
                case 1: kb.iteration ^= std::uint64_t(1) << rng.uniform_int(64); break;
                default: kb.microblock_hashes[rng.uniform_int(kb.microblock_hashes.size())]
                             [rng.uniform_int(32)] ^= std::uint8_t(1) << rng.uniform_int(8);
            }
        } else if (which == 1) {
            auto it = copy.microblocks.begin();
            std::advance(it, rng.uniform_int(copy.microblocks.size()));
            auto& mb = it->second.begin()->second;
            switch (rng.uniform_int(3)) {
                case 0: mb.payload_hash[rng.uniform_int(32)] ^= std::uint8_t(1) << rng.uniform_int(8); break;
                case 1: mb.producer_pseudonym[rng.uniform_int(32)] ^= std::uint8_t(1) << rng.uniform_int(8); break;
                default: {
                    std::uint64_t bits;
                    static_assert(sizeof bits == sizeof mb.timestamp);
                    std::memcpy(&bits, &mb.timestamp, 8);
                    bits ^= std::uint64_t(1) << rng.uniform_int(64);
                    std::memcpy(&mb.timestamp, &bits, 8);
                }
            }
        } else {
            // flip a bit inside a stored block hash itself
            auto& kb = copy.keyblocks[rng.uniform_int(copy.keyblocks.size())];
            kb.block_hash[rng.uniform_int(32)] ^= std::uint8_t(1) << rng.uniform_int(8);
        }
        CHECK(!verify_chain(copy).pass);
    }
}

TEST_CASE("ledger dump/load round trip is byte exact") {
    Rng rng(31337);
    const World w = make_world(rng);
    const LedgerCopy a = random_copy(w, rng);
    const std::string dumped = dump_ledger(a);
    const LedgerCopy loaded = load_ledger(dumped);
    CHECK(dump_ledger(loaded) == dumped);
    CHECK(verify_chain(loaded).pass == verify_chain(a).pass);
}
