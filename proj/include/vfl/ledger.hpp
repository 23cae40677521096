#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfl/sha256.hpp"

namespace vfl {

// Hierarchical ledger: a linear chain of keyblocks, each anchoring a set of
// parallel microblocks, plus a separate linear chain of incident-message
// blocks. All block hashes are SHA-256 over a canonical field serialization.

struct Microblock {
    Digest prev_keyblock_hash{};
    Digest payload_hash{};
    Digest producer_pseudonym{};
    std::uint64_t iteration = 0;
    double timestamp = 0.0;
    Digest block_hash{};

    Digest compute_hash() const;
};

struct Keyblock {
    Digest prev_keyblock_hash{};
    std::vector<Digest> microblock_hashes;
    Digest global_model_hash{};
    std::uint64_t iteration = 0;
    Digest block_hash{};

    Digest compute_hash() const;
};

struct MessageBlock {
    Digest prev_hash{};
    double incident_time = 0.0;
    double incident_x = 0.0;
    double incident_y = 0.0;
    Digest relay_pseudonym{};
    std::uint64_t hop = 0;
    Digest block_hash{};

    Digest compute_hash() const;
};

// The genesis keyblock is a fixed constant so that independently created
// copies share a common root.
Keyblock genesis_keyblock();

struct LedgerCopy {
    std::vector<Keyblock> keyblocks;  // chain order, index 0 is genesis
    // microblocks keyed by anchor keyblock hash, then by own block hash
    std::map<Digest, std::map<Digest, Microblock>> microblocks;
    std::vector<MessageBlock> message_chain;

    static LedgerCopy with_genesis();

    const Keyblock& latest_keyblock() const { return keyblocks.back(); }
    std::size_t microblock_count() const;
};

enum class AppendStatus { Added, Duplicate, RejectedByGuard, StaleAnchor, UnknownAnchor, BadHash };

AppendStatus append_microblock(LedgerCopy& ledger, const Microblock& mb, bool guard_passed);

struct SealOutcome {
    std::optional<Keyblock> keyblock;  // set on success
    std::size_t shortfall = 0;         // how many microblocks were missing
};

// Seals exactly `n_required` microblocks anchored at the latest keyblock
// (earliest timestamps first, ties by producer pseudonym) into a new keyblock.
SealOutcome seal_keyblock(LedgerCopy& ledger, const Digest& global_model_hash,
                          std::size_t n_required);

// Union merge. Keyblock chain and message chain follow the longer valid chain;
// microblock sets are unioned per anchor. Incoming blocks failing hash or
// anchor verification are dropped, the rest of the merge proceeds.
LedgerCopy merge_ledgers(const LedgerCopy& mine, const LedgerCopy& theirs);

struct VerifyFinding {
    std::string block;    // short identifier, e.g. "keyblock 3" or a hash prefix
    std::string problem;
};

struct VerifyReport {
    bool pass = true;
    std::vector<VerifyFinding> findings;
};

VerifyReport verify_chain(const LedgerCopy& ledger);

// Text dump/load. Round-trips byte-exactly: load(dump(x)) dumps to the same
// bytes. Lines are LF-terminated; see README for the format.
std::string dump_ledger(const LedgerCopy& ledger);
LedgerCopy load_ledger(const std::string& text);

}  // namespace vfl
