#include "vfl/ledger.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "vfl/bytes.hpp"

namespace vfl {

namespace {

// %.17g round-trips IEEE doubles exactly through strtod.
std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& tok) {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("ledger: bad number '" + tok + "'");
    return v;
}

Digest parse_digest(const std::string& tok) {
    Digest d;
    if (!from_hex(tok, d)) throw std::invalid_argument("ledger: bad digest '" + tok + "'");
    return d;
}

}  // namespace

Digest Microblock::compute_hash() const {
    ByteWriter w;
    w.str("MB");
    w.digest(prev_keyblock_hash);
    w.digest(payload_hash);
    w.digest(producer_pseudonym);
    w.u64(iteration);
    w.f64(timestamp);
    return w.hash();
}

Digest Keyblock::compute_hash() const {
    ByteWriter w;
    w.str("KB");
    w.digest(prev_keyblock_hash);
    w.u64(microblock_hashes.size());
    for (const auto& h : microblock_hashes) w.digest(h);
    w.digest(global_model_hash);
    w.u64(iteration);
    return w.hash();
}

Digest MessageBlock::compute_hash() const {
    ByteWriter w;
    w.str("MSG");
    w.digest(prev_hash);
    w.f64(incident_time);
    w.f64(incident_x);
    w.f64(incident_y);
    w.digest(relay_pseudonym);
    w.u64(hop);
    return w.hash();
}

Keyblock genesis_keyblock() {
    Keyblock kb;
    kb.prev_keyblock_hash = kZeroDigest;
    kb.global_model_hash = sha256(std::string_view("vfl-genesis"));
    kb.iteration = 0;
    kb.block_hash = kb.compute_hash();
    return kb;
}

LedgerCopy LedgerCopy::with_genesis() {
    LedgerCopy lc;
    lc.keyblocks.push_back(genesis_keyblock());
    return lc;
}

std::size_t LedgerCopy::microblock_count() const {
    std::size_t n = 0;
    for (const auto& [anchor, set] : microblocks) n += set.size();
    return n;
}

AppendStatus append_microblock(LedgerCopy& ledger, const Microblock& mb, bool guard_passed) {
    if (ledger.keyblocks.empty()) throw std::logic_error("append_microblock: empty ledger");
    if (mb.block_hash != mb.compute_hash()) return AppendStatus::BadHash;

    const Digest& latest = ledger.latest_keyblock().block_hash;
    if (mb.prev_keyblock_hash != latest) {
        for (const auto& kb : ledger.keyblocks) {
            if (kb.block_hash == mb.prev_keyblock_hash) return AppendStatus::StaleAnchor;
        }
        return AppendStatus::UnknownAnchor;
    }
    if (!guard_passed) return AppendStatus::RejectedByGuard;

    auto& set = ledger.microblocks[mb.prev_keyblock_hash];
    if (set.count(mb.block_hash)) return AppendStatus::Duplicate;
    set.emplace(mb.block_hash, mb);
    return AppendStatus::Added;
}

SealOutcome seal_keyblock(LedgerCopy& ledger, const Digest& global_model_hash,
                          std::size_t n_required) {
    if (ledger.keyblocks.empty()) throw std::logic_error("seal_keyblock: empty ledger");
    if (n_required == 0) throw std::invalid_argument("seal_keyblock: n_required must be positive");

    const Digest anchor = ledger.latest_keyblock().block_hash;
    SealOutcome out;

    std::vector<const Microblock*> anchored;
    if (auto it = ledger.microblocks.find(anchor); it != ledger.microblocks.end()) {
        anchored.reserve(it->second.size());
        for (const auto& [hash, mb] : it->second) anchored.push_back(&mb);
    }
    if (anchored.size() < n_required) {
        out.shortfall = n_required - anchored.size();
        return out;
    }

    // deterministic selection: earliest timestamps, ties by producer pseudonym
    std::sort(anchored.begin(), anchored.end(), [](const Microblock* a, const Microblock* b) {
        if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
        return a->producer_pseudonym < b->producer_pseudonym;
    });

    Keyblock kb;
    kb.prev_keyblock_hash = anchor;
    kb.global_model_hash = global_model_hash;
    kb.iteration = ledger.latest_keyblock().iteration + 1;
    kb.microblock_hashes.reserve(n_required);
    for (std::size_t i = 0; i < n_required; ++i) {
        kb.microblock_hashes.push_back(anchored[i]->block_hash);
    }
    kb.block_hash = kb.compute_hash();
    ledger.keyblocks.push_back(kb);
    out.keyblock = kb;
    return out;
}

namespace {

bool keyblock_chain_valid(const std::vector<Keyblock>& chain) {
    if (chain.empty()) return false;
    const Keyblock genesis = genesis_keyblock();
    if (chain.front().block_hash != genesis.block_hash) return false;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (chain[i].block_hash != chain[i].compute_hash()) return false;
        if (i > 0 && chain[i].prev_keyblock_hash != chain[i - 1].block_hash) return false;
    }
    return true;
}

// longest verified prefix of a message chain
std::vector<MessageBlock> valid_message_prefix(const std::vector<MessageBlock>& chain) {
    std::vector<MessageBlock> out;
    Digest prev = kZeroDigest;
    for (const auto& blk : chain) {
        if (blk.prev_hash != prev || blk.block_hash != blk.compute_hash()) break;
        out.push_back(blk);
        prev = blk.block_hash;
    }
    return out;
}

}  // namespace

LedgerCopy merge_ledgers(const LedgerCopy& mine, const LedgerCopy& theirs) {
    if (mine.keyblocks.empty() || theirs.keyblocks.empty() ||
        mine.keyblocks.front().block_hash != theirs.keyblocks.front().block_hash) {
        throw std::invalid_argument("merge_ledgers: ledgers do not share a genesis keyblock");
    }

    LedgerCopy out;

    // keyblock chain: longer valid chain wins; equal lengths keep ours
    const bool mine_valid = keyblock_chain_valid(mine.keyblocks);
    const bool theirs_valid = keyblock_chain_valid(theirs.keyblocks);
    if (!mine_valid && !theirs_valid) throw std::invalid_argument("merge_ledgers: no valid chain");
    if (!theirs_valid || (mine_valid && mine.keyblocks.size() >= theirs.keyblocks.size())) {
        out.keyblocks = mine.keyblocks;
    } else {
        out.keyblocks = theirs.keyblocks;
    }

    // union of microblocks whose anchor exists in the winning chain and whose
    // hash verifies
    auto absorb = [&out](const LedgerCopy& src) {
        for (const auto& [anchor, set] : src.microblocks) {
            bool anchored = false;
            for (const auto& kb : out.keyblocks) {
                if (kb.block_hash == anchor) {
                    anchored = true;
                    break;
                }
            }
            if (!anchored) continue;
            for (const auto& [hash, mb] : set) {
                if (mb.block_hash != mb.compute_hash() || mb.prev_keyblock_hash != anchor) continue;
                out.microblocks[anchor].emplace(mb.block_hash, mb);
            }
        }
    };
    absorb(mine);
    absorb(theirs);

    const auto mine_msgs = valid_message_prefix(mine.message_chain);
    const auto theirs_msgs = valid_message_prefix(theirs.message_chain);
    out.message_chain = mine_msgs.size() >= theirs_msgs.size() ? mine_msgs : theirs_msgs;
    return out;
}

VerifyReport verify_chain(const LedgerCopy& ledger) {
    VerifyReport rep;
    auto flag = [&rep](std::string block, std::string problem) {
        rep.pass = false;
        rep.findings.push_back({std::move(block), std::move(problem)});
    };

    if (ledger.keyblocks.empty()) {
        flag("ledger", "no keyblocks (missing genesis)");
        return rep;
    }
    const Keyblock genesis = genesis_keyblock();
    if (ledger.keyblocks.front().block_hash != genesis.block_hash) {
        flag("keyblock 0", "genesis mismatch");
    }

    for (std::size_t i = 0; i < ledger.keyblocks.size(); ++i) {
        const auto& kb = ledger.keyblocks[i];
        const std::string name = "keyblock " + std::to_string(i);
        if (kb.block_hash != kb.compute_hash()) flag(name, "hash mismatch");
        if (i > 0) {
            if (kb.prev_keyblock_hash != ledger.keyblocks[i - 1].block_hash) {
                flag(name, "broken chain link");
            }
            // every referenced microblock must be stored and correctly anchored
            auto it = ledger.microblocks.find(kb.prev_keyblock_hash);
            for (const auto& mh : kb.microblock_hashes) {
                if (it == ledger.microblocks.end() || !it->second.count(mh)) {
                    flag(name, "missing referenced microblock " + to_hex(mh).substr(0, 12));
                }
            }
        }
    }

    for (const auto& [anchor, set] : ledger.microblocks) {
        bool anchored = false;
        for (const auto& kb : ledger.keyblocks) {
            if (kb.block_hash == anchor) {
                anchored = true;
                break;
            }
        }
        for (const auto& [hash, mb] : set) {
            const std::string name = "microblock " + to_hex(hash).substr(0, 12);
            if (mb.block_hash != mb.compute_hash()) flag(name, "hash mismatch");
            if (mb.block_hash != hash) flag(name, "stored under wrong key");
            if (mb.prev_keyblock_hash != anchor) flag(name, "anchor mismatch");
            if (!anchored) flag(name, "anchor keyblock not in chain");
        }
    }

    Digest prev = kZeroDigest;
    for (std::size_t i = 0; i < ledger.message_chain.size(); ++i) {
        const auto& blk = ledger.message_chain[i];
        const std::string name = "messageblock " + std::to_string(i);
        if (blk.block_hash != blk.compute_hash()) flag(name, "hash mismatch");
        if (blk.prev_hash != prev) flag(name, "broken chain link");
        prev = blk.block_hash;
    }
    return rep;
}

std::string dump_ledger(const LedgerCopy& ledger) {
    std::ostringstream os;
    os << "# vfl-ledger v1\n";
    for (const auto& kb : ledger.keyblocks) {
        os << "KB " << to_hex(kb.prev_keyblock_hash) << ' ' << kb.iteration << ' '
           << to_hex(kb.global_model_hash) << ' ' << kb.microblock_hashes.size();
        for (const auto& mh : kb.microblock_hashes) os << ' ' << to_hex(mh);
        os << ' ' << to_hex(kb.block_hash) << '\n';
    }
    // anchors in chain order first, then any stray anchors in map order
    auto dump_set = [&os](const std::map<Digest, Microblock>& set) {
        for (const auto& [hash, mb] : set) {
            os << "MB " << to_hex(mb.prev_keyblock_hash) << ' ' << to_hex(mb.payload_hash) << ' '
               << to_hex(mb.producer_pseudonym) << ' ' << mb.iteration << ' '
               << fmt_double(mb.timestamp) << ' ' << to_hex(mb.block_hash) << '\n';
        }
    };
    std::vector<Digest> dumped;
    for (const auto& kb : ledger.keyblocks) {
        if (auto it = ledger.microblocks.find(kb.block_hash); it != ledger.microblocks.end()) {
            dump_set(it->second);
            dumped.push_back(kb.block_hash);
        }
    }
    for (const auto& [anchor, set] : ledger.microblocks) {
        if (std::find(dumped.begin(), dumped.end(), anchor) == dumped.end()) dump_set(set);
    }
    for (const auto& blk : ledger.message_chain) {
        os << "MSG " << to_hex(blk.prev_hash) << ' ' << fmt_double(blk.incident_time) << ' '
           << fmt_double(blk.incident_x) << ' ' << fmt_double(blk.incident_y) << ' '
           << to_hex(blk.relay_pseudonym) << ' ' << blk.hop << ' ' << to_hex(blk.block_hash)
           << '\n';
    }
    return os.str();
}

LedgerCopy load_ledger(const std::string& text) {
    LedgerCopy lc;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tag == "KB") {
            if (tok.size() < 4) throw std::invalid_argument("ledger: malformed KB line");
            Keyblock kb;
            kb.prev_keyblock_hash = parse_digest(tok[0]);
            kb.iteration = std::stoull(tok[1]);
            kb.global_model_hash = parse_digest(tok[2]);
            const std::size_t n = std::stoull(tok[3]);
            if (tok.size() != 4 + n + 1) throw std::invalid_argument("ledger: malformed KB line");
            for (std::size_t i = 0; i < n; ++i) {
                kb.microblock_hashes.push_back(parse_digest(tok[4 + i]));
            }
            kb.block_hash = parse_digest(tok.back());
            lc.keyblocks.push_back(kb);
        } else if (tag == "MB") {
            if (tok.size() != 6) throw std::invalid_argument("ledger: malformed MB line");
            Microblock mb;
            mb.prev_keyblock_hash = parse_digest(tok[0]);
            mb.payload_hash = parse_digest(tok[1]);
            mb.producer_pseudonym = parse_digest(tok[2]);
            mb.iteration = std::stoull(tok[3]);
            mb.timestamp = parse_double(tok[4]);
            mb.block_hash = parse_digest(tok[5]);
            lc.microblocks[mb.prev_keyblock_hash].emplace(mb.block_hash, mb);
        } else if (tag == "MSG") {
            if (tok.size() != 7) throw std::invalid_argument("ledger: malformed MSG line");
            MessageBlock blk;
            blk.prev_hash = parse_digest(tok[0]);
            blk.incident_time = parse_double(tok[1]);
            blk.incident_x = parse_double(tok[2]);
            blk.incident_y = parse_double(tok[3]);
            blk.relay_pseudonym = parse_digest(tok[4]);
            blk.hop = std::stoull(tok[5]);
            blk.block_hash = parse_digest(tok[6]);
            lc.message_chain.push_back(blk);
        } else {
            throw std::invalid_argument("ledger: unknown record tag '" + tag + "'");
        }
    }
    return lc;
}

}  // namespace vfl
