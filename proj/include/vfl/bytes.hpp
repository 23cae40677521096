#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "vfl/sha256.hpp"

namespace vfl {

// Canonical little-endian, length-prefixed serialization used for block
// hashing and model payloads. Field order is fixed by the caller.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    // length-prefixed byte string
    void bytes(std::span<const std::uint8_t> b) {
        u64(b.size());
        buf_.insert(buf_.end(), b.begin(), b.end());
    }

    void str(std::string_view s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    void digest(const Digest& d) { bytes(std::span<const std::uint8_t>(d.data(), d.size())); }

    const std::vector<std::uint8_t>& data() const { return buf_; }

    Digest hash() const { return sha256(std::span<const std::uint8_t>(buf_.data(), buf_.size())); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_++]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_++]) << (8 * i);
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::vector<std::uint8_t> bytes() {
        const std::uint64_t n = u64();
        need(n);
        std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }

    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::uint64_t n) const {
        if (pos_ + n > data_.size()) throw std::out_of_range("ByteReader: truncated input");
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace vfl
