#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decert::der {

constexpr uint8_t kTagInteger = 0x02;
constexpr uint8_t kTagIa5String = 0x16;
constexpr uint8_t kTagSequence = 0x30;

constexpr uint8_t context_tag(uint8_t number) { return static_cast<uint8_t>(0xA0 | number); }

void append_tlv(std::vector<uint8_t> &out, uint8_t tag, std::span<const uint8_t> content);
void append_ia5(std::vector<uint8_t> &out, std::string_view text);
// Minimal-length unsigned INTEGER encoding (value range used here is 0..255).
void append_integer(std::vector<uint8_t> &out, uint32_t value);

// Strict DER reader: definite lengths only, long-form lengths must be minimal.
// All failures throw Error{MalformedExtension}.
class Reader {
  public:
    explicit Reader(std::span<const uint8_t> data) : data_(data) {}

    [[nodiscard]] bool empty() const noexcept { return pos_ >= data_.size(); }
    [[nodiscard]] uint8_t peek_tag() const;

    // Reads the next TLV; the returned span aliases the input buffer.
    std::span<const uint8_t> read(uint8_t expected_tag);
    std::string read_ia5(uint8_t expected_tag = kTagIa5String);
    uint32_t read_integer();
    void expect_end() const;

  private:
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

}  // namespace decert::der
