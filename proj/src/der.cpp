#include "decert/der.hpp"

#include "decert/error.hpp"

namespace decert::der {

namespace {

Error malformed(const std::string &what) { return Error(ErrorCode::MalformedExtension, what); }

void append_length(std::vector<uint8_t> &out, size_t length) {
    if (length < 0x80) {
        out.push_back(static_cast<uint8_t>(length));
        return;
    }
    uint8_t bytes[sizeof(size_t)];
    size_t n = 0;
    for (size_t v = length; v != 0; v >>= 8) bytes[n++] = static_cast<uint8_t>(v & 0xFF);
    out.push_back(static_cast<uint8_t>(0x80 | n));
    while (n != 0) out.push_back(bytes[--n]);
}

}  // namespace

void append_tlv(std::vector<uint8_t> &out, uint8_t tag, std::span<const uint8_t> content) {
    out.push_back(tag);
    append_length(out, content.size());
    out.insert(out.end(), content.begin(), content.end());
}

void append_ia5(std::vector<uint8_t> &out, std::string_view text) {
    append_tlv(out, kTagIa5String,
               {reinterpret_cast<const uint8_t *>(text.data()), text.size()});
}

void append_integer(std::vector<uint8_t> &out, uint32_t value) {
    uint8_t bytes[5];
    size_t n = 0;
    for (uint32_t v = value; v != 0; v >>= 8) bytes[n++] = static_cast<uint8_t>(v & 0xFF);
    if (n == 0) bytes[n++] = 0;
    if (bytes[n - 1] & 0x80) bytes[n++] = 0;  // keep the value non-negative
    out.push_back(kTagInteger);
    append_length(out, n);
    while (n != 0) out.push_back(bytes[--n]);
}

uint8_t Reader::peek_tag() const {
    if (empty()) throw malformed("unexpected end of data");
    return data_[pos_];
}

std::span<const uint8_t> Reader::read(uint8_t expected_tag) {
    if (empty()) throw malformed("unexpected end of data");
    uint8_t tag = data_[pos_++];
    if (tag != expected_tag) throw malformed("unexpected tag");
    if (pos_ >= data_.size()) throw malformed("truncated length");
    uint8_t first = data_[pos_++];
    size_t length = 0;
    if (first < 0x80) {
        length = first;
    } else {
        size_t n = first & 0x7F;
        if (n == 0 || n > sizeof(size_t)) throw malformed("unsupported length form");
        if (data_.size() - pos_ < n) throw malformed("truncated length");
        for (size_t i = 0; i < n; ++i) length = (length << 8) | data_[pos_ + i];
        if (length < 0x80 || data_[pos_] == 0) throw malformed("non-minimal length");
        pos_ += n;
    }
    if (data_.size() - pos_ < length) throw malformed("content overruns buffer");
    auto content = data_.subspan(pos_, length);
    pos_ += length;
    return content;
}

std::string Reader::read_ia5(uint8_t expected_tag) {
    auto content = read(expected_tag);
    for (uint8_t byte : content)
        if (byte > 0x7F) throw malformed("non-IA5 character");
    return {content.begin(), content.end()};
}

uint32_t Reader::read_integer() {
    auto content = read(kTagInteger);
    if (content.empty()) throw malformed("empty integer");
    if (content[0] & 0x80) throw malformed("negative integer");
    if (content.size() > 1 && content[0] == 0 && !(content[1] & 0x80))
        throw malformed("non-minimal integer");
    if (content.size() > 4) throw malformed("integer too large");
    uint32_t value = 0;
    for (uint8_t byte : content) value = (value << 8) | byte;
    return value;
}

void Reader::expect_end() const {
    if (!empty()) throw malformed("trailing bytes");
}

}  // namespace decert::der
