#include "decert/delegation_info.hpp"

#include <algorithm>

#include "decert/der.hpp"
#include "decert/error.hpp"

namespace decert {

namespace {

constexpr size_t kMaxStringOctets = 253;
constexpr uint32_t kMaxPathLen = 255;

std::vector<uint8_t> encode_string_list(const std::vector<std::string> &texts) {
    std::vector<uint8_t> body;
    for (const auto &text : texts) {
        if (text.size() > kMaxStringOctets)
            throw Error(ErrorCode::EncodingOverflow, "name longer than 253 octets");
        der::append_ia5(body, text);
    }
    std::vector<uint8_t> seq;
    der::append_tlv(seq, der::kTagSequence, body);
    return seq;
}

std::vector<std::string> decode_string_list(std::span<const uint8_t> wrapped) {
    der::Reader outer(wrapped);
    auto seq = outer.read(der::kTagSequence);
    outer.expect_end();

    std::vector<std::string> texts;
    der::Reader items(seq);
    while (!items.empty()) texts.push_back(items.read_ia5());
    for (size_t i = 1; i < texts.size(); ++i)
        if (texts[i] <= texts[i - 1])
            throw Error(ErrorCode::MalformedExtension, "entries not strictly ascending");
    return texts;
}

}  // namespace

std::vector<uint8_t> encode_delegation_info(const DelegationInfo &info) {
    std::vector<std::string> excludes;
    excludes.reserve(info.exclude_domains.size());
    for (const auto &name : info.exclude_domains) excludes.push_back(name.text());
    std::sort(excludes.begin(), excludes.end());
    excludes.erase(std::unique(excludes.begin(), excludes.end()), excludes.end());

    std::vector<uint8_t> body;
    der::append_tlv(body, der::context_tag(0), encode_string_list(excludes));

    if (info.include_domains) {
        std::vector<std::string> includes;
        includes.reserve(info.include_domains->size());
        for (const auto &pattern : *info.include_domains) includes.push_back(pattern.text());
        std::sort(includes.begin(), includes.end());
        includes.erase(std::unique(includes.begin(), includes.end()), includes.end());
        der::append_tlv(body, der::context_tag(1), encode_string_list(includes));
    }

    if (info.delegation_path_len) {
        if (*info.delegation_path_len > kMaxPathLen)
            throw Error(ErrorCode::InvalidPathLen, "delegation path length exceeds 255");
        std::vector<uint8_t> integer;
        der::append_integer(integer, *info.delegation_path_len);
        der::append_tlv(body, der::context_tag(2), integer);
    }

    std::vector<uint8_t> out;
    der::append_tlv(out, der::kTagSequence, body);
    return out;
}

DelegationInfo decode_delegation_info(std::span<const uint8_t> octets) {
    der::Reader outer(octets);
    auto seq = outer.read(der::kTagSequence);
    outer.expect_end();

    der::Reader fields(seq);
    DelegationInfo info;

    for (const auto &text : decode_string_list(fields.read(der::context_tag(0)))) {
        auto name = DomainName::try_parse(text);
        if (!name || name->text() != text)
            throw Error(ErrorCode::MalformedExtension, "exclude entry is not a normalized name");
        info.exclude_domains.push_back(*name);
    }

    if (!fields.empty() && fields.peek_tag() == der::context_tag(1)) {
        std::vector<DomainPattern> includes;
        for (const auto &text : decode_string_list(fields.read(der::context_tag(1)))) {
            try {
                auto pattern = parse_pattern(text);
                if (pattern.text() != text) throw Error(ErrorCode::MalformedExtension, "");
                includes.push_back(pattern);
            } catch (const Error &) {
                throw Error(ErrorCode::MalformedExtension,
                            "include entry is not a normalized pattern");
            }
        }
        info.include_domains = std::move(includes);
    }

    if (!fields.empty() && fields.peek_tag() == der::context_tag(2)) {
        der::Reader wrapper(fields.read(der::context_tag(2)));
        uint32_t value = wrapper.read_integer();
        wrapper.expect_end();
        if (value > kMaxPathLen)
            throw Error(ErrorCode::MalformedExtension, "delegation path length exceeds 255");
        info.delegation_path_len = value;
    }

    fields.expect_end();
    return info;
}

}  // namespace decert
