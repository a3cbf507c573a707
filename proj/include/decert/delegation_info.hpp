#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "decert/domain.hpp"

namespace decert {

// Payload of the critical DelegationInfo certificate extension. The include
// mirror, when present, must equal the certificate's SAN dNSName set; an
// absent path length means no further delegation is permitted.
struct DelegationInfo {
    std::vector<DomainName> exclude_domains;                       // sorted, unique
    std::optional<std::vector<DomainPattern>> include_domains;     // sorted, unique
    std::optional<uint32_t> delegation_path_len;                   // 0..255

    [[nodiscard]] uint32_t effective_path_len() const { return delegation_path_len.value_or(0); }

    bool operator==(const DelegationInfo &) const = default;
};

// Deterministic DER:
//   DelegationInfo ::= SEQUENCE {
//       excludeDomains   [0] EXPLICIT SEQUENCE OF IA5String,
//       includeDomains   [1] EXPLICIT SEQUENCE OF IA5String OPTIONAL,
//       delegationPathLen [2] EXPLICIT INTEGER (0..255) OPTIONAL }
// String lists are emitted sorted and deduplicated, so the encoding is a
// function of the semantic value alone. Throws Error{EncodingOverflow} for a
// string over 253 octets and Error{InvalidPathLen} for a length over 255.
std::vector<uint8_t> encode_delegation_info(const DelegationInfo &info);

// Strict inverse of encode on its image: rejects trailing bytes, unsorted or
// duplicate entries, non-minimal lengths, and payloads that do not parse as
// domain names/patterns. Throws Error{MalformedExtension}.
DelegationInfo decode_delegation_info(std::span<const uint8_t> octets);

}  // namespace decert
