#pragma once

#include <cstdint>
#include <filesystem>

namespace decert {

// Fixed fixture timeline. The TLS-facing chains get wide windows so live
// handshakes keep working under a wall clock; expiry behavior is carried by
// the expired and shortlived fixtures together with injected validation
// times.
namespace fixture_times {
constexpr int64_t kCaNotBefore = 1704067200;         // 2024-01-01T00:00:00Z
constexpr int64_t kCaNotAfter = 2208988800;          // 2040-01-01T00:00:00Z
constexpr int64_t kChainNotBefore = 1735689600;      // 2025-01-01T00:00:00Z
constexpr int64_t kChainNotAfter = 2051222400;       // 2035-01-01T00:00:00Z
constexpr int64_t kExpiredNotAfter = 1735776000;     // 2025-01-02T00:00:00Z
constexpr int64_t kShortlivedIssuedAt = 1748736000;  // 2025-06-01T00:00:00Z
constexpr int64_t kRevokedAt = 1735693200;           // 2025-01-01T01:00:00Z
}  // namespace fixture_times

// Materializes the figure and proof-of-concept chains plus the expected-
// outcomes manifest under out_dir:
//   anchors.pem, expected_outcomes.tsv, fixtures.json, ca/,
//   fig1/, fig2a/, fig2b/, poc/, expired/, revoked/, shortlived/
// Each fixture directory holds chain.pem (leaf first, no root) and server.key.
// Generation is deterministic: equal seeds produce byte-identical PEMs.
// Returns the manifest path.
std::filesystem::path generate_fixtures(const std::filesystem::path &out_dir, uint64_t seed = 42);

}  // namespace decert
