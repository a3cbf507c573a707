#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "decert/certificate.hpp"
#include "decert/keys.hpp"
#include "decert/validation.hpp"

namespace decert {

struct HandshakeOutcome {
    bool connected = false;
    std::optional<std::string> alert_or_error;
    std::optional<ValidationReport> report;
    std::optional<std::string> page_body;
};

// Minimal TLS 1.3 HTTPS server presenting a fixed chain leaf-first and
// serving one small page. Connections are handled concurrently; stop() (or
// destruction) shuts the listener down and joins the workers.
class TlsServer {
  public:
    static TlsServer start(const std::vector<ParsedCertificate> &chain, const PrivateKey &key,
                           const std::string &address = "127.0.0.1", uint16_t port = 0);
    static TlsServer start_from_files(const std::filesystem::path &chain_pem,
                                      const std::filesystem::path &key_pem,
                                      const std::string &address = "127.0.0.1", uint16_t port = 0);

    TlsServer(TlsServer &&) noexcept;
    TlsServer &operator=(TlsServer &&) noexcept;
    ~TlsServer();

    [[nodiscard]] uint16_t port() const;
    [[nodiscard]] const std::string &address() const;
    void stop();

    static constexpr std::string_view kPageBody =
        "<html><body>fine-grained delegation demo page</body></html>";

  private:
    struct Impl;
    explicit TlsServer(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

struct ProbeOptions {
    ValidationMode mode = ValidationMode::DeCertAware;
    RevocationPolicyKind revocation = RevocationPolicyKind::None;
    std::vector<CrlDocument> crls;
    TxtResolver *resolver = nullptr;
    std::optional<int64_t> at;  // default: wall clock
    ValidatorConfig config;
};

// Performs a real TLS handshake with server-name = hostname against the given
// address, with chain verification delegated to validate_chain. A rejected
// chain aborts the handshake with a certificate alert and carries the report;
// transport failures throw Error{NetworkError} instead.
HandshakeOutcome probe(const DomainName &hostname, const std::string &address, uint16_t port,
                       const std::vector<ParsedCertificate> &trust_anchors,
                       const ProbeOptions &options = {});

struct CorpusCell {
    std::string fixture;
    std::string hostname;
    ValidationMode mode = ValidationMode::DeCertAware;
    Verdict expected_verdict = Verdict::Reject;
    std::set<ViolationCode> expected_codes;
    Verdict actual_verdict = Verdict::Reject;
    std::set<ViolationCode> actual_codes;

    [[nodiscard]] bool matches() const {
        return expected_verdict == actual_verdict && expected_codes == actual_codes;
    }
};

struct CorpusResult {
    std::vector<CorpusCell> cells;

    [[nodiscard]] std::vector<const CorpusCell *> mismatches() const;
};

// Runs every (fixture, hostname, mode) row of corpus_dir/expected_outcomes.tsv
// over live loopback TLS, one server per fixture. Throws Error{CorpusMismatch}
// naming every deviating cell.
CorpusResult run_corpus(const std::filesystem::path &corpus_dir);

std::string_view validation_mode_name(ValidationMode mode);
std::optional<ValidationMode> validation_mode_from_name(std::string_view name);

}  // namespace decert
