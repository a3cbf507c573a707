#include "decert/harness.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <openssl/ssl.h>

#include "decert/clock.hpp"
#include "decert/error.hpp"
#include "openssl_util.hpp"

namespace decert {

namespace {

struct SslCtxDeleter {
    void operator()(SSL_CTX *p) const { SSL_CTX_free(p); }
    void operator()(SSL *p) const { SSL_free(p); }
};
template <typename T>
using SslPtr = std::unique_ptr<T, SslCtxDeleter>;

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

int open_client_socket(const std::string &address, uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(ErrorCode::NetworkError, "socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw Error(ErrorCode::NetworkError, "bad address " + address);
    }
    if (::connect(fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw Error(ErrorCode::NetworkError, "connect to " + address + ":" + std::to_string(port) +
                                                 " failed: " + std::strerror(errno));
    }
    return fd;
}

}  // namespace

struct TlsServer::Impl {
    std::string address;
    uint16_t port = 0;
    int listen_fd = -1;
    SslPtr<SSL_CTX> ctx;
    std::atomic<bool> stopping{false};
    std::thread acceptor;
    std::mutex workers_mutex;
    std::vector<std::thread> workers;

    ~Impl() { shutdown(); }

    void shutdown() {
        bool was_stopping = stopping.exchange(true);
        if (!was_stopping && listen_fd >= 0) ::shutdown(listen_fd, SHUT_RDWR);
        if (acceptor.joinable()) acceptor.join();
        if (!was_stopping && listen_fd >= 0) {
            ::close(listen_fd);
            listen_fd = -1;
        }
        std::vector<std::thread> drained;
        {
            std::lock_guard lock(workers_mutex);
            drained.swap(workers);
        }
        for (auto &worker : drained)
            if (worker.joinable()) worker.join();
    }

    void serve_connection(int fd) {
        SslPtr<SSL> ssl(SSL_new(ctx.get()));
        if (!ssl) {
            ::close(fd);
            return;
        }
        SSL_set_fd(ssl.get(), fd);
        if (SSL_accept(ssl.get()) == 1) {
            char buffer[4096];
            int got = SSL_read(ssl.get(), buffer, sizeof(buffer));
            if (got > 0) {
                std::string body(TlsServer::kPageBody);
                std::string response = "HTTP/1.1 200 OK\r\ncontent-type: text/html\r\n"
                                       "content-length: " +
                                       std::to_string(body.size()) +
                                       "\r\nconnection: close\r\n\r\n" + body;
                SSL_write(ssl.get(), response.data(), static_cast<int>(response.size()));
            }
            SSL_shutdown(ssl.get());
        }
        ERR_clear_error();
        ::close(fd);
    }

    void accept_loop() {
        while (!stopping.load()) {
            int fd = ::accept(listen_fd, nullptr, nullptr);
            if (fd < 0) {
                if (stopping.load()) break;
                continue;
            }
            std::lock_guard lock(workers_mutex);
            workers.emplace_back([this, fd] { serve_connection(fd); });
        }
    }
};

TlsServer::TlsServer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
TlsServer::TlsServer(TlsServer &&) noexcept = default;
TlsServer &TlsServer::operator=(TlsServer &&) noexcept = default;
TlsServer::~TlsServer() = default;

uint16_t TlsServer::port() const { return impl_->port; }
const std::string &TlsServer::address() const { return impl_->address; }
void TlsServer::stop() { impl_->shutdown(); }

TlsServer TlsServer::start(const std::vector<ParsedCertificate> &chain, const PrivateKey &key,
                           const std::string &address, uint16_t port) {
    if (chain.empty()) throw Error(ErrorCode::ChainMalformed, "server chain is empty");
    ignore_sigpipe();

    auto impl = std::make_unique<Impl>();
    impl->address = address;
    impl->ctx.reset(SSL_CTX_new(TLS_server_method()));
    if (!impl->ctx) ossl::fail(ErrorCode::BindFailure, "SSL_CTX_new failed");
    SSL_CTX_set_min_proto_version(impl->ctx.get(), TLS1_3_VERSION);

    if (SSL_CTX_use_certificate(impl->ctx.get(), chain[0].handle()) != 1)
        ossl::fail(ErrorCode::KeyMismatch, "leaf certificate rejected");
    for (size_t i = 1; i < chain.size(); ++i) {
        X509_up_ref(chain[i].handle());
        if (SSL_CTX_add_extra_chain_cert(impl->ctx.get(), chain[i].handle()) != 1) {
            X509_free(chain[i].handle());
            ossl::fail(ErrorCode::BindFailure, "chain certificate rejected");
        }
    }
    if (SSL_CTX_use_PrivateKey(impl->ctx.get(), key.handle()) != 1 ||
        SSL_CTX_check_private_key(impl->ctx.get()) != 1)
        ossl::fail(ErrorCode::KeyMismatch, "private key does not match the leaf certificate");

    impl->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (impl->listen_fd < 0) throw Error(ErrorCode::BindFailure, "socket() failed");
    int reuse = 1;
    setsockopt(impl->listen_fd, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof(reuse));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1)
        throw Error(ErrorCode::BindFailure, "bad address " + address);
    if (::bind(impl->listen_fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0 ||
        ::listen(impl->listen_fd, 16) != 0)
        throw Error(ErrorCode::BindFailure,
                    "cannot listen on " + address + ":" + std::to_string(port) + ": " +
                        std::strerror(errno));

    sockaddr_in bound{};
    socklen_t bound_len = sizeof(bound);
    getsockname(impl->listen_fd, reinterpret_cast<sockaddr *>(&bound), &bound_len);
    impl->port = ntohs(bound.sin_port);

    Impl *raw = impl.get();
    impl->acceptor = std::thread([raw] { raw->accept_loop(); });
    return TlsServer(std::move(impl));
}

TlsServer TlsServer::start_from_files(const std::filesystem::path &chain_pem,
                                      const std::filesystem::path &key_pem,
                                      const std::string &address, uint16_t port) {
    return start(load_pem_certificates(chain_pem), PrivateKey::load(key_pem), address, port);
}

namespace {

struct ProbeState {
    const ProbeOptions *options = nullptr;
    const std::vector<ParsedCertificate> *anchors = nullptr;
    DomainName hostname;
    std::optional<ValidationReport> report;
};

int probe_verify_callback(X509_STORE_CTX *store_ctx, void *arg) {
    auto *state = static_cast<ProbeState *>(arg);

    ValidationInput input;
    input.trust_anchors = *state->anchors;
    input.hostname = state->hostname;
    input.at = state->options->at ? *state->options->at : system_clock()();
    input.mode = state->options->mode;
    input.revocation = state->options->revocation;
    input.crls = state->options->crls;
    input.resolver = state->options->resolver;
    input.config = state->options->config;

    STACK_OF(X509) *untrusted = X509_STORE_CTX_get0_untrusted(store_ctx);
    try {
        for (int i = 0; i < sk_X509_num(untrusted); ++i) {
            X509 *x = sk_X509_value(untrusted, i);
            int size = i2d_X509(x, nullptr);
            std::vector<uint8_t> der(static_cast<size_t>(size));
            unsigned char *p = der.data();
            i2d_X509(x, &p);
            input.chain.push_back(parse_certificate_der(der));
        }
        state->report = validate_chain(input);
    } catch (const Error &e) {
        ValidationReport report;
        report.verdict = Verdict::Reject;
        report.violations = {{0, ViolationCode::ChainMalformed, e.what()}};
        state->report = report;
    }

    if (state->report->verdict == Verdict::Accept) return 1;
    X509_STORE_CTX_set_error(store_ctx, X509_V_ERR_APPLICATION_VERIFICATION);
    return 0;
}

}  // namespace

HandshakeOutcome probe(const DomainName &hostname, const std::string &address, uint16_t port,
                       const std::vector<ParsedCertificate> &trust_anchors,
                       const ProbeOptions &options) {
    ignore_sigpipe();

    SslPtr<SSL_CTX> ctx(SSL_CTX_new(TLS_client_method()));
    if (!ctx) ossl::fail(ErrorCode::NetworkError, "SSL_CTX_new failed");
    SSL_CTX_set_min_proto_version(ctx.get(), TLS1_3_VERSION);

    ProbeState state{&options, &trust_anchors, hostname, std::nullopt};
    SSL_CTX_set_cert_verify_callback(ctx.get(), probe_verify_callback, &state);

    int fd = open_client_socket(address, port);
    SslPtr<SSL> ssl(SSL_new(ctx.get()));
    SSL_set_fd(ssl.get(), fd);
    SSL_set_tlsext_host_name(ssl.get(), hostname.text().c_str());

    HandshakeOutcome outcome;
    int rc = SSL_connect(ssl.get());
    if (rc != 1) {
        std::string reason = ossl::last_error();
        ::close(fd);
        if (state.report && state.report->verdict == Verdict::Reject) {
            outcome.connected = false;
            outcome.alert_or_error = reason;
            outcome.report = state.report;
            return outcome;
        }
        throw Error(ErrorCode::NetworkError, "TLS handshake failed: " + reason);
    }

    std::string request = "GET / HTTP/1.1\r\nhost: " + hostname.text() +
                          "\r\nconnection: close\r\n\r\n";
    SSL_write(ssl.get(), request.data(), static_cast<int>(request.size()));
    std::string response;
    char buffer[4096];
    for (int got; (got = SSL_read(ssl.get(), buffer, sizeof(buffer))) > 0;)
        response.append(buffer, static_cast<size_t>(got));
    SSL_shutdown(ssl.get());
    ERR_clear_error();
    ::close(fd);

    outcome.connected = true;
    outcome.report = state.report;
    size_t split = response.find("\r\n\r\n");
    outcome.page_body = split == std::string::npos ? response : response.substr(split + 4);
    return outcome;
}

std::vector<const CorpusCell *> CorpusResult::mismatches() const {
    std::vector<const CorpusCell *> out;
    for (const auto &cell : cells)
        if (!cell.matches()) out.push_back(&cell);
    return out;
}

std::string_view validation_mode_name(ValidationMode mode) {
    return mode == ValidationMode::Strict ? "strict" : "aware";
}

std::optional<ValidationMode> validation_mode_from_name(std::string_view name) {
    if (name == "aware" || name == "decert-aware") return ValidationMode::DeCertAware;
    if (name == "strict") return ValidationMode::Strict;
    return std::nullopt;
}

namespace {

std::set<ViolationCode> parse_codes_csv(const std::string &csv) {
    std::set<ViolationCode> out;
    if (csv == "-" || csv.empty()) return out;
    size_t pos = 0;
    while (pos <= csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        auto code = violation_code_from_name(csv.substr(pos, comma - pos));
        if (!code) throw Error(ErrorCode::IoError, "unknown violation code in manifest: " + csv);
        out.insert(*code);
        pos = comma + 1;
        if (comma == csv.size()) break;
    }
    return out;
}

}  // namespace

CorpusResult run_corpus(const std::filesystem::path &corpus_dir) {
    auto manifest_path = corpus_dir / "expected_outcomes.tsv";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw Error(ErrorCode::IoError, "cannot open " + manifest_path.string());

    auto anchors = load_pem_certificates(corpus_dir / "anchors.pem");

    std::vector<CorpusCell> cells;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string fixture, hostname, mode_name, verdict_name, codes_csv;
        if (!std::getline(fields, fixture, '\t') || !std::getline(fields, hostname, '\t') ||
            !std::getline(fields, mode_name, '\t') || !std::getline(fields, verdict_name, '\t') ||
            !std::getline(fields, codes_csv))
            throw Error(ErrorCode::IoError, "unparseable manifest line: " + line);
        auto mode = validation_mode_from_name(mode_name);
        if (!mode || (verdict_name != "Accept" && verdict_name != "Reject"))
            throw Error(ErrorCode::IoError, "unparseable manifest line: " + line);

        CorpusCell cell;
        cell.fixture = fixture;
        cell.hostname = hostname;
        cell.mode = *mode;
        cell.expected_verdict = verdict_name == "Accept" ? Verdict::Accept : Verdict::Reject;
        cell.expected_codes = parse_codes_csv(codes_csv);
        cells.push_back(std::move(cell));
    }

    CorpusResult result;
    std::string current_fixture;
    std::optional<TlsServer> server;
    for (auto &cell : cells) {
        if (cell.fixture != current_fixture) {
            server.reset();
            server.emplace(TlsServer::start_from_files(corpus_dir / cell.fixture / "chain.pem",
                                                       corpus_dir / cell.fixture / "server.key"));
            current_fixture = cell.fixture;
        }
        ProbeOptions options;
        options.mode = cell.mode;
        auto outcome = probe(DomainName::parse(cell.hostname), server->address(), server->port(),
                             anchors, options);
        cell.actual_verdict = outcome.connected ? Verdict::Accept : Verdict::Reject;
        if (outcome.report) cell.actual_codes = outcome.report->codes();
        result.cells.push_back(cell);
    }
    server.reset();

    auto mismatched = result.mismatches();
    if (!mismatched.empty()) {
        std::string detail;
        for (const auto *cell : mismatched) {
            detail += "\n  " + cell->fixture + " " + cell->hostname + " " +
                      std::string(validation_mode_name(cell->mode)) + ": expected " +
                      (cell->expected_verdict == Verdict::Accept ? "Accept" : "Reject");
            for (auto code : cell->expected_codes)
                detail += " " + std::string(violation_code_name(code));
            detail += ", got " + std::string(cell->actual_verdict == Verdict::Accept ? "Accept" : "Reject");
            for (auto code : cell->actual_codes)
                detail += " " + std::string(violation_code_name(code));
        }
        throw Error(ErrorCode::CorpusMismatch, "deviating cells:" + detail);
    }
    return result;
}

}  // namespace decert
