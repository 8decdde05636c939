#pragma once

#include <gmpxx.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "emailwallet/errors.hpp"
#include "emailwallet/sha256.hpp"
#include "emailwallet/util.hpp"

namespace emw {

struct RsaPublicKey {
    mpz_class n;
    mpz_class e;

    bool operator==(const RsaPublicKey& o) const { return n == o.n && e == o.e; }
};

struct RsaPrivateKey {
    mpz_class n;
    mpz_class e;
    mpz_class d;
};

inline std::size_t modulus_bytes(const mpz_class& n) {
    return (mpz_sizeinbase(n.get_mpz_t(), 2) + 7) / 8;
}

inline bytes mpz_to_bytes(const mpz_class& z, std::size_t width = 0) {
    if (z == 0) return bytes(width, '\0');
    std::size_t count = 0;
    std::size_t need = (mpz_sizeinbase(z.get_mpz_t(), 2) + 7) / 8;
    bytes raw(need, '\0');
    mpz_export(raw.data(), &count, 1, 1, 1, 0, z.get_mpz_t());
    raw.resize(count);
    if (width > count) raw.insert(raw.begin(), width - count, '\0');
    return raw;
}

inline mpz_class mpz_from_bytes(std::string_view data) {
    mpz_class z;
    if (!data.empty()) mpz_import(z.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
    return z;
}

// EMSA-PKCS1-v1_5 for SHA-256: 0x00 0x01 FF..FF 0x00 || DigestInfo || digest
inline bytes emsa_pkcs1v15_encode(const digest32& digest, std::size_t em_len) {
    static constexpr unsigned char digest_info[] = {
        0x30, 0x31, 0x30, 0x0d, 0x06, 0x09, 0x60, 0x86, 0x48, 0x01,
        0x65, 0x03, 0x04, 0x02, 0x01, 0x05, 0x00, 0x04, 0x20,
    };
    const std::size_t t_len = sizeof(digest_info) + digest.size();
    if (em_len < t_len + 11) fail(errc::key_too_small, "modulus shorter than encoding");
    bytes em;
    em.reserve(em_len);
    em.push_back('\0');
    em.push_back('\x01');
    em.append(em_len - t_len - 3, '\xff');
    em.push_back('\0');
    em.append(reinterpret_cast<const char*>(digest_info), sizeof(digest_info));
    em.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    return em;
}

inline bytes rsa_pkcs1v15_sign(const RsaPrivateKey& key, std::string_view digest) {
    if (digest.size() != 32) fail(errc::bad_digest_length, "digest must be 32 bytes");
    digest32 d;
    std::copy(digest.begin(), digest.end(), reinterpret_cast<char*>(d.data()));
    std::size_t em_len = modulus_bytes(key.n);
    mpz_class m = mpz_from_bytes(emsa_pkcs1v15_encode(d, em_len));
    mpz_class s;
    mpz_powm(s.get_mpz_t(), m.get_mpz_t(), key.d.get_mpz_t(), key.n.get_mpz_t());
    return mpz_to_bytes(s, em_len);
}

inline bytes rsa_pkcs1v15_sign(const RsaPrivateKey& key, const digest32& digest) {
    return rsa_pkcs1v15_sign(key, std::string_view(reinterpret_cast<const char*>(digest.data()),
                                                   digest.size()));
}

/// Strict verify: sig^e mod n must equal the full EMSA block byte for byte.
/// Never throws; malformed input is just "false".
inline bool rsa_pkcs1v15_verify(const RsaPublicKey& key, const digest32& digest,
                                std::string_view sig) {
    std::size_t em_len = modulus_bytes(key.n);
    if (sig.size() != em_len) return false;
    if (em_len < 62) return false;  // 19-byte DigestInfo + 32 + 11
    mpz_class s = mpz_from_bytes(sig);
    if (s >= key.n) return false;
    mpz_class m;
    mpz_powm(m.get_mpz_t(), s.get_mpz_t(), key.e.get_mpz_t(), key.n.get_mpz_t());
    return mpz_to_bytes(m, em_len) == emsa_pkcs1v15_encode(digest, em_len);
}

/// Deterministic keygen: the seed fully determines the keypair, so fixtures
/// are reproducible. Not suitable for production key material.
inline std::pair<RsaPublicKey, RsaPrivateKey> rsa_keygen(unsigned bits, std::string_view seed) {
    if (bits != 1024 && bits != 2048) fail(errc::bad_key_size, "bits must be 1024 or 2048");
    if (seed.empty()) fail(errc::bad_argument, "seed must be nonempty");

    gmp_randclass rng(gmp_randinit_default);
    rng.seed(mpz_from_bytes(digest_to_bytes(sha256(seed))));

    const mpz_class e = 65537;
    const unsigned pbits = bits / 2;
    auto gen_prime = [&](void) {
        for (;;) {
            mpz_class cand = rng.get_z_bits(pbits);
            // force full width so n = p*q has exactly `bits` bits
            mpz_setbit(cand.get_mpz_t(), pbits - 1);
            mpz_setbit(cand.get_mpz_t(), pbits - 2);
            mpz_class p;
            mpz_nextprime(p.get_mpz_t(), cand.get_mpz_t());
            if (mpz_sizeinbase(p.get_mpz_t(), 2) != pbits) continue;
            mpz_class g;
            mpz_gcd(g.get_mpz_t(), mpz_class(p - 1).get_mpz_t(), e.get_mpz_t());
            if (g != 1) continue;
            return p;
        }
    };

    mpz_class p = gen_prime();
    mpz_class q = gen_prime();
    while (q == p) q = gen_prime();

    mpz_class n = p * q;
    mpz_class phi = (p - 1) * (q - 1);
    mpz_class d;
    if (mpz_invert(d.get_mpz_t(), e.get_mpz_t(), phi.get_mpz_t()) == 0)
        fail(errc::bad_key_size, "e not invertible");  // excluded by gcd checks

    return {RsaPublicKey{n, e}, RsaPrivateKey{n, e, d}};
}

// --- key files: one field per line, n=/e=/d=, decimal or 0x-hex values ---

namespace detail {

inline mpz_class parse_key_int(std::string_view v) {
    mpz_class z;
    int rc;
    if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X'))
        rc = z.set_str(std::string(v.substr(2)), 16);
    else
        rc = z.set_str(std::string(v), 10);
    if (rc != 0) fail(errc::io_error, "bad integer in key file");
    return z;
}

struct KeyFields {
    bool has_n = false, has_e = false, has_d = false;
    mpz_class n, e, d;
};

inline KeyFields read_key_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open key file: " + path.string());
    KeyFields kf;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view sv = trim_wsp(line);
        if (sv.empty()) continue;
        auto eq = sv.find('=');
        if (eq == std::string_view::npos) fail(errc::io_error, "bad key file line");
        std::string_view name = trim_wsp(sv.substr(0, eq));
        std::string_view value = trim_wsp(sv.substr(eq + 1));
        if (name == "n") {
            kf.n = parse_key_int(value);
            kf.has_n = true;
        } else if (name == "e") {
            kf.e = parse_key_int(value);
            kf.has_e = true;
        } else if (name == "d") {
            kf.d = parse_key_int(value);
            kf.has_d = true;
        } else {
            fail(errc::io_error, "unknown key file field");
        }
    }
    return kf;
}

}  // namespace detail

inline void write_public_key(const std::filesystem::path& path, const RsaPublicKey& key) {
    std::ofstream out(path);
    if (!out) fail(errc::io_error, "cannot write key file: " + path.string());
    out << "n=0x" << key.n.get_str(16) << "\n";
    out << "e=" << key.e.get_str(10) << "\n";
}

inline void write_private_key(const std::filesystem::path& path, const RsaPrivateKey& key) {
    std::ofstream out(path);
    if (!out) fail(errc::io_error, "cannot write key file: " + path.string());
    out << "n=0x" << key.n.get_str(16) << "\n";
    out << "e=" << key.e.get_str(10) << "\n";
    out << "d=0x" << key.d.get_str(16) << "\n";
}

inline RsaPublicKey read_public_key(const std::filesystem::path& path) {
    auto kf = detail::read_key_file(path);
    if (!kf.has_n || !kf.has_e) fail(errc::io_error, "public key file needs n= and e=");
    return RsaPublicKey{kf.n, kf.e};
}

inline RsaPrivateKey read_private_key(const std::filesystem::path& path) {
    auto kf = detail::read_key_file(path);
    if (!kf.has_n || !kf.has_e || !kf.has_d)
        fail(errc::io_error, "private key file needs n=, e= and d=");
    return RsaPrivateKey{kf.n, kf.e, kf.d};
}

}  // namespace emw
