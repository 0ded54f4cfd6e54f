#include "llmnas/digest.hpp"

#include <openssl/sha.h>

namespace llmnas {

Sha256 sha256(std::span<const std::uint8_t> bytes) {
    Sha256 out{};
    SHA256(bytes.data(), bytes.size(), out.data());
    return out;
}

Sha256 sha256(std::string_view text) {
    return sha256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

std::string sha256_hex(std::string_view text) { return to_hex(sha256(text)); }

}  // namespace llmnas
