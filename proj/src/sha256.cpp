#include "mergemine/sha256.hpp"

#include "mergemine/text_util.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace mergemine {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int digest_len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &digest_len, EVP_sha256(),
                   nullptr) != 1) {
        throw std::runtime_error("sha256: digest computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

std::string sha256_file_hex(const std::string& path) {
    return sha256_hex(read_file_bytes(path));
}

}  // namespace mergemine
