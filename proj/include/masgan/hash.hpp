#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace masgan {

// Minimal SHA-256, enough for artifact digests in manifests and result files.
class Sha256 {
public:
    Sha256();
    void update(const void* data, size_t len);
    std::string hex_digest();

private:
    void process_block(const uint8_t* block);

    uint32_t h_[8];
    uint8_t buffer_[64];
    size_t buffer_len_ = 0;
    uint64_t total_len_ = 0;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

} // namespace masgan
