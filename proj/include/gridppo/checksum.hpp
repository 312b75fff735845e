#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <string_view>

#include <boost/crc.hpp>

namespace gridppo {

// CRC-32 of `bytes` as 8 lowercase hex digits.
inline std::string crc32_hex(std::string_view bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    std::array<char, 9> buf{};
    std::snprintf(buf.data(), buf.size(), "%08x", static_cast<unsigned>(crc.checksum()));
    return std::string(buf.data(), 8);
}

}  // namespace gridppo
