#pragma once

// Versioned binary container shared by model and baseline checkpoints.
//
//   offset  size  field
//   0       4     magic "SASV"
//   4       4     format version (u32, currently 1)
//   8       4     payload type tag (u32)
//   12      8     payload length in bytes (u64)
//   20      n     payload
//   20+n    4     CRC-32 of bytes [0, 20+n)
//
// All integers are little-endian, reals are IEEE-754 binary64 stored as
// their little-endian bit pattern.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasv/core.hpp"

namespace sasv {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class PayloadType : std::uint32_t {
    IntegrationModel = 1,
    CascadeBaseline = 2,
    LogisticBaseline = 3,
};

class CheckpointError : public DataError {
public:
    enum class Kind { Truncated, BadMagic, Version, Checksum, WrongType, Malformed };

    CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    // Length-prefixed (u64) sequence of reals.
    void f64s(std::span<const double> values);

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

// Reads fail with CheckpointError(Malformed) when the payload runs out.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::vector<double> f64s();

    bool at_end() const { return pos_ == bytes_.size(); }
    // Throws CheckpointError(Malformed) if bytes are left over.
    void expect_end() const;

private:
    std::span<const std::uint8_t> take(std::size_t n);

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> wrap_payload(PayloadType type, std::span<const std::uint8_t> payload);
// Validates size, magic, version, checksum and type, in that order, and
// returns the payload bytes.
std::vector<std::uint8_t> unwrap_payload(std::span<const std::uint8_t> file, PayloadType expected);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace sasv
