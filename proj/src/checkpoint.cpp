#include "sasv/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace sasv {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'A', 'S', 'V'};
constexpr std::size_t kHeaderSize = 20;
constexpr std::size_t kTrailerSize = 4;

std::uint32_t load_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint64_t load_u64(const std::uint8_t* p) {
    return static_cast<std::uint64_t>(load_u32(p)) | static_cast<std::uint64_t>(load_u32(p + 4)) << 32;
}

}  // namespace

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) {
    u64(std::bit_cast<std::uint64_t>(v));
}

void ByteWriter::f64s(std::span<const double> values) {
    u64(values.size());
    for (double v : values) f64(v);
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint payload is truncated");
    const auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::u8() {
    return take(1)[0];
}

std::uint32_t ByteReader::u32() {
    return load_u32(take(4).data());
}

std::uint64_t ByteReader::u64() {
    return load_u64(take(8).data());
}

double ByteReader::f64() {
    return std::bit_cast<double>(u64());
}

std::vector<double> ByteReader::f64s() {
    const std::uint64_t n = u64();
    if (n > (bytes_.size() - pos_) / 8) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint array length exceeds payload");
    }
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
}

void ByteReader::expect_end() const {
    if (!at_end()) throw CheckpointError(CheckpointError::Kind::Malformed, "trailing bytes in checkpoint payload");
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = ::crc32(crc, bytes.data() + pos, chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> wrap_payload(PayloadType type, std::span<const std::uint8_t> payload) {
    ByteWriter w;
    for (auto b : kMagic) w.u8(b);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(type));
    w.u64(payload.size());
    auto bytes = w.take();
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    const std::uint32_t crc = crc32(bytes);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return bytes;
}

std::vector<std::uint8_t> unwrap_payload(std::span<const std::uint8_t> file, PayloadType expected) {
    using Kind = CheckpointError::Kind;
    if (file.size() < kHeaderSize + kTrailerSize) throw CheckpointError(Kind::Truncated, "checkpoint file is truncated");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), file.begin())) {
        throw CheckpointError(Kind::BadMagic, "not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = load_u32(file.data() + 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::Version, "unsupported checkpoint version " + std::to_string(version) +
                                                 " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t length = load_u64(file.data() + 12);
    if (length != file.size() - kHeaderSize - kTrailerSize) {
        throw CheckpointError(Kind::Truncated, "checkpoint length field does not match file size");
    }
    const auto body = file.first(file.size() - kTrailerSize);
    if (crc32(body) != load_u32(file.data() + body.size())) {
        throw CheckpointError(Kind::Checksum, "checkpoint checksum mismatch");
    }
    const std::uint32_t type = load_u32(file.data() + 8);
    if (type != static_cast<std::uint32_t>(expected)) {
        throw CheckpointError(Kind::WrongType, "checkpoint holds payload type " + std::to_string(type) +
                                                   ", expected " + std::to_string(static_cast<std::uint32_t>(expected)));
    }
    const auto payload = file.subspan(kHeaderSize, static_cast<std::size_t>(length));
    return {payload.begin(), payload.end()};
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace sasv
