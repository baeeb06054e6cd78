#include "fededs/codec.h"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

#include "fededs/errors.h"

namespace fededs {

ByteWriter::ByteWriter(RecordType type) {
  bytes_.insert(bytes_.end(), std::begin(kContainerMagic), std::end(kContainerMagic));
  U16(kFormatVersion);
  U16(static_cast<uint16_t>(type));
}

void ByteWriter::U16(uint16_t v) {
  bytes_.push_back(static_cast<uint8_t>(v));
  bytes_.push_back(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::U32(uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::U64(uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::F64(double v) { U64(std::bit_cast<uint64_t>(v)); }

void ByteWriter::F64s(std::span<const double> values) {
  for (double v : values) F64(v);
}

void ByteWriter::Count(size_t n) {
  if (n > std::numeric_limits<uint32_t>::max()) {
    throw FormatError("count " + std::to_string(n) + " exceeds u32 range");
  }
  U32(static_cast<uint32_t>(n));
}

ByteReader::ByteReader(std::span<const uint8_t> bytes, RecordType expected,
                       std::string what)
    : bytes_(bytes), what_(std::move(what)) {
  Need(8);
  for (int i = 0; i < 4; ++i) {
    if (bytes_[i] != static_cast<uint8_t>(kContainerMagic[i])) {
      throw FormatError(what_ + ": missing FEDS magic");
    }
  }
  pos_ = 4;
  const uint16_t version = U16();
  if (version != kFormatVersion) {
    throw FormatError(what_ + ": unsupported format version " +
                      std::to_string(version));
  }
  const uint16_t type = U16();
  if (type != static_cast<uint16_t>(expected)) {
    throw FormatError(what_ + ": record type " + std::to_string(type) +
                      ", expected " +
                      std::to_string(static_cast<uint16_t>(expected)));
  }
}

void ByteReader::Need(size_t n) const {
  if (bytes_.size() - pos_ < n) throw FormatError(what_ + ": truncated record");
}

uint16_t ByteReader::U16() {
  Need(2);
  uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

uint32_t ByteReader::U32() {
  Need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::U64() {
  Need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::F64() { return std::bit_cast<double>(U64()); }

std::vector<double> ByteReader::F64s(size_t n) {
  Need(n * 8);
  std::vector<double> out(n);
  for (double& v : out) v = F64();
  return out;
}

void ByteReader::ExpectEnd() const {
  if (pos_ != bytes_.size()) throw FormatError(what_ + ": trailing bytes");
}

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace fededs
