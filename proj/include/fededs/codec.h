#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fededs {

// Versioned little-endian binary container shared by all persisted records:
// "FEDS" magic, u16 format version, u16 record type, then the record body.
inline constexpr char kContainerMagic[4] = {'F', 'E', 'D', 'S'};
inline constexpr uint16_t kFormatVersion = 1;

enum class RecordType : uint16_t {
  kDataset = 1,
  kEncryptedDataset = 2,
  kPartition = 3,
  kStochasticLayer = 4,
  kParams = 5,
};

class ByteWriter {
 public:
  explicit ByteWriter(RecordType type);

  void U16(uint16_t v);
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F64(double v);
  void F64s(std::span<const double> values);
  // Writes a size as u32, rejecting values that do not fit.
  void Count(size_t n);

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

class ByteReader {
 public:
  // Validates the container header; `what` names the source in errors.
  ByteReader(std::span<const uint8_t> bytes, RecordType expected,
             std::string what);

  uint16_t U16();
  uint32_t U32();
  uint64_t U64();
  double F64();
  std::vector<double> F64s(size_t n);
  // Fails unless every byte has been consumed.
  void ExpectEnd() const;

 private:
  void Need(size_t n) const;

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  std::string what_;
};

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const uint8_t> bytes);

}  // namespace fededs
