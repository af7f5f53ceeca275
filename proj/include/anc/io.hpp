#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anc/signal.hpp"

namespace anc::io {

/// Little-endian writer for the artifact formats. Values are encoded byte by
/// byte so files are identical regardless of host endianness.
class BinaryWriter {
 public:
  void magic(std::string_view four_chars);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> values);
  /// u32 byte length followed by the raw bytes.
  void string(std::string_view s);

  const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<unsigned char> bytes_;
};

class BinaryReader {
 public:
  /// Reads the whole file; throws MissingArtifact if it cannot be opened.
  static BinaryReader from_file(const std::filesystem::path& path);
  explicit BinaryReader(std::vector<unsigned char> bytes, std::string origin = "<memory>");

  /// Throws FormatError unless the next four bytes equal `four_chars`.
  void expect_magic(std::string_view four_chars);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<double> f64s(std::size_t count);
  std::string string();
  /// Throws FormatError if unread bytes remain.
  void expect_end() const;

  const std::string& origin() const noexcept { return origin_; }

 private:
  void need(std::size_t count) const;

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::string origin_;
};

inline constexpr std::uint32_t kSignalFormatVersion = 1;

/// "ANCS" file: magic, u32 version = 1, u32 sample_rate, u64 length, then
/// `length` float64 samples. Used for both signals and impulse responses.
void save_signal(const std::filesystem::path& path, const Signal& signal);
Signal load_signal(const std::filesystem::path& path);
void save_impulse_response(const std::filesystem::path& path, const ImpulseResponse& ir);
ImpulseResponse load_impulse_response(const std::filesystem::path& path);

/// One value per line, no header. Blank lines and lines starting with '#'
/// are skipped on read.
void save_csv_column(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> load_csv_column(const std::filesystem::path& path);

/// Writes several equal-length columns with a header row.
void save_csv_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::span<const double>>& columns);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::span<const unsigned char> bytes);

}  // namespace anc::io
