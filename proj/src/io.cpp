#include "anc/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "anc/error.hpp"

namespace anc::io {

void BinaryWriter::magic(std::string_view four_chars) {
  if (four_chars.size() != 4) throw InvalidArgument("magic must be four characters");
  bytes_.insert(bytes_.end(), four_chars.begin(), four_chars.end());
}

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::f64s(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + 8 * values.size());
  for (double v : values) f64(v);
}

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void BinaryWriter::write_file(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing", "io");
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw Error("failed writing " + path.string(), "io");
}

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return BinaryReader(std::move(bytes), path.string());
}

BinaryReader::BinaryReader(std::vector<unsigned char> bytes, std::string origin)
    : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

void BinaryReader::need(std::size_t count) const {
  if (bytes_.size() - pos_ < count) throw FormatError(origin_ + ": unexpected end of file");
}

void BinaryReader::expect_magic(std::string_view four_chars) {
  need(4);
  if (std::memcmp(bytes_.data() + pos_, four_chars.data(), 4) != 0) {
    throw FormatError(origin_ + ": bad magic, expected \"" + std::string(four_chars) + "\"");
  }
  pos_ += 4;
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<double> BinaryReader::f64s(std::size_t count) {
  if (count > (bytes_.size() - pos_) / 8) throw FormatError(origin_ + ": declared length exceeds file size");
  std::vector<double> values(count);
  for (double& v : values) v = f64();
  return values;
}

std::string BinaryReader::string() {
  const std::uint32_t len = u32();
  need(len);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
  pos_ += len;
  return s;
}

void BinaryReader::expect_end() const {
  if (pos_ != bytes_.size()) throw FormatError(origin_ + ": trailing bytes after payload");
}

namespace {

void write_series(const std::filesystem::path& path, std::uint32_t rate, std::span<const double> values) {
  BinaryWriter w;
  w.magic("ANCS");
  w.u32(kSignalFormatVersion);
  w.u32(rate);
  w.u64(values.size());
  w.f64s(values);
  w.write_file(path);
}

std::pair<std::vector<double>, std::uint32_t> read_series(const std::filesystem::path& path) {
  auto r = BinaryReader::from_file(path);
  r.expect_magic("ANCS");
  if (const auto version = r.u32(); version != kSignalFormatVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t rate = r.u32();
  if (rate == 0) throw FormatError(path.string() + ": sample rate is zero");
  const std::uint64_t length = r.u64();
  auto values = r.f64s(length);
  r.expect_end();
  return {std::move(values), rate};
}

}  // namespace

void save_signal(const std::filesystem::path& path, const Signal& signal) {
  write_series(path, signal.sample_rate_hz(), signal.samples());
}

Signal load_signal(const std::filesystem::path& path) {
  auto [values, rate] = read_series(path);
  try {
    return Signal(std::move(values), rate);
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_impulse_response(const std::filesystem::path& path, const ImpulseResponse& ir) {
  write_series(path, ir.sample_rate_hz(), ir.taps());
}

ImpulseResponse load_impulse_response(const std::filesystem::path& path) {
  auto [values, rate] = read_series(path);
  try {
    return ImpulseResponse(std::move(values), rate);
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_csv_column(const std::filesystem::path& path, std::span<const double> values) {
  save_csv_table(path, {}, {values});
}

std::vector<double> load_csv_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    double v = 0.0;
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
    values.push_back(v);
  }
  return values;
}

void save_csv_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const std::vector<std::span<const double>>& columns) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing", "io");
  std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw InvalidArgument("CSV columns must have equal length");
  }
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
  }
  out << std::setprecision(17);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c][r];
    out << '\n';
  }
}

std::string sha256_bytes(std::span<const unsigned char> bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-256 computation failed", "io");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_bytes(bytes);
}

}  // namespace anc::io
