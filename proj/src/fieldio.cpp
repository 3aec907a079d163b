#include "patk/fieldio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace patk {
namespace {

constexpr char kMagic[4] = {'P', 'A', 'T', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + static_cast<std::size_t>(b)]) << (8 * b);
  return v;
}

std::size_t element_count(std::span<const std::uint32_t> dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

std::vector<std::uint8_t> encode_raw(const RawField& field) {
  if (element_count(field.dims) != field.values.size())
    throw ConfigError("raw field: dims do not match the number of values");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(12 + 4 * field.dims.size() + 4 * field.values.size());
  put_u32(out, kRawFieldVersion);
  put_u32(out, static_cast<std::uint32_t>(field.dims.size()));
  for (auto d : field.dims) put_u32(out, d);
  for (float v : field.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

RawField decode_raw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("raw field: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("raw field: bad magic");
  const auto version = get_u32(bytes, 4);
  if (version != kRawFieldVersion) throw FormatError("raw field: unsupported version " + std::to_string(version));
  const auto ndim = get_u32(bytes, 8);
  if (ndim == 0 || ndim > 8) throw FormatError("raw field: bad dimension count");
  const std::size_t header = 12 + 4 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw FormatError("raw field: truncated header");

  RawField f;
  for (std::uint32_t d = 0; d < ndim; ++d) f.dims.push_back(get_u32(bytes, 12 + 4 * d));
  const std::size_t n = element_count(f.dims);
  if (bytes.size() - header != 4 * n)
    throw FormatError("raw field: payload is " + std::to_string(bytes.size() - header) + " bytes, expected " +
                      std::to_string(4 * n));
  f.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) f.values[k] = std::bit_cast<float>(get_u32(bytes, header + 4 * k));
  return f;
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_raw(const std::filesystem::path& path, const RawField& field) {
  const auto bytes = encode_raw(field);
  write_file(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

RawField read_raw(const std::filesystem::path& path) {
  try {
    return decode_raw(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_image(const std::filesystem::path& path, const Image& f) {
  RawField r{{static_cast<std::uint32_t>(f.nx()), static_cast<std::uint32_t>(f.ny())}, {}};
  r.values.assign(f.values().begin(), f.values().end());
  write_raw(path, r);
}

Image read_image(const std::filesystem::path& path) {
  const RawField r = read_raw(path);
  if (r.dims.size() != 2) throw FormatError(path.string() + ": expected a 2D image");
  Image f(r.dims[0], r.dims[1]);
  std::copy(r.values.begin(), r.values.end(), f.values().begin());
  return f;
}

void write_timeseries(const std::filesystem::path& path, const TimeSeries& g) {
  RawField r{{static_cast<std::uint32_t>(g.n_det()), static_cast<std::uint32_t>(g.n_t())}, {}};
  r.values.assign(g.values().begin(), g.values().end());
  write_raw(path, r);
}

TimeSeries read_timeseries(const std::filesystem::path& path) {
  const RawField r = read_raw(path);
  if (r.dims.size() != 2) throw FormatError(path.string() + ": expected detector-by-time data");
  TimeSeries g(r.dims[0], r.dims[1]);
  std::copy(r.values.begin(), r.values.end(), g.values().begin());
  return g;
}

void write_pgm(const std::filesystem::path& path, const Image& f) {
  std::string out = "P5\n" + std::to_string(f.ny()) + " " + std::to_string(f.nx()) + "\n255\n";
  double lo = 0.0, hi = 0.0;
  if (!f.empty()) {
    const auto [a, b] = std::minmax_element(f.values().begin(), f.values().end());
    lo = *a;
    hi = *b;
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (double v : f.values()) {
    const double q = std::isfinite(v) ? std::clamp((v - lo) * scale, 0.0, 255.0) : 0.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(q))));
  }
  write_file(path, out);
}

}  // namespace patk
