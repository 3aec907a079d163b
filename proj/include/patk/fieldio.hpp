#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "patk/field.hpp"

namespace patk {

/// Contents of a raw field file: "PATK", u32 version (1), u32 ndim,
/// u32 dims[ndim], then float32 payload, all little-endian, row-major.
struct RawField {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

inline constexpr std::uint32_t kRawFieldVersion = 1;

std::vector<std::uint8_t> encode_raw(const RawField& field);
RawField decode_raw(std::span<const std::uint8_t> bytes);

void write_raw(const std::filesystem::path& path, const RawField& field);
RawField read_raw(const std::filesystem::path& path);

/// Values are stored as float32.
void write_image(const std::filesystem::path& path, const Image& f);
Image read_image(const std::filesystem::path& path);
void write_timeseries(const std::filesystem::path& path, const TimeSeries& g);
TimeSeries read_timeseries(const std::filesystem::path& path);

/// 8-bit binary PGM, min-max normalized; rows follow the first image index.
void write_pgm(const std::filesystem::path& path, const Image& f);

/// Writes the whole buffer to `path` or throws.
void write_file(const std::filesystem::path& path, std::span<const char> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace patk
