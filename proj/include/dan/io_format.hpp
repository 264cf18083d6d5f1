#pragma once

// DANF (feature dump) and DANS (detector model) binary containers.
// All integers and floats are little-endian, fields are packed with no padding.
//
// DANF header (28 bytes):
//   "DANF" | u32 version=1 | u32 L | u32 d | u64 n | u32 C
// followed by n records of: i32 true_label | i32 predicted_label | L·d f32 (layer-major)
//
// DANS header (60 bytes):
//   "DANS" | u32 version=1 | u32 L | u32 d | u32 C | u8 aggregation | u8 normalization
//   | u16 reserved=0 | f64 ridge | f64 threshold (NaN = unset) | i32 target_label (-1 = unset)
//   | f64 split_fraction | u64 split_seed
// followed per layer by: C·d f32 centroids | d·d f32 cov_factor (row-major) | f64 norm_mean | f64 norm_std
//
// A non-negative ridge is an absolute ε; a negative value (sign bit set)
// stores −factor of a relative ridge ε = factor·trace(Σ̂)/d.

#include "dan/dan_score.hpp"
#include "dan/feature_bank.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dan {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint64_t kDanfHeaderBytes = 28;
inline constexpr std::uint64_t kDansHeaderBytes = 60;

std::uint64_t danf_file_size(std::uint64_t n_samples, std::uint64_t n_layers, std::uint64_t dim);
std::uint64_t dans_file_size(std::uint64_t n_layers, std::uint64_t dim, std::uint64_t n_classes);

std::vector<std::byte> encode_danf(const FeatureBank& bank);
FeatureBank decode_danf(std::span<const std::byte> bytes);

std::vector<std::byte> encode_dans(const DetectorModel& model);
DetectorModel decode_dans(std::span<const std::byte> bytes);

FeatureBank read_danf(const std::filesystem::path& path);
void write_danf(const FeatureBank& bank, const std::filesystem::path& path);

DetectorModel read_dans(const std::filesystem::path& path);
void write_dans(const DetectorModel& model, const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(std::span<const std::byte> bytes, const std::filesystem::path& path);

}  // namespace dan
