#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "outact/nnet.hpp"
#include "outact/sample.hpp"

namespace outact {

// Both formats are little-endian regardless of host byte order.
//
// Classifier ("ACTS"):
//   char[4] "ACTS" | u32 version = 1 | u32 layer_count
//   per layer: u32 out | u32 in | f64 weights[out * in] (row-major) | f64 bias[out]
//
// Dataset ("ACTD"):
//   char[4] "ACTD" | u32 version = 1 | u32 image_count | u32 pixels | u32 feature_dim
//   per image: f64 features[pixels * feature_dim] (row-major) | u8 mask[pixels]

inline constexpr std::uint32_t kFormatVersion = 1;

void write_classifier(std::ostream& out, const PixelClassifier& net);
PixelClassifier read_classifier(std::istream& in);
void save_classifier(const std::filesystem::path& path, const PixelClassifier& net);
PixelClassifier load_classifier(const std::filesystem::path& path);

void write_samples(std::ostream& out, const std::vector<Sample>& samples);
std::vector<Sample> read_samples(std::istream& in);
void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> load_samples(const std::filesystem::path& path);

/// Raw little-endian f64 values, no header.
std::vector<double> load_f64_array(const std::filesystem::path& path);
void save_f64_array(const std::filesystem::path& path, const std::vector<double>& values);

/// Numbers separated by commas, whitespace or newlines; '#' starts a comment
/// and a non-numeric first line is taken as a header.
std::vector<double> load_csv_array(const std::filesystem::path& path);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace outact
