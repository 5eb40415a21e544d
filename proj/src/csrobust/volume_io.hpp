#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csrobust/image.hpp"

namespace csr {

// One fully described acquisition: multi-coil k-space, the coil maps used to
// simulate it, and the complex ground-truth image.
struct Volume {
  KSpaceVolume kspace;
  CoilSensitivities sens;
  ComplexImage target;
};

struct VolumeHeader {
  int n = 0;
  int n_coils = 0;
  std::vector<std::string> sections;
  std::size_t payload_offset = 0;
};

// KSV1 container: "KSV1", u32 LE header length, JSON header, then the listed
// sections as little-endian f32 (re, im) pairs, row-major, coils outermost.
void write_volume(const std::filesystem::path& path, const Volume& vol);
std::vector<std::uint8_t> encode_volume(const Volume& vol);

Volume read_volume(const std::filesystem::path& path);
Volume decode_volume(std::span<const std::uint8_t> bytes);
VolumeHeader decode_volume_header(std::span<const std::uint8_t> bytes);
VolumeHeader read_volume_header(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;  // resolved against the manifest directory
  int n = 0;
  int n_coils = 0;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  std::string family;
};

struct DatasetManifest {
  std::string domain;
  std::vector<ManifestEntry> volumes;
};

// Paths are stored relative to the manifest file when possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
// Loads and checks that every listed volume exists and has a parseable header
// matching the recorded dimensions.
DatasetManifest read_manifest(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace csr
