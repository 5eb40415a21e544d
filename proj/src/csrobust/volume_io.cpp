#include "csrobust/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace csr {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'K', 'S', 'V', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

void put_complex_f32(std::vector<std::uint8_t>& out, std::span<const cplx> values) {
  for (const auto& c : values) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(c.real())));
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(c.imag())));
  }
}

void get_complex_f32(std::span<const std::uint8_t> in, std::size_t at, std::span<cplx> values) {
  for (auto& c : values) {
    const float re = std::bit_cast<float>(get_u32(in, at));
    const float im = std::bit_cast<float>(get_u32(in, at + 4));
    c = {re, im};
    at += 8;
  }
}

std::size_t section_elements(const std::string& name, int n, int n_coils) {
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  if (name == "kspace" || name == "sens") return plane * n_coils;
  if (name == "target") return plane;
  return 0;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingInput, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to '" + path.string() + "'");
}

std::vector<std::uint8_t> encode_volume(const Volume& vol) {
  const int n = vol.target.width();
  require(vol.target.height() == n, ErrorCode::ShapeMismatch, "volume target must be square");
  require(vol.kspace.height() == n && vol.kspace.width() == n && vol.kspace.same_shape(vol.sens),
          ErrorCode::ShapeMismatch, "volume k-space, sensitivities and target shapes disagree");
  json header = {{"n", n}, {"n_coils", vol.kspace.n_coils()}, {"sections", {"kspace", "sens", "target"}}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  put_complex_f32(out, vol.kspace.values());
  put_complex_f32(out, vol.sens.values());
  put_complex_f32(out, vol.target.values());
  return out;
}

void write_volume(const std::filesystem::path& path, const Volume& vol) {
  write_file_bytes(path, encode_volume(vol));
}

VolumeHeader decode_volume_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError(bytes.size(), "truncated magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError(0, "bad magic, expected KSV1");
  if (bytes.size() < 8) throw ParseError(bytes.size(), "truncated header length");
  const std::uint32_t len = get_u32(bytes, 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(len))
    throw ParseError(4, "header length " + std::to_string(len) + " exceeds file size");

  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
  } catch (const json::parse_error& e) {
    throw ParseError(8 + (e.byte > 0 ? e.byte - 1 : 0), std::string("malformed JSON header: ") + e.what());
  }
  VolumeHeader h;
  try {
    h.n = header.at("n").get<int>();
    h.n_coils = header.at("n_coils").get<int>();
    h.sections = header.at("sections").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(8, std::string("invalid header fields: ") + e.what());
  }
  if (h.n <= 0 || h.n_coils <= 0) throw ParseError(8, "header dimensions must be positive");
  for (const auto& s : h.sections)
    if (section_elements(s, 1, 1) == 0) throw ParseError(8, "unknown section '" + s + "'");
  h.payload_offset = 8 + len;
  return h;
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  const VolumeHeader h = decode_volume_header(bytes);
  Volume vol{KSpaceVolume(h.n_coils, h.n, h.n), CoilSensitivities(h.n_coils, h.n, h.n), ComplexImage(h.n, h.n)};
  bool seen_k = false, seen_s = false, seen_t = false;
  std::size_t at = h.payload_offset;
  for (const auto& s : h.sections) {
    const std::size_t need = section_elements(s, h.n, h.n_coils) * 8;
    if (bytes.size() < at + need)
      throw ParseError(bytes.size(), "truncated '" + s + "' section: expected " + std::to_string(need) +
                                         " bytes from offset " + std::to_string(at));
    std::span<cplx> dst = s == "kspace" ? vol.kspace.values() : s == "sens" ? vol.sens.values() : vol.target.values();
    get_complex_f32(bytes, at, dst);
    (s == "kspace" ? seen_k : s == "sens" ? seen_s : seen_t) = true;
    at += need;
  }
  if (at != bytes.size()) throw ParseError(at, "unexpected trailing bytes after payload");
  if (!(seen_k && seen_s && seen_t)) throw ParseError(8, "header must list kspace, sens and target sections");
  return vol;
}

Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file_bytes(path)); }

VolumeHeader read_volume_header(const std::filesystem::path& path) {
  return decode_volume_header(read_file_bytes(path));
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const auto dir = std::filesystem::absolute(path).parent_path().lexically_normal();
  json vols = json::array();
  for (const auto& e : manifest.volumes) {
    auto rel = std::filesystem::absolute(e.path).lexically_normal().lexically_relative(dir);
    if (rel.empty()) rel = std::filesystem::absolute(e.path);
    json v = {{"id", e.id}, {"path", rel.generic_string()}, {"n", e.n}, {"n_coils", e.n_coils},
              {"seed", e.seed}, {"family", e.family}};
    v["snr_db"] = e.snr_db ? json(*e.snr_db) : json(nullptr);
    vols.push_back(v);
  }
  json doc = {{"domain", manifest.domain}, {"volumes", vols}};
  const std::string text = doc.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, "malformed manifest '" + path.string() + "'");
  }
  DatasetManifest m;
  try {
    m.domain = doc.at("domain").get<std::string>();
    const auto dir = path.parent_path();
    for (const auto& v : doc.at("volumes")) {
      ManifestEntry e;
      e.id = v.at("id").get<std::string>();
      std::filesystem::path p = v.at("path").get<std::string>();
      e.path = p.is_absolute() ? p : dir / p;
      e.n = v.at("n").get<int>();
      e.n_coils = v.at("n_coils").get<int>();
      e.seed = v.value("seed", std::uint64_t{0});
      e.family = v.value("family", std::string{});
      if (v.contains("snr_db") && !v["snr_db"].is_null()) e.snr_db = v["snr_db"].get<double>();
      m.volumes.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, "invalid manifest '" + path.string() + "': " + e.what());
  }
  for (const auto& e : m.volumes) {
    if (!std::filesystem::exists(e.path))
      fail(ErrorCode::MissingInput, "manifest lists missing volume '" + e.path.string() + "'");
    const auto h = read_volume_header(e.path);
    require(h.n == e.n && h.n_coils == e.n_coils, ErrorCode::Schema,
            "volume '" + e.id + "' header disagrees with manifest metadata");
  }
  return m;
}

}  // namespace csr
