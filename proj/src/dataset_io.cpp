#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mtda/data.hpp"
#include "mtda/errors.hpp"

namespace mtda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr std::uint32_t kIdxImages3 = 0x00000803;
constexpr std::uint32_t kIdxImages4 = 0x00000804;

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const fs::path& path) {
  if (offset + 4 > buf.size()) throw FormatError("'" + path.string() + "' is truncated");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v >> 24));
  buf.push_back(static_cast<unsigned char>(v >> 16));
  buf.push_back(static_cast<unsigned char>(v >> 8));
  buf.push_back(static_cast<unsigned char>(v));
}

static_assert(std::endian::native == std::endian::little, "raw tensor files assume little-endian hosts");

}  // namespace

DomainDataset load_idx_dataset(const fs::path& images_path, const std::optional<fs::path>& labels_path,
                               std::string domain_id, std::size_t num_classes) {
  const auto img = read_file(images_path);
  const std::uint32_t magic = read_be32(img, 0, images_path);
  if (magic != kIdxImages3 && magic != kIdxImages4)
    throw FormatError("'" + images_path.string() + "' has bad image magic 0x" +
                      [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", magic); return std::string(b); }());
  const std::size_t n = read_be32(img, 4, images_path);
  ImageShape shape{read_be32(img, 8, images_path), read_be32(img, 12, images_path), 1};
  std::size_t header = 16;
  if (magic == kIdxImages4) {
    shape.channels = read_be32(img, 16, images_path);
    header = 20;
  }
  if (img.size() != header + n * shape.pixels())
    throw FormatError("'" + images_path.string() + "' size does not match its header");
  std::vector<float> pixels(n * shape.pixels());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(img[header + i]) / 255.0f;

  std::optional<std::vector<int>> labels;
  if (labels_path) {
    const auto lab = read_file(*labels_path);
    if (read_be32(lab, 0, *labels_path) != kIdxLabels)
      throw FormatError("'" + labels_path->string() + "' has bad label magic");
    const std::size_t m = read_be32(lab, 4, *labels_path);
    if (lab.size() != 8 + m) throw FormatError("'" + labels_path->string() + "' size does not match its header");
    if (m != n)
      throw ConsistencyError("label count " + std::to_string(m) + " != image count " + std::to_string(n));
    labels.emplace(lab.begin() + 8, lab.end());
  }
  DomainDataset d(std::move(domain_id), num_classes, shape, std::move(pixels), std::move(labels));
  d.set_provenance(json{{"source", "idx"}, {"images", images_path.string()}}.dump());
  return d;
}

void write_idx_images(const DomainDataset& data, const fs::path& path) {
  const ImageShape& s = data.shape();
  std::vector<unsigned char> buf;
  put_be32(buf, s.channels == 1 ? kIdxImages3 : kIdxImages4);
  put_be32(buf, static_cast<std::uint32_t>(data.size()));
  put_be32(buf, static_cast<std::uint32_t>(s.height));
  put_be32(buf, static_cast<std::uint32_t>(s.width));
  if (s.channels != 1) put_be32(buf, static_cast<std::uint32_t>(s.channels));
  for (float v : data.pixels())
    buf.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  write_file(path, buf.data(), buf.size());
}

void write_idx_labels(const std::vector<int>& labels, const fs::path& path) {
  std::vector<unsigned char> buf;
  put_be32(buf, kIdxLabels);
  put_be32(buf, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw ArgumentError("IDX labels must fit in one byte");
    buf.push_back(static_cast<unsigned char>(y));
  }
  write_file(path, buf.data(), buf.size());
}

void save_dataset_dir(const DomainDataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  json meta{{"format_version", kDatasetFormatVersion},
            {"domain_id", data.domain_id()},
            {"num_classes", data.num_classes()},
            {"shape", {data.shape().height, data.shape().width, data.shape().channels}},
            {"count", data.size()},
            {"labeled", data.has_labels()}};
  if (!data.provenance().empty()) meta["generation"] = json::parse(data.provenance());
  const std::string text = meta.dump(2) + "\n";
  write_file(dir / "meta.json", text.data(), text.size());
  write_file(dir / "images.f32", data.pixels().data(), data.pixels().size() * sizeof(float));
  if (data.has_labels()) {
    std::vector<std::int32_t> ys(data.labels().begin(), data.labels().end());
    write_file(dir / "labels.i32", ys.data(), ys.size() * sizeof(std::int32_t));
  }
}

DomainDataset load_dataset_dir(const fs::path& dir) {
  json meta;
  try {
    const auto raw = read_file(dir / "meta.json");
    meta = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw FormatError("'" + (dir / "meta.json").string() + "': " + e.what());
  }
  try {
    if (meta.at("format_version").get<int>() != kDatasetFormatVersion)
      throw FormatError("unsupported dataset format version in '" + dir.string() + "'");
    const auto dims = meta.at("shape").get<std::vector<std::size_t>>();
    if (dims.size() != 3) throw FormatError("dataset shape must have 3 entries");
    const ImageShape shape{dims[0], dims[1], dims[2]};
    const auto count = meta.at("count").get<std::size_t>();

    const auto img = read_file(dir / "images.f32");
    if (img.size() != count * shape.pixels() * sizeof(float))
      throw FormatError("'" + (dir / "images.f32").string() + "' size does not match meta.json");
    std::vector<float> pixels(count * shape.pixels());
    std::memcpy(pixels.data(), img.data(), img.size());

    std::optional<std::vector<int>> labels;
    if (meta.at("labeled").get<bool>()) {
      const auto lab = read_file(dir / "labels.i32");
      if (lab.size() != count * sizeof(std::int32_t))
        throw ConsistencyError("'" + (dir / "labels.i32").string() + "' count does not match images");
      std::vector<std::int32_t> ys(count);
      std::memcpy(ys.data(), lab.data(), lab.size());
      labels.emplace(ys.begin(), ys.end());
    }
    DomainDataset d(meta.at("domain_id").get<std::string>(), meta.at("num_classes").get<std::size_t>(),
                    shape, std::move(pixels), std::move(labels));
    if (meta.contains("generation")) d.set_provenance(meta["generation"].dump());
    return d;
  } catch (const json::exception& e) {
    throw FormatError("'" + (dir / "meta.json").string() + "': " + e.what());
  }
}

}  // namespace mtda
