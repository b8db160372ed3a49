#include "hydramix/io/dataset_io.hpp"

#include <algorithm>
#include <set>

#include "hydramix/io/binary.hpp"
#include "hydramix/io/png.hpp"

namespace hydramix::io {

namespace fs = std::filesystem;
using classifier::LabeledDataset;
using numerics::ContractError;
using numerics::Tensor;
using segmentation::SegmentationMap;

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& n : class_names) {
    if (n.empty()) throw ContractError("manifest: empty class name");
    if (!seen.insert(n).second) throw ContractError("manifest: duplicate class name '" + n + "'");
  }
  if (format == DatasetFormat::raw_tensor && class_names.empty()) {
    throw ContractError("manifest: raw-tensor datasets need class_names");
  }
  if (channels != 0 && channels != 1 && channels != 3) {
    throw ContractError("manifest: channels must be 1 or 3");
  }
  if (normalization != "minus-one-one") {
    throw ContractError("manifest: unsupported normalization '" + normalization + "'");
  }
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  DatasetManifest m;
  for (auto& [key, value] : j.items()) {
    if (key == "root") m.root = value.get<std::string>();
    else if (key == "format") {
      const auto f = value.get<std::string>();
      if (f == "png-dir") m.format = DatasetFormat::png_dir;
      else if (f == "raw-tensor") m.format = DatasetFormat::raw_tensor;
      else throw ContractError("manifest: unknown format '" + f + "' (png-dir | raw-tensor)");
    } else if (key == "class_names") m.class_names = value.get<std::vector<std::string>>();
    else if (key == "image_size") {
      const auto s = value.get<std::vector<std::size_t>>();
      if (s.size() != 2) throw ContractError("manifest: image_size must be [H, W]");
      m.height = s[0];
      m.width = s[1];
    } else if (key == "channels") m.channels = value.get<std::size_t>();
    else if (key == "normalization") m.normalization = value.get<std::string>();
    else throw ContractError("manifest: unknown key '" + key + "'");
  }
  if (m.root.empty()) throw ContractError("manifest: root is required");
  if (m.root.is_relative()) m.root = base_dir / m.root;
  m.validate();
  return m;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  return {{"root", m.root.string()},
          {"format", m.format == DatasetFormat::png_dir ? "png-dir" : "raw-tensor"},
          {"class_names", m.class_names},
          {"image_size", {m.height, m.width}},
          {"channels", m.channels},
          {"normalization", m.normalization}};
}

DatasetManifest load_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

namespace {

void check_geometry(const DatasetManifest& m, std::size_t c, std::size_t h, std::size_t w,
                    const std::string& what) {
  if ((m.channels != 0 && c != m.channels) || (m.height != 0 && h != m.height) ||
      (m.width != 0 && w != m.width)) {
    throw ContractError(what + " is " + std::to_string(c) + "x" + std::to_string(h) + "x" +
                        std::to_string(w) + ", manifest expects " + std::to_string(m.channels) + "x" +
                        std::to_string(m.height) + "x" + std::to_string(m.width));
  }
}

LabeledDataset load_png_dir(const DatasetManifest& m) {
  if (!fs::is_directory(m.root)) throw IoError("dataset root '" + m.root.string() + "' is not a directory");
  std::vector<std::string> present;
  for (const auto& entry : fs::directory_iterator(m.root))
    if (entry.is_directory()) present.push_back(entry.path().filename().string());
  std::sort(present.begin(), present.end());

  LabeledDataset data;
  data.class_names = m.class_names.empty() ? present : m.class_names;
  for (const auto& p : present) {
    if (std::find(data.class_names.begin(), data.class_names.end(), p) == data.class_names.end()) {
      throw ContractError("dataset: directory '" + p + "' is not a known class");
    }
  }
  if (data.class_names.empty()) throw ContractError("dataset: no classes under '" + m.root.string() + "'");

  std::vector<float> values;
  std::size_t c = 0, h = 0, w = 0;
  for (std::size_t label = 0; label < data.class_names.size(); ++label) {
    const fs::path dir = m.root / data.class_names[label];
    if (!fs::is_directory(dir)) throw IoError("class directory '" + dir.string() + "' is missing");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const auto img = read_png(file);
      if (data.labels.empty()) {
        c = img.channels, h = img.height, w = img.width;
        check_geometry(m, c, h, w, "'" + file.string() + "'");
      } else if (img.channels != c || img.height != h || img.width != w) {
        throw ContractError("'" + file.string() + "' is " + std::to_string(img.channels) + "x" +
                            std::to_string(img.height) + "x" + std::to_string(img.width) +
                            ", earlier images are " + std::to_string(c) + "x" + std::to_string(h) +
                            "x" + std::to_string(w));
      }
      const auto t = to_tensor(img);
      values.insert(values.end(), t.values().begin(), t.values().end());
      data.labels.push_back(static_cast<int>(label));
      data.ids.push_back(data.class_names[label] + "/" + file.stem().string());
    }
  }
  if (data.labels.empty()) throw ContractError("dataset: no PNG images under '" + m.root.string() + "'");
  data.images = Tensor<float>({data.labels.size(), c, h, w}, std::move(values));
  data.rebuild_index();
  return data;
}

}  // namespace

LabeledDataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  if (manifest.format == DatasetFormat::png_dir) return load_png_dir(manifest);
  LabeledDataset data = load_raw_dataset(manifest.root);
  const int max_label = *std::max_element(data.labels.begin(), data.labels.end());
  if (static_cast<std::size_t>(max_label) >= manifest.class_names.size()) {
    throw ContractError("dataset: label " + std::to_string(max_label) + " has no class name (" +
                        std::to_string(manifest.class_names.size()) + " names)");
  }
  check_geometry(manifest, data.channels(), data.height(), data.width(), "raw dataset");
  data.class_names = manifest.class_names;
  data.rebuild_index();
  return data;
}

LabeledDataset load_dataset_path(const fs::path& path) {
  if (fs::is_directory(path)) {
    DatasetManifest m;
    m.root = path;
    return load_dataset(m);
  }
  if (path.extension() == ".json") return load_dataset(load_manifest(path));
  return load_raw_dataset(path);
}

std::vector<std::uint8_t> serialize_raw_dataset(const LabeledDataset& data) {
  data.validate();
  ByteWriter out;
  out.put_string("HMDS");
  out.put<std::uint32_t>(static_cast<std::uint32_t>(data.size()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(data.channels()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(data.height()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(data.width()));
  for (int y : data.labels) {
    if (y < 0 || y > 0xFFFF) throw ContractError("raw dataset: label does not fit in u16");
    out.put<std::uint16_t>(static_cast<std::uint16_t>(y));
  }
  out.put_array(data.images.values());
  return out.take();
}

LabeledDataset deserialize_raw_dataset(std::span<const std::uint8_t> bytes, const std::string& source) {
  ByteReader in(bytes, source);
  in.expect_magic("HMDS");
  const auto count = in.get<std::uint32_t>("image count");
  const auto c = in.get<std::uint32_t>("channels");
  const auto h = in.get<std::uint32_t>("height");
  const auto w = in.get<std::uint32_t>("width");
  if (count == 0 || c == 0 || h == 0 || w == 0) in.fail("zero-sized dataset header");
  const auto labels = in.get_array<std::uint16_t>(count, "labels");
  const std::uint64_t n = std::uint64_t{count} * c * h * w;
  auto values = in.get_array<float>(n, "image data");
  if (!in.at_end()) in.fail("trailing bytes after image data");

  LabeledDataset data;
  data.images = Tensor<float>({count, c, h, w}, std::move(values));
  const auto max_label = *std::max_element(labels.begin(), labels.end());
  for (std::size_t k = 0; k <= max_label; ++k) data.class_names.push_back("class" + std::to_string(k));
  for (std::size_t i = 0; i < count; ++i) {
    data.labels.push_back(labels[i]);
    data.ids.push_back(std::to_string(i));
  }
  data.rebuild_index();
  return data;
}

void save_raw_dataset(const fs::path& path, const LabeledDataset& data) {
  write_file_atomic(path, serialize_raw_dataset(data));
}

LabeledDataset load_raw_dataset(const fs::path& path) {
  return deserialize_raw_dataset(read_file(path), path.string());
}

std::vector<fs::path> save_png_dir(const fs::path& root, const LabeledDataset& data) {
  std::vector<fs::path> written;
  for (const auto& name : data.class_names) fs::create_directories(root / name);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& cls = data.class_names[static_cast<std::size_t>(data.labels[i])];
    std::string stem = data.ids.empty() ? std::to_string(i) : data.ids[i];
    if (auto slash = stem.rfind('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
    const fs::path file = root / cls / (stem + ".png");
    write_png(file, from_tensor(data.image(i)));
    written.push_back(file);
  }
  return written;
}

std::vector<std::uint8_t> serialize_segmentations(const std::vector<SegmentationMap>& segs) {
  if (segs.empty()) throw ContractError("segmentation bundle: no maps");
  ByteWriter out;
  out.put_string("HMSG");
  out.put<std::uint32_t>(1);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(segs.size()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(segs[0].height));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(segs[0].width));
  for (const auto& s : segs) {
    if (s.height != segs[0].height || s.width != segs[0].width) {
      throw ContractError("segmentation bundle: maps differ in size");
    }
    out.put_array(std::span<const std::uint32_t>(s.labels));
  }
  return out.take();
}

std::vector<SegmentationMap> deserialize_segmentations(std::span<const std::uint8_t> bytes,
                                                       const std::string& source) {
  ByteReader in(bytes, source);
  in.expect_magic("HMSG");
  const auto version = in.get<std::uint32_t>("version");
  if (version != 1) in.fail("unsupported segmentation version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("map count");
  const auto h = in.get<std::uint32_t>("height");
  const auto w = in.get<std::uint32_t>("width");
  std::vector<SegmentationMap> segs;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = in.offset();
    const auto labels = in.get_array<std::uint32_t>(std::size_t{h} * w, "labels");
    auto seg = SegmentationMap::from_labels(h, w, labels);
    if (seg.labels != labels) {
      throw FormatError(source + " at offset " + std::to_string(at) + ": map " + std::to_string(i) +
                        " is not densely labelled");
    }
    segs.push_back(std::move(seg));
  }
  if (!in.at_end()) in.fail("trailing bytes after the last map");
  return segs;
}

void save_segmentations(const fs::path& path, const std::vector<SegmentationMap>& segs,
                        const segmentation::SegParams& params, const std::vector<std::string>& ids) {
  write_file_atomic(path, serialize_segmentations(segs));
  std::vector<std::size_t> counts;
  for (const auto& s : segs) counts.push_back(s.segment_count());
  const nlohmann::json sidecar = {{"params", params}, {"ids", ids}, {"segment_counts", counts}};
  write_text_atomic(fs::path(path.string() + ".json"), sidecar.dump(2) + "\n");
}

std::vector<SegmentationMap> load_segmentations(const fs::path& path) {
  return deserialize_segmentations(read_file(path), path.string());
}

std::vector<SegmentationMap> segment_dataset(const LabeledDataset& data, const segmentation::SegParams& params) {
  std::vector<SegmentationMap> out;
  const std::size_t c = data.channels(), h = data.height(), w = data.width();
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> v(c * h * w);
    const auto img = data.image(i);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::clamp((img[k] + 1.0) / 2.0, 0.0, 1.0);
    out.push_back(segmentation::felzenszwalb(numerics::Tensor<double>({c, h, w}, std::move(v)), params));
  }
  return out;
}

}  // namespace hydramix::io

namespace hydramix::segmentation {

void to_json(nlohmann::json& j, const SegParams& p) {
  j = {{"k", p.k}, {"sigma", p.sigma}, {"min_size", p.min_size}};
}

void from_json(const nlohmann::json& j, SegParams& p) {
  p = SegParams{};
  for (auto& [key, value] : j.items()) {
    if (key == "k") p.k = value.get<double>();
    else if (key == "sigma") p.sigma = value.get<double>();
    else if (key == "min_size") p.min_size = value.get<int>();
    else throw numerics::ContractError("segmentation config: unknown key '" + key + "'");
  }
  p.validate();
}

}  // namespace hydramix::segmentation
