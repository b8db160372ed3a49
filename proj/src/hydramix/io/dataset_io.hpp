#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hydramix/classifier/dataset.hpp"
#include "hydramix/segmentation/segmentation.hpp"

namespace hydramix::io {

enum class DatasetFormat { png_dir, raw_tensor };

/// Describes where a dataset lives and what it must look like.
///
/// JSON form: {"root": "...", "format": "png-dir" | "raw-tensor",
///  "class_names": [...], "image_size": [H, W], "channels": C,
///  "normalization": "minus-one-one"}. Relative roots resolve against the
/// manifest's directory. For png-dir, an empty class list means every
/// subdirectory of root in sorted order.
struct DatasetManifest {
  std::filesystem::path root;
  DatasetFormat format = DatasetFormat::png_dir;
  std::vector<std::string> class_names;
  std::size_t height = 0;  // 0: taken from the data
  std::size_t width = 0;
  std::size_t channels = 0;
  std::string normalization = "minus-one-one";

  void validate() const;
};

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Manifest file, raw-tensor file (*.hmds), or png-dir root, chosen by what `path` is.
classifier::LabeledDataset load_dataset_path(const std::filesystem::path& path);

classifier::LabeledDataset load_dataset(const DatasetManifest& manifest);

// Raw-tensor container: "HMDS", count u32, C u32, H u32, W u32, labels u16[count],
// then f32 values (count x C x H x W, row-major). Class names are not stored.
std::vector<std::uint8_t> serialize_raw_dataset(const classifier::LabeledDataset& data);
classifier::LabeledDataset deserialize_raw_dataset(std::span<const std::uint8_t> bytes,
                                                   const std::string& source = "<memory>");
void save_raw_dataset(const std::filesystem::path& path, const classifier::LabeledDataset& data);
classifier::LabeledDataset load_raw_dataset(const std::filesystem::path& path);

/// Writes root/<class>/<id>.png for every image; returns the written paths.
std::vector<std::filesystem::path> save_png_dir(const std::filesystem::path& root,
                                                const classifier::LabeledDataset& data);

// Segmentation bundle: "HMSG", version u32, count u32, H u32, W u32, then
// count x H x W u32 labels. A JSON sidecar (<path>.json) records the
// parameters, image ids, and per-image segment counts.
std::vector<std::uint8_t> serialize_segmentations(const std::vector<segmentation::SegmentationMap>& segs);
std::vector<segmentation::SegmentationMap> deserialize_segmentations(std::span<const std::uint8_t> bytes,
                                                                     const std::string& source = "<memory>");
void save_segmentations(const std::filesystem::path& path,
                        const std::vector<segmentation::SegmentationMap>& segs,
                        const segmentation::SegParams& params, const std::vector<std::string>& ids);
std::vector<segmentation::SegmentationMap> load_segmentations(const std::filesystem::path& path);

/// Felzenszwalb over every image of the dataset (values mapped from [-1, 1] to [0, 1]).
std::vector<segmentation::SegmentationMap> segment_dataset(const classifier::LabeledDataset& data,
                                                           const segmentation::SegParams& params);

}  // namespace hydramix::io

namespace hydramix::segmentation {

void to_json(nlohmann::json& j, const SegParams& p);
void from_json(const nlohmann::json& j, SegParams& p);

}  // namespace hydramix::segmentation
