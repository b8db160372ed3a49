#include "hydramix/classifier/dataset.hpp"

#include <algorithm>

namespace hydramix::classifier {

using numerics::ContractError;

void LabeledDataset::rebuild_index() {
  class_index.assign(class_names.size(), {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
      throw ContractError("dataset: label " + std::to_string(labels[i]) + " of image " +
                          std::to_string(i) + " outside [0, " +
                          std::to_string(class_names.size()) + ")");
    }
    class_index[static_cast<std::size_t>(labels[i])].push_back(i);
  }
}

void LabeledDataset::validate() const {
  if (!images.defined() || images.rank() != 4) throw ContractError("dataset: images must be M x C x H x W");
  if (images.dim(0) != labels.size()) throw ContractError("dataset: image and label counts differ");
  if (!ids.empty() && ids.size() != labels.size()) throw ContractError("dataset: id count differs");
  if (class_index.size() != class_names.size()) throw ContractError("dataset: class index stale");
  std::size_t total = 0;
  for (std::size_t c = 0; c < class_index.size(); ++c) {
    if (!std::is_sorted(class_index[c].begin(), class_index[c].end())) {
      throw ContractError("dataset: class index not sorted");
    }
    for (std::size_t i : class_index[c]) {
      if (i >= labels.size() || labels[i] != static_cast<int>(c)) {
        throw ContractError("dataset: class index inconsistent with labels");
      }
    }
    total += class_index[c].size();
  }
  if (total != labels.size()) throw ContractError("dataset: class index does not cover every image");
}

numerics::Tensor<float> LabeledDataset::gather(const std::vector<std::size_t>& rows) const {
  const std::size_t row = images.size() / images.dim(0);
  std::vector<float> values(rows.size() * row);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(images.values().begin() + rows[r] * row, row, values.begin() + r * row);
  }
  return numerics::Tensor<float>({rows.size(), channels(), height(), width()}, std::move(values));
}

numerics::Tensor<float> LabeledDataset::image(std::size_t index) const {
  return gather({index});
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) throw ContractError("dataset: empty subset");
  LabeledDataset out;
  out.images = gather(rows);
  out.class_names = class_names;
  out.split = split;
  for (std::size_t r : rows) {
    out.labels.push_back(labels.at(r));
    if (!ids.empty()) out.ids.push_back(ids[r]);
  }
  out.rebuild_index();
  return out;
}

LabeledDataset subsample(const LabeledDataset& dataset, std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class == 0) throw ContractError("subsample: n_per_class must be >= 1");
  RngStream rng = RngStream(seed).split("subsample");
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < dataset.class_index.size(); ++c) {
    const auto& members = dataset.class_index[c];
    if (members.size() < n_per_class) {
      throw ContractError("subsample: class '" + dataset.class_names[c] + "' has " +
                          std::to_string(members.size()) + " images, " +
                          std::to_string(n_per_class) + " requested");
    }
    for (std::size_t pick : rng.choose(members.size(), n_per_class)) rows.push_back(members[pick]);
  }
  std::sort(rows.begin(), rows.end());
  return dataset.subset(rows);
}

}  // namespace hydramix::classifier
