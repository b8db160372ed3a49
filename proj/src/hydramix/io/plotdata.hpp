#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hydramix::io {

/// JSON-lines log to CSV. Columns are the scalar keys in first-seen order;
/// arrays become ';'-joined cells and absent keys empty cells.
std::string jsonl_to_csv(std::string_view text);

/// Classifier result files to one CSV row each:
/// augment,p_gen,n_per_class,runs,mean,std.
std::string classifier_results_to_csv(const std::vector<nlohmann::json>& results);

/// Dispatches on content: CSE results (object with "classes"), classifier
/// results (object with "accuracies"), otherwise JSON lines.
std::string plotdata_to_csv(const std::vector<std::string>& documents);

}  // namespace hydramix::io
