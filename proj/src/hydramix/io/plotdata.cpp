#include "hydramix/io/plotdata.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "hydramix/numerics/tensor.hpp"
#include "hydramix/io/binary.hpp"

namespace hydramix::io {

namespace {

template <class Json>
std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto s = v.template get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char ch : s) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return quoted + "\"";
  }
  if (v.is_array()) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + cell(v[i]);
    return out;
  }
  if (v.is_object()) return cell(Json(v.dump()));
  return v.dump();
}

template <class Json = nlohmann::json>
Json parse_document(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace

std::string jsonl_to_csv(std::string_view text) {
  std::vector<nlohmann::ordered_json> rows;
  std::vector<std::string> columns;
  std::map<std::string, bool> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto row = parse_document<nlohmann::ordered_json>(line, "line " + std::to_string(number));
    if (!row.is_object()) throw FormatError("line " + std::to_string(number) + ": expected a JSON object");
    for (auto& [key, value] : row.items()) {
      if (!seen[key]) {
        seen[key] = true;
        columns.push_back(key);
      }
    }
    rows.push_back(std::move(row));
  }
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << (c ? "," : "");
      if (row.contains(columns[c])) out << cell(row[columns[c]]);
    }
    out << '\n';
  }
  return out.str();
}

std::string classifier_results_to_csv(const std::vector<nlohmann::json>& results) {
  std::ostringstream out;
  out << "augment,p_gen,n_per_class,runs,mean,std\n";
  for (const auto& r : results) {
    out << cell(r.value("augment", nlohmann::json())) << ',' << cell(r.value("p_gen", nlohmann::json())) << ','
        << cell(r.value("n_per_class", nlohmann::json())) << ',' << r.at("accuracies").size() << ','
        << cell(r.at("mean")) << ',' << cell(r.at("std")) << '\n';
  }
  return out.str();
}

std::string plotdata_to_csv(const std::vector<std::string>& documents) {
  if (documents.empty()) throw numerics::ContractError("plotdata: no input documents");
  std::vector<nlohmann::json> parsed;
  bool all_json = true;
  bool any_result = false;
  for (const auto& d : documents) {
    try {
      parsed.push_back(nlohmann::json::parse(d));
      const auto& j = parsed.back();
      any_result = any_result || (j.is_object() && (j.contains("accuracies") || j.contains("classes")));
    } catch (const nlohmann::json::parse_error&) {
      all_json = false;
    }
  }
  if (any_result && !all_json) {
    throw FormatError("plotdata: result files and JSON-lines logs cannot be combined in one call");
  }
  if (all_json) {
    const bool classifier = std::all_of(parsed.begin(), parsed.end(), [](const nlohmann::json& j) {
      return j.is_object() && j.contains("accuracies");
    });
    if (classifier) return classifier_results_to_csv(parsed);
    const bool cse = parsed.size() == 1 && parsed[0].is_object() && parsed[0].contains("classes");
    if (cse) {
      std::ostringstream out;
      out << "class_id,images,hyponyms,cse,max_cse\n";
      for (const auto& c : parsed[0].at("classes")) {
        out << cell(c.at("class_id")) << ',' << cell(c.at("images")) << ',' << cell(c.at("hyponyms")) << ','
            << cell(c.at("cse")) << ',' << cell(c.at("max_cse")) << '\n';
      }
      out << "overall,,," << cell(parsed[0].at("overall")) << ",\n";
      return out.str();
    }
  }
  std::string joined;
  for (const auto& d : documents) {
    joined += d;
    if (!d.empty() && d.back() != '\n') joined += '\n';
  }
  return jsonl_to_csv(joined);
}

}  // namespace hydramix::io
