#include "difcal/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace difcal {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

[[noreturn]] void fail_line(const std::string& path, long line,
                            const std::string& msg) {
  fail(path + ":" + std::to_string(line) + ": " + msg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  return in;
}

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_double(const std::string& text, bool& ok) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    ok = used == text.size() && !text.empty();
    return value;
  } catch (const std::exception&) {
    ok = false;
    return 0.0;
  }
}

Vector json_vector(const json& doc, const char* key, int expected) {
  if (!doc.contains(key) || !doc[key].is_array())
    fail(std::string("params schema mismatch: missing array '") + key + "'");
  const auto& arr = doc[key];
  if (expected >= 0 && static_cast<int>(arr.size()) != expected)
    fail(std::string("params schema mismatch: '") + key +
         "' has wrong length");
  Vector out(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      fail(std::string("params schema mismatch: '") + key +
           "' holds a non-number");
    out[static_cast<int>(i)] = arr[i].get<double>();
  }
  return out;
}

std::vector<std::string> json_labels(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array())
    fail(std::string("params schema mismatch: missing array '") + key + "'");
  std::vector<std::string> out;
  for (const auto& item : doc[key]) {
    if (!item.is_string())
      fail(std::string("params schema mismatch: '") + key +
           "' holds a non-string");
    out.push_back(item.get<std::string>());
  }
  return out;
}

void write_number_array(std::ofstream& out, const char* key,
                        const double* values, int count, bool trailing_comma) {
  out << "  \"" << key << "\": [";
  for (int i = 0; i < count; ++i) {
    if (i) out << ", ";
    out << format_double(values[i]);
  }
  out << "]" << (trailing_comma ? "," : "") << "\n";
}

void write_label_array(std::ofstream& out, const char* key,
                       const std::vector<std::string>& labels,
                       bool trailing_comma) {
  out << "  \"" << key << "\": [";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out << ", ";
    out << json(labels[i]).dump();
  }
  out << "]" << (trailing_comma ? "," : "") << "\n";
}

void write_params_body(std::ofstream& out, const ParamSet& params,
                       const std::vector<std::string>& item_labels,
                       const std::vector<std::string>& group_labels,
                       bool trailing_comma) {
  const RowMatrix gamma_rm = params.gamma;
  write_number_array(out, "a", params.a.data(), params.items(), true);
  write_number_array(out, "d", params.d.data(), params.items(), true);
  write_number_array(out, "mu", params.mu.data(), params.groups(), true);
  write_number_array(out, "sigma", params.sigma.data(), params.groups(), true);
  write_number_array(out, "gamma", gamma_rm.data(),
                     params.items() * params.groups(), true);
  write_label_array(out, "items", item_labels, true);
  write_label_array(out, "groups", group_labels, trailing_comma);
}

LabeledParams params_from_json(const json& doc) {
  LabeledParams lp;
  lp.item_labels = json_labels(doc, "items");
  lp.group_labels = json_labels(doc, "groups");
  const int J = static_cast<int>(lp.item_labels.size());
  const int p = static_cast<int>(lp.group_labels.size());
  lp.params.a = json_vector(doc, "a", J);
  lp.params.d = json_vector(doc, "d", J);
  lp.params.mu = json_vector(doc, "mu", p);
  lp.params.sigma = json_vector(doc, "sigma", p);
  const Vector flat = json_vector(doc, "gamma", J * p);
  lp.params.gamma.resize(J, p);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < p; ++k) lp.params.gamma(j, k) = flat[j * p + k];
  lp.params.validate();
  if (doc.contains("setting")) lp.setting = doc["setting"].get<std::string>();
  if (doc.contains("seed")) lp.seed = doc["seed"].get<std::uint64_t>();
  return lp;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<std::string> default_labels(const char* prefix, int count) {
  int width = 1;
  for (int v = count; v >= 10; v /= 10) ++width;
  std::vector<std::string> labels;
  labels.reserve(count);
  char buf[32];
  for (int i = 1; i <= count; ++i) {
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
    labels.emplace_back(buf);
  }
  return labels;
}

ResponseDataset read_long_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) fail(path + ": empty file");
  ++line_no;
  if (split_csv_line(line) !=
      std::vector<std::string>{"person_id", "group", "weight", "item_id",
                               "response"})
    fail_line(path, line_no,
              "expected header person_id,group,weight,item_id,response");

  ResponseDataset data;
  std::map<std::string, int> person_index, group_index, item_index;
  std::set<std::pair<int, int>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) fail_line(path, line_no, "expected 5 fields");
    const std::string& pid = fields[0];
    const std::string& group = fields[1];
    const std::string& item = fields[3];
    const std::string& response = fields[4];
    if (pid.empty() || group.empty() || item.empty())
      fail_line(path, line_no, "empty person_id, group, or item_id");
    bool ok = false;
    const double weight = parse_double(fields[2], ok);
    if (!ok || !std::isfinite(weight) || weight <= 0.0)
      fail_line(path, line_no, "weight must be a positive number");

    auto [git, g_new] =
        group_index.emplace(group, static_cast<int>(group_index.size()));
    if (g_new) data.group_labels.push_back(group);
    auto [iit, i_new] =
        item_index.emplace(item, static_cast<int>(item_index.size()));
    if (i_new) data.item_labels.push_back(item);

    auto [pit, p_new] =
        person_index.emplace(pid, static_cast<int>(person_index.size()));
    if (p_new) {
      PersonRecord person;
      person.group = git->second;
      person.weight = weight;
      data.persons.push_back(std::move(person));
      data.person_ids.push_back(pid);
    } else {
      const PersonRecord& person = data.persons[pit->second];
      if (person.group != git->second)
        fail_line(path, line_no, "conflicting group for person " + pid);
      if (person.weight != weight)
        fail_line(path, line_no, "conflicting weight for person " + pid);
    }

    if (response.empty()) continue;  // not administered
    int value;
    if (response == "0")
      value = 0;
    else if (response == "1")
      value = 1;
    else
      fail_line(path, line_no, "response must be 0, 1, or empty");
    if (!seen.insert({pit->second, iit->second}).second)
      fail_line(path, line_no,
                "duplicate response for person " + pid + ", item " + item);
    data.persons[pit->second].responses.emplace_back(iit->second, value);
  }
  data.item_count = static_cast<int>(item_index.size());
  data.group_count = static_cast<int>(group_index.size());
  if (data.item_count == 0) fail(path + ": no responses found");
  return data;
}

void write_long_csv(const ResponseDataset& data, const std::string& path) {
  const std::vector<std::string> items =
      data.item_labels.empty() ? default_labels("i", data.item_count)
                               : data.item_labels;
  const std::vector<std::string> groups =
      data.group_labels.empty() ? default_labels("g", data.group_count)
                                : data.group_labels;
  const std::vector<std::string> pids =
      data.person_ids.empty() ? default_labels("p", data.num_persons())
                              : data.person_ids;
  std::ofstream out = open_out(path);
  out << "person_id,group,weight,item_id,response\n";
  for (int i = 0; i < data.num_persons(); ++i) {
    const PersonRecord& person = data.persons[i];
    const std::string head = pids[i] + "," + groups[person.group] + "," +
                             format_double(person.weight) + ",";
    if (person.responses.empty()) {
      out << head << items[0] << ",\n";
      continue;
    }
    for (const auto& [item, value] : person.responses)
      out << head << items[item] << "," << value << "\n";
  }
  if (!out) fail("failed writing " + path);
}

void write_params(const ParamSet& params,
                  const std::vector<std::string>& item_labels,
                  const std::vector<std::string>& group_labels,
                  const std::string& path) {
  params.validate();
  if (static_cast<int>(item_labels.size()) != params.items() ||
      static_cast<int>(group_labels.size()) != params.groups())
    fail("write_params: label tables do not match parameter dimensions");
  std::ofstream out = open_out(path);
  out << "{\n";
  write_params_body(out, params, item_labels, group_labels, false);
  out << "}\n";
  if (!out) fail("failed writing " + path);
}

LabeledParams read_params(const std::string& path) {
  std::ifstream in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(path + ": invalid JSON: " + e.what());
  }
  try {
    return params_from_json(doc);
  } catch (const std::invalid_argument& e) {
    fail(path + ": " + e.what());
  } catch (const json::exception& e) {
    fail(path + ": params schema mismatch: " + e.what());
  }
}

void write_truth(const SimTruth& truth, const std::string& path) {
  truth.params.validate();
  std::ofstream out = open_out(path);
  out << "{\n";
  write_params_body(out, truth.params,
                    default_labels("i", truth.params.items()),
                    default_labels("g", truth.params.groups()), true);
  out << "  \"setting\": " << json(truth.setting).dump() << ",\n";
  out << "  \"seed\": " << truth.seed << "\n";
  out << "}\n";
  if (!out) fail("failed writing " + path);
}

SimTruth read_truth(const std::string& path) {
  LabeledParams lp = read_params(path);
  SimTruth truth;
  truth.params = std::move(lp.params);
  truth.setting = lp.setting.empty() ? "custom" : lp.setting;
  truth.seed = lp.seed;
  return truth;
}

void write_ranking_csv(const ParamSet& params,
                       const std::vector<std::string>& group_labels,
                       const std::string& path) {
  if (static_cast<int>(group_labels.size()) != params.groups())
    fail("write_ranking_csv: label table does not match group count");
  std::vector<int> order(params.groups());
  for (int k = 0; k < params.groups(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    if (params.mu[lhs] != params.mu[rhs]) return params.mu[lhs] > params.mu[rhs];
    return group_labels[lhs] < group_labels[rhs];
  });
  std::ofstream out = open_out(path);
  out << "rank,group,mu,sigma\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const int k = order[r];
    out << (r + 1) << "," << group_labels[k] << ","
        << format_double(params.mu[k]) << "," << format_double(params.sigma[k])
        << "\n";
  }
  if (!out) fail("failed writing " + path);
}

void write_rmsd_csv(const RmsdTable& table,
                    const std::vector<std::string>& item_labels,
                    const std::vector<std::string>& group_labels,
                    const std::string& path) {
  std::ofstream out = open_out(path);
  out << "item,group,rmsd,flagged\n";
  for (int j = 0; j < table.values.rows(); ++j) {
    for (int k = 0; k < table.values.cols(); ++k) {
      out << item_labels[j] << "," << group_labels[k] << ",";
      if (!table.missing(j, k)) out << format_double(table.values(j, k));
      out << "," << (table.flags.count({j, k}) ? 1 : 0) << "\n";
    }
  }
  if (!out) fail("failed writing " + path);
}

std::set<Cell> read_flags_csv(const std::string& path,
                              const std::vector<std::string>& item_labels,
                              const std::vector<std::string>& group_labels) {
  std::map<std::string, int> item_index, group_index;
  for (std::size_t i = 0; i < item_labels.size(); ++i)
    item_index[item_labels[i]] = static_cast<int>(i);
  for (std::size_t k = 0; k < group_labels.size(); ++k)
    group_index[group_labels[k]] = static_cast<int>(k);

  std::ifstream in = open_in(path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) fail(path + ": empty file");
  ++line_no;
  if (split_csv_line(line) !=
      std::vector<std::string>{"item", "group", "rmsd", "flagged"})
    fail_line(path, line_no, "expected header item,group,rmsd,flagged");
  std::set<Cell> flags;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) fail_line(path, line_no, "expected 4 fields");
    const auto item = item_index.find(fields[0]);
    if (item == item_index.end())
      fail_line(path, line_no, "unknown item " + fields[0]);
    const auto group = group_index.find(fields[1]);
    if (group == group_index.end())
      fail_line(path, line_no, "unknown group " + fields[1]);
    if (fields[3] == "1")
      flags.insert({item->second, group->second});
    else if (fields[3] != "0")
      fail_line(path, line_no, "flagged must be 0 or 1");
  }
  return flags;
}

void write_embedding_csv(const Embedding& embedding,
                         const std::vector<std::string>& group_labels,
                         const std::string& path) {
  if (static_cast<int>(group_labels.size()) != embedding.coords.rows())
    fail("write_embedding_csv: label table does not match embedding");
  std::ofstream out = open_out(path);
  out << "group,x,y\n";
  for (int k = 0; k < embedding.coords.rows(); ++k) {
    out << group_labels[k] << "," << format_double(embedding.coords(k, 0))
        << ","
        << format_double(embedding.coords.cols() > 1 ? embedding.coords(k, 1)
                                                     : 0.0)
        << "\n";
  }
  if (!out) fail("failed writing " + path);
}

void write_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "kendall,mse_mu,mse_sigma,mse_gamma,mse_a,mse_d,zero_classified,"
         "fpr,fnr\n";
  out << format_double(report.kendall) << "," << format_double(report.mse.mu)
      << "," << format_double(report.mse.sigma) << ","
      << format_double(report.mse.gamma) << "," << format_double(report.mse.a)
      << "," << format_double(report.mse.d) << ",";
  if (report.selection) {
    const SelectionBlock& sel = *report.selection;
    out << sel.zero_classified << ",";
    out << (sel.fpr ? format_double(*sel.fpr) : "") << ",";
    out << (sel.fnr ? format_double(*sel.fnr) : "");
  } else {
    out << ",,";
  }
  out << "\n";
  if (!out) fail("failed writing " + path);
}

void write_fit_log(const FitResult& result,
                   const std::vector<std::string>& item_labels,
                   const std::vector<std::string>& group_labels,
                   const std::string& path) {
  std::ofstream out = open_out(path);
  const char* profile = "baseline";
  if (result.profile.kind == ConstraintProfile::Kind::Step1)
    profile = "step1";
  else if (result.profile.kind == ConstraintProfile::Kind::Relaxed)
    profile = "relaxed";
  out << "profile: " << profile << "\n";
  out << "iterations: " << result.iterations << "\n";
  out << "converged: " << (result.converged ? "yes" : "no") << "\n";
  out << "final_loglik: " << format_double(result.final_loglik()) << "\n";
  if (!result.frozen_cells.empty()) {
    out << "frozen_cells:";
    for (const auto& [j, k] : result.frozen_cells)
      out << " (" << item_labels[j] << "," << group_labels[k] << ")";
    out << "\n";
  }
  for (const auto& note : result.notes) out << "note: " << note << "\n";
  out << "loglik_trace:\n";
  for (double value : result.loglik_trace)
    out << format_double(value) << "\n";
  if (!out) fail("failed writing " + path);
}

}  // namespace difcal
