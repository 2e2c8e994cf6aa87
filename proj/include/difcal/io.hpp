#pragma once

#include <set>
#include <string>
#include <vector>

#include "difcal/em.hpp"
#include "difcal/mds.hpp"
#include "difcal/metrics.hpp"
#include "difcal/rmsd.hpp"
#include "difcal/simulate.hpp"
#include "difcal/types.hpp"

namespace difcal {

/// Shortest fixed-width decimal form that round-trips a double exactly
/// (printf %.17g); used for every number written to CSV or JSON.
std::string format_double(double value);

/// Reads the long response format
///   person_id,group,weight,item_id,response
/// assigning group and item indices by first appearance. A row with an
/// empty response cell marks the item as not administered but still
/// registers the person. Throws std::runtime_error with the offending
/// line number on malformed rows, duplicate (person, item) pairs,
/// responses outside {0,1}, or inconsistent per-person group/weight.
ResponseDataset read_long_csv(const std::string& path);

/// Inverse of read_long_csv; a person without responses is written as a
/// single row with an empty response cell.
void write_long_csv(const ResponseDataset& data, const std::string& path);

/// JSON document with arrays a, d, mu, sigma, row-major gamma, and the
/// item/group label tables. Reading back reproduces the values bit for bit.
void write_params(const ParamSet& params,
                  const std::vector<std::string>& item_labels,
                  const std::vector<std::string>& group_labels,
                  const std::string& path);

struct LabeledParams {
  ParamSet params;
  std::vector<std::string> item_labels;
  std::vector<std::string> group_labels;
  std::string setting;  // present in truth files
  std::uint64_t seed = 0;
};

LabeledParams read_params(const std::string& path);

void write_truth(const SimTruth& truth, const std::string& path);
SimTruth read_truth(const std::string& path);

/// Groups sorted by descending estimated mean, ties broken by label.
void write_ranking_csv(const ParamSet& params,
                       const std::vector<std::string>& group_labels,
                       const std::string& path);

/// Columns item,group,rmsd,flagged; undefined statistics print an empty
/// rmsd cell and are never flagged.
void write_rmsd_csv(const RmsdTable& table,
                    const std::vector<std::string>& item_labels,
                    const std::vector<std::string>& group_labels,
                    const std::string& path);

/// Reads the flagged cells back from an rmsd table CSV, mapping labels
/// through the given tables.
std::set<Cell> read_flags_csv(const std::string& path,
                              const std::vector<std::string>& item_labels,
                              const std::vector<std::string>& group_labels);

void write_embedding_csv(const Embedding& embedding,
                         const std::vector<std::string>& group_labels,
                         const std::string& path);

void write_eval_csv(const EvalReport& report, const std::string& path);

void write_fit_log(const FitResult& result,
                   const std::vector<std::string>& item_labels,
                   const std::vector<std::string>& group_labels,
                   const std::string& path);

}  // namespace difcal
