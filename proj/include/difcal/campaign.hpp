#pragma once

#include <string>
#include <vector>

#include "difcal/em.hpp"
#include "difcal/metrics.hpp"
#include "difcal/simulate.hpp"

namespace difcal {

struct MethodSpec {
  enum class Kind { Proposed, Baseline, Rmsd };
  Kind kind = Kind::Proposed;
  double threshold = 0.0;  // Rmsd only

  std::string label() const;
};

/// Parses "proposed,baseline,rmsd:0.05" style method lists.
std::vector<MethodSpec> parse_methods(const std::string& list);

struct CampaignConfig {
  std::string setting = "S1";
  int items = 15;
  int groups = 10;
  long sample_size = 10000;
  int replications = 20;
  std::vector<MethodSpec> methods;
  std::uint64_t seed = 1;
  FitConfig fit;
  int workers = 1;
};

/// One evaluated (method, replication) cell.
struct ReplicationRow {
  std::string method;
  int replication = 0;  // 1-based
  EvalReport report;
};

struct MethodAggregate {
  std::string method;
  double kendall = 0.0;
  MseBlock mse;
  bool has_selection = false;
  double zero_classified = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

struct CampaignResult {
  SimTruth truth;
  std::vector<ReplicationRow> rows;  // replication-major, method order fixed
  std::vector<MethodAggregate> aggregates;
};

/// Runs every replication as an isolated task keyed by (seed, index):
/// generate a dataset, fit each requested method, evaluate against the
/// shared truth. The Step-1 and baseline fits are shared between methods
/// within a replication. Results and aggregates do not depend on the
/// worker count.
CampaignResult run_campaign(const CampaignConfig& config);

void write_replications_csv(const CampaignResult& result,
                            const CampaignConfig& config,
                            const std::string& path);
void write_aggregate_csv(const CampaignResult& result,
                         const CampaignConfig& config,
                         const std::string& path);

const MethodAggregate& find_aggregate(const CampaignResult& result,
                                      const std::string& method_label);

}  // namespace difcal
