#include "difcal/campaign.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "difcal/io.hpp"
#include "difcal/lad.hpp"
#include "difcal/parallel.hpp"
#include "difcal/rmsd.hpp"

namespace difcal {

namespace {

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t");
  return text.substr(begin, end - begin + 1);
}

EvalReport evaluate_fit(const ParamSet& fitted, const SimTruth& truth) {
  EvalReport report;
  report.kendall = kendall(fitted.mu, truth.params.mu);
  report.mse = mse_report(fitted, truth.params);
  return report;
}

}  // namespace

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::Proposed:
      return "proposed";
    case Kind::Baseline:
      return "baseline";
    case Kind::Rmsd: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "rmsd:%g", threshold);
      return buf;
    }
  }
  return "?";
}

std::vector<MethodSpec> parse_methods(const std::string& list) {
  std::vector<MethodSpec> methods;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string token =
        trim(list.substr(pos, comma == std::string::npos ? std::string::npos
                                                         : comma - pos));
    pos = comma == std::string::npos ? list.size() + 1 : comma + 1;
    if (token.empty()) continue;
    MethodSpec spec;
    if (token == "proposed") {
      spec.kind = MethodSpec::Kind::Proposed;
    } else if (token == "baseline") {
      spec.kind = MethodSpec::Kind::Baseline;
    } else if (token.rfind("rmsd:", 0) == 0) {
      spec.kind = MethodSpec::Kind::Rmsd;
      try {
        spec.threshold = std::stod(token.substr(5));
      } catch (const std::exception&) {
        throw std::invalid_argument("bad rmsd threshold in method " + token);
      }
      if (spec.threshold <= 0.0)
        throw std::invalid_argument("rmsd threshold must be positive");
    } else {
      throw std::invalid_argument("unknown method " + token);
    }
    methods.push_back(spec);
  }
  if (methods.empty()) throw std::invalid_argument("no methods given");
  return methods;
}

CampaignResult run_campaign(const CampaignConfig& config) {
  if (config.replications < 1)
    throw std::invalid_argument("campaign: need at least one replication");
  if (config.methods.empty())
    throw std::invalid_argument("campaign: no methods requested");

  CampaignResult result;
  result.truth =
      gen_truth(config.setting, config.items, config.groups, config.seed);

  bool need_step1 = false;
  bool need_baseline = false;
  for (const MethodSpec& spec : config.methods) {
    need_step1 |= spec.kind == MethodSpec::Kind::Proposed;
    need_baseline |= spec.kind != MethodSpec::Kind::Proposed;
  }

  const int methods = static_cast<int>(config.methods.size());
  result.rows.resize(static_cast<std::size_t>(config.replications) * methods);
  parallel_blocks(config.replications, config.workers, [&](int rep) {
    const ResponseDataset data =
        gen_dataset(result.truth, config.sample_size,
                    substream_seed(config.seed, rep + 1));
    FitConfig fit_config = config.fit;
    fit_config.threads = 1;  // replication-level parallelism only

    ParamSet proposed;
    if (need_step1) {
      const FitResult step1 =
          fit(data, ConstraintProfile::step1(), fit_config);
      proposed = finalize(step1);
    }
    FitResult baseline;
    PosteriorTable baseline_posterior;
    if (need_baseline) {
      baseline = fit(data, ConstraintProfile::baseline(), fit_config);
      baseline_posterior = e_step(baseline.params, data, fit_config.grid);
    }

    for (int m = 0; m < methods; ++m) {
      const MethodSpec& spec = config.methods[m];
      ReplicationRow row;
      row.method = spec.label();
      row.replication = rep + 1;
      switch (spec.kind) {
        case MethodSpec::Kind::Proposed:
          row.report = evaluate_fit(proposed, result.truth);
          break;
        case MethodSpec::Kind::Baseline:
          row.report = evaluate_fit(baseline.params, result.truth);
          break;
        case MethodSpec::Kind::Rmsd: {
          const RmsdTable table =
              rmsd_table(baseline_posterior, data, baseline.params,
                         spec.threshold);
          FitConfig relaxed_config = fit_config;
          relaxed_config.start = baseline.params;
          const FitResult relaxed =
              fit(data, ConstraintProfile::relaxed(table.flags),
                  relaxed_config);
          row.report = evaluate_fit(relaxed.params, result.truth);
          row.report.selection =
              selection_report(table.flags, result.truth.params.gamma);
          break;
        }
      }
      result.rows[static_cast<std::size_t>(rep) * methods + m] =
          std::move(row);
    }
  });

  // Aggregate in the fixed (method, replication) layout.
  for (int m = 0; m < methods; ++m) {
    MethodAggregate agg;
    agg.method = config.methods[m].label();
    int selection_count = 0;
    for (int rep = 0; rep < config.replications; ++rep) {
      const EvalReport& rp =
          result.rows[static_cast<std::size_t>(rep) * methods + m].report;
      agg.kendall += rp.kendall;
      agg.mse.mu += rp.mse.mu;
      agg.mse.sigma += rp.mse.sigma;
      agg.mse.gamma += rp.mse.gamma;
      agg.mse.a += rp.mse.a;
      agg.mse.d += rp.mse.d;
      if (rp.selection) {
        ++selection_count;
        agg.zero_classified += rp.selection->zero_classified;
        if (rp.selection->fpr) agg.fpr += *rp.selection->fpr;
        if (rp.selection->fnr) agg.fnr += *rp.selection->fnr;
      }
    }
    const double n = config.replications;
    agg.kendall /= n;
    agg.mse.mu /= n;
    agg.mse.sigma /= n;
    agg.mse.gamma /= n;
    agg.mse.a /= n;
    agg.mse.d /= n;
    if (selection_count > 0) {
      agg.has_selection = true;
      agg.zero_classified /= selection_count;
      agg.fpr /= selection_count;
      agg.fnr /= selection_count;
    }
    result.aggregates.push_back(std::move(agg));
  }
  return result;
}

const MethodAggregate& find_aggregate(const CampaignResult& result,
                                      const std::string& method_label) {
  for (const MethodAggregate& agg : result.aggregates)
    if (agg.method == method_label) return agg;
  throw std::invalid_argument("no aggregate for method " + method_label);
}

namespace {

void write_report_cells(std::ofstream& out, const EvalReport& report) {
  out << format_double(report.kendall) << "," << format_double(report.mse.mu)
      << "," << format_double(report.mse.sigma) << ","
      << format_double(report.mse.gamma) << "," << format_double(report.mse.a)
      << "," << format_double(report.mse.d) << ",";
  if (report.selection) {
    out << report.selection->zero_classified << ",";
    out << (report.selection->fpr ? format_double(*report.selection->fpr)
                                  : "")
        << ",";
    out << (report.selection->fnr ? format_double(*report.selection->fnr)
                                  : "");
  } else {
    out << ",,";
  }
}

}  // namespace

void write_replications_csv(const CampaignResult& result,
                            const CampaignConfig& config,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "method,setting,n,replication,kendall,mse_mu,mse_sigma,mse_gamma,"
         "mse_a,mse_d,zero_classified,fpr,fnr\n";
  for (const ReplicationRow& row : result.rows) {
    out << row.method << "," << config.setting << "," << config.sample_size
        << "," << row.replication << ",";
    write_report_cells(out, row.report);
    out << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_aggregate_csv(const CampaignResult& result,
                         const CampaignConfig& config,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "method,setting,n,replications,kendall,mse_mu,mse_sigma,mse_gamma,"
         "mse_a,mse_d,zero_classified,fpr,fnr\n";
  for (const MethodAggregate& agg : result.aggregates) {
    out << agg.method << "," << config.setting << "," << config.sample_size
        << "," << config.replications << "," << format_double(agg.kendall)
        << "," << format_double(agg.mse.mu) << ","
        << format_double(agg.mse.sigma) << "," << format_double(agg.mse.gamma)
        << "," << format_double(agg.mse.a) << "," << format_double(agg.mse.d)
        << ",";
    if (agg.has_selection) {
      out << format_double(agg.zero_classified) << ","
          << format_double(agg.fpr) << "," << format_double(agg.fnr);
    } else {
      out << ",,";
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace difcal
