#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "difcal/campaign.hpp"
#include "difcal/io.hpp"
#include "difcal/lad.hpp"
#include "difcal/parallel.hpp"
#include "difcal/rmsd.hpp"

namespace fs = std::filesystem;
using namespace difcal;

namespace {

struct QuadOptions {
  int points = 61;
  double lo = -6.0;
  double hi = 6.0;
  double tol = 1e-7;
  int max_iter = 1000;

  void attach(CLI::App* cmd) {
    cmd->add_option("--quad-points", points, "Quadrature node count");
    cmd->add_option("--quad-lo", lo, "Lower end of the quadrature range");
    cmd->add_option("--quad-hi", hi, "Upper end of the quadrature range");
    cmd->add_option("--tol", tol, "Relative log-likelihood tolerance");
    cmd->add_option("--max-iter", max_iter, "EM iteration cap");
  }

  FitConfig fit_config() const {
    FitConfig config = default_fit_config();
    config.grid = make_grid(points, lo, hi);
    config.tol = tol;
    config.max_iter = max_iter;
    return config;
  }
};

void default_dims(const std::string& setting, int& items, int& groups) {
  if (items > 0 && groups > 0) return;
  if (setting == "S1" || setting == "S2") {
    items = 15;
    groups = 10;
  } else if (setting == "S3" || setting == "S4") {
    items = 30;
    groups = 20;
  } else {
    throw std::invalid_argument(
        "setting 'custom' needs explicit --items and --groups");
  }
}

std::string in_dir(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-group 2PL calibration with DIF handling"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_setting = "S1", sim_out;
  long sim_n = 10000;
  std::uint64_t sim_seed = 1;
  int sim_items = 0, sim_groups = 0;
  sim->add_option("--setting", sim_setting, "S1, S2, S3, S4 or custom");
  sim->add_option("--n", sim_n, "Total sample size")->required();
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--items", sim_items, "Item count (defaults per setting)");
  sim->add_option("--groups", sim_groups, "Group count (defaults per setting)");
  sim->add_option("--out", sim_out, "Output directory")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a calibration model");
  std::string fit_data, fit_method = "proposed", fit_out;
  QuadOptions fit_quad;
  fit_cmd->add_option("--data", fit_data, "Long response CSV")->required();
  fit_cmd->add_option("--method", fit_method, "proposed or baseline");
  fit_cmd->add_option("--out", fit_out, "Output directory")->required();
  fit_quad.attach(fit_cmd);

  // rmsd
  auto* rmsd_cmd = app.add_subcommand("rmsd", "Run the RMSD pipeline");
  std::string rmsd_data, rmsd_out;
  double rmsd_threshold = 0.0;
  int rmsd_rounds = 1;
  QuadOptions rmsd_quad;
  rmsd_cmd->add_option("--data", rmsd_data, "Long response CSV")->required();
  rmsd_cmd->add_option("--threshold", rmsd_threshold, "Flagging threshold")
      ->required();
  rmsd_cmd->add_option("--rounds", rmsd_rounds,
                       "Iterate-until-clean round cap (default single pass)");
  rmsd_cmd->add_option("--out", rmsd_out, "Output directory")->required();
  rmsd_quad.attach(rmsd_cmd);

  // evaluate
  auto* eval_cmd =
      app.add_subcommand("evaluate", "Score a fit against a known truth");
  std::string eval_fit, eval_truth, eval_flags, eval_out;
  eval_cmd->add_option("--fit", eval_fit, "Fitted params JSON")->required();
  eval_cmd->add_option("--truth", eval_truth, "Truth JSON")->required();
  eval_cmd->add_option("--flags", eval_flags, "RMSD table CSV with flags");
  eval_cmd->add_option("--out", eval_out, "Report CSV path")->required();

  // mds
  auto* mds_cmd =
      app.add_subcommand("mds", "Embed group DIF profiles in the plane");
  std::string mds_fit, mds_out;
  mds_cmd->add_option("--fit", mds_fit, "Fitted params JSON")->required();
  mds_cmd->add_option("--out", mds_out, "Embedding CSV path")->required();

  // replicate
  auto* rep_cmd =
      app.add_subcommand("replicate", "Run a simulation campaign");
  std::string rep_setting = "S1", rep_methods = "proposed,baseline",
              rep_out;
  long rep_n = 10000;
  int rep_reps = 20, rep_items = 0, rep_groups = 0, rep_workers = 0;
  std::uint64_t rep_seed = 1;
  QuadOptions rep_quad;
  rep_cmd->add_option("--setting", rep_setting, "S1, S2, S3, S4 or custom");
  rep_cmd->add_option("--n", rep_n, "Total sample size")->required();
  rep_cmd->add_option("--reps", rep_reps, "Replication count");
  rep_cmd->add_option("--methods", rep_methods,
                      "Comma list: proposed, baseline, rmsd:<threshold>");
  rep_cmd->add_option("--seed", rep_seed, "Campaign seed");
  rep_cmd->add_option("--items", rep_items, "Item count (defaults per setting)");
  rep_cmd->add_option("--groups", rep_groups,
                      "Group count (defaults per setting)");
  rep_cmd->add_option("--workers", rep_workers,
                      "Parallel replication workers (default: DIFCAL_WORKERS "
                      "or hardware)");
  rep_cmd->add_option("--out", rep_out, "Output directory")->required();
  rep_quad.attach(rep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      default_dims(sim_setting, sim_items, sim_groups);
      fs::create_directories(sim_out);
      const SimTruth truth =
          gen_truth(sim_setting, sim_items, sim_groups, sim_seed);
      const ResponseDataset data =
          gen_dataset(truth, sim_n, substream_seed(sim_seed, 1));
      write_long_csv(data, in_dir(sim_out, "dataset.csv"));
      write_truth(truth, in_dir(sim_out, "truth.json"));
      std::cout << "wrote " << in_dir(sim_out, "dataset.csv") << " and "
                << in_dir(sim_out, "truth.json") << "\n";
    } else if (*fit_cmd) {
      if (fit_method != "proposed" && fit_method != "baseline")
        throw CLI::ValidationError("--method", "must be proposed or baseline");
      fs::create_directories(fit_out);
      const ResponseDataset data = read_long_csv(fit_data);
      FitConfig config = fit_quad.fit_config();
      config.threads = default_workers();
      ParamSet final_params;
      FitResult result;
      if (fit_method == "proposed") {
        result = fit(data, ConstraintProfile::step1(), config);
        final_params = finalize(result);
      } else {
        result = fit(data, ConstraintProfile::baseline(), config);
        final_params = result.params;
      }
      write_params(final_params, data.item_labels, data.group_labels,
                   in_dir(fit_out, "params.json"));
      write_fit_log(result, data.item_labels, data.group_labels,
                    in_dir(fit_out, "fit_log.txt"));
      write_ranking_csv(final_params, data.group_labels,
                        in_dir(fit_out, "ranking.csv"));
      if (!result.converged)
        std::cerr << "warning: EM did not converge within "
                  << config.max_iter << " iterations\n";
      std::cout << "final log-likelihood "
                << format_double(result.final_loglik()) << " after "
                << result.iterations << " iterations\n";
    } else if (*rmsd_cmd) {
      fs::create_directories(rmsd_out);
      const ResponseDataset data = read_long_csv(rmsd_data);
      FitConfig config = rmsd_quad.fit_config();
      config.threads = default_workers();
      const RmsdPipelineResult result =
          rmsd_pipeline(data, rmsd_threshold, config, rmsd_rounds);
      write_params(result.baseline.params, data.item_labels,
                   data.group_labels, in_dir(rmsd_out, "baseline_params.json"));
      write_rmsd_csv(result.table, data.item_labels, data.group_labels,
                     in_dir(rmsd_out, "rmsd_table.csv"));
      write_params(result.relaxed.params, data.item_labels, data.group_labels,
                   in_dir(rmsd_out, "relaxed_params.json"));
      std::cout << result.table.flags.size() << " cells flagged at threshold "
                << rmsd_threshold << "\n";
    } else if (*eval_cmd) {
      const LabeledParams fitted = read_params(eval_fit);
      const SimTruth truth = read_truth(eval_truth);
      EvalReport report;
      report.kendall = kendall(fitted.params.mu, truth.params.mu);
      report.mse = mse_report(fitted.params, truth.params);
      if (!eval_flags.empty()) {
        const std::set<Cell> flags = read_flags_csv(
            eval_flags, fitted.item_labels, fitted.group_labels);
        report.selection = selection_report(flags, truth.params.gamma);
      }
      write_eval_csv(report, eval_out);
      std::cout << "kendall " << format_double(report.kendall) << ", mse_mu "
                << format_double(report.mse.mu) << "\n";
    } else if (*mds_cmd) {
      const LabeledParams fitted = read_params(mds_fit);
      const Embedding embedding =
          classical_mds(gamma_distances(fitted.params.gamma), 2);
      if (embedding.deficient())
        std::cerr << "warning: fewer than 2 positive eigenvalues; trailing "
                     "coordinates are zero\n";
      write_embedding_csv(embedding, fitted.group_labels, mds_out);
      std::cout << "wrote " << mds_out << "\n";
    } else if (*rep_cmd) {
      default_dims(rep_setting, rep_items, rep_groups);
      fs::create_directories(rep_out);
      CampaignConfig config;
      config.setting = rep_setting;
      config.items = rep_items;
      config.groups = rep_groups;
      config.sample_size = rep_n;
      config.replications = rep_reps;
      config.methods = parse_methods(rep_methods);
      config.seed = rep_seed;
      config.fit = rep_quad.fit_config();
      config.workers = rep_workers > 0 ? rep_workers : default_workers();
      const CampaignResult result = run_campaign(config);
      write_truth(result.truth, in_dir(rep_out, "truth.json"));
      write_replications_csv(result, config,
                             in_dir(rep_out, "replications.csv"));
      write_aggregate_csv(result, config, in_dir(rep_out, "aggregate.csv"));
      for (const MethodAggregate& agg : result.aggregates)
        std::cout << agg.method << ": kendall "
                  << format_double(agg.kendall) << ", mse_mu "
                  << format_double(agg.mse.mu) << "\n";
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
