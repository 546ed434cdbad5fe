#pragma once

// CSV panel ingestion and the machine-readable result files.

#include <iosfwd>
#include <string>
#include <vector>

#include "stagger/diagnostics.hpp"
#include "stagger/estimate.hpp"
#include "stagger/panel.hpp"
#include "stagger/simulation.hpp"

namespace stagger {

struct CsvOptions {
  // Column whose values define clusters; empty uses the `cluster` column when
  // present, otherwise the unit.
  std::string cluster_column;
};

// Header required: unit,time,y plus optional first_treat, cluster, weight (any
// order, extra columns allowed). Throws ParseError naming row and column.
std::vector<Observation> read_panel_csv(std::istream& in, const CsvOptions& options = {});
std::vector<Observation> read_panel_csv_file(const std::string& path, const CsvOptions& options = {});

// unit,time,y,first_treat,cluster,weight
void write_panel_csv(std::ostream& os, const std::vector<Observation>& rows);

// method,estimand,term,rel_time,estimate,se,ci_low,ci_high,n_obs,n_clusters
void write_estimates_csv(std::ostream& os, const std::vector<Estimate>& estimates);
std::string estimates_json(const std::vector<Estimate>& estimates);

// method,rel_time,estimate,se,ci_low,ci_high
void write_event_study_csv(std::ostream& os, const std::vector<Estimate>& estimates);

// rep,estimator,estimand,value,se
void write_mc_draws_csv(std::ostream& os, const MCResult& result);
// estimator,estimand,n,mean,sd,mean_se,sd_undefined
void write_mc_summary_csv(std::ostream& os, const MCResult& result);
std::string mc_summary_json(const MCResult& result, const TrueEstimands& truth);

}  // namespace stagger
