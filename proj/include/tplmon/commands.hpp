#pragma once

// Subcommand bodies behind the tplmon CLI. Each writes its files under
// config.out and a short human-readable summary to `log`.

#include <ostream>

#include "tplmon/config.hpp"

namespace tplmon {

/// status1.csv, status2.csv (the reference and out-of-control grids of the
/// configured scenario) and manifest.json with the generative truth.
void cmd_simulate(const RunConfig& config, std::ostream& log);

/// fit.json: per-design coefficients and residual norms of config.reference
/// plus the coefficient trend across designs.
void cmd_fit(const RunConfig& config, std::ostream& log);

/// verdicts.json and verdicts.txt for config.method applied to
/// config.reference and config.query; accuracy.txt when both files carry
/// status labels.
void cmd_monitor(const RunConfig& config, std::ostream& log);

/// calibration.json, sample_size_sweep.{json,tsv} and
/// data_efficiency_sweep.{json,tsv} on the synthetic twin.
void cmd_evaluate(const RunConfig& config, std::ostream& log);

/// report.txt and report.json: accuracy tables of every method on the
/// synthetic twin.
void cmd_report(const RunConfig& config, std::ostream& log);

}  // namespace tplmon
