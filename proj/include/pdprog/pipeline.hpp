#pragma once

#include <string>

#include "pdprog/config.hpp"

namespace pdprog {

// Subcommand bodies shared by the CLI and the test suites. Each throws a
// pdprog::Error subclass on failure; cmd_run leaves partial outputs plus a
// MANIFEST.txt noting how far it got.

// Write <out_dir>/visits.csv and <out_dir>/truth.csv.
void cmd_synth(const PipelineConfig& cfg);

// Full pipeline: ingest -> impute -> vectorize -> drop-static -> normalize ->
// dimred -> select_k -> assign_subtypes -> windowed CV -> reports.
void cmd_run(const PipelineConfig& cfg);

// Score stored model artifacts against an external visits CSV.
void cmd_replicate(const PipelineConfig& cfg, const std::string& model_dir,
                   const std::string& external_csv);

}  // namespace pdprog
