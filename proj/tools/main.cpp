// SPDX-License-Identifier: Apache-2.0
// rvesurr: command-line entry point for the surrogate pipeline.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rvesurr/datastore.hpp"
#include "rvesurr/error.hpp"
#include "rvesurr/pipeline.hpp"

namespace {

int fail(const std::string& msg, int code) {
  std::cerr << "rvesurr: " << msg << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace rvesurr;
  CLI::App app{"RVE state-variable field surrogates (GRU, PCA, break-down)"};
  app.require_subcommand(1);

  std::string config_file;
  int jobs = 1;
  std::optional<std::uint64_t> seed_override;

  std::vector<std::string> stages = stage_names();
  stages.push_back("all");
  std::string chosen;
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s, "run the " + s + " stage");
    sub->add_option("--config", config_file, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--jobs", jobs, "worker count")->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", seed_override, "replace every seed by streams of this value");
    sub->callback([&chosen, s] { chosen = s; });
  }

  auto* ds = app.add_subcommand("dataset", "inspect and rewrite .rveseq files");
  ds->require_subcommand(1);
  std::string in_file, out_file, family = "gamma";
  std::vector<std::string> pack_inputs;
  double crit = 6.0;
  auto* stats = ds->add_subcommand("stats", "print statistics as JSON");
  stats->add_option("file", in_file)->required()->check(CLI::ExistingFile);
  auto* trim = ds->add_subcommand("trim", "pre-trim at a critical value");
  trim->add_option("input", in_file)->required()->check(CLI::ExistingFile);
  trim->add_option("output", out_file)->required();
  trim->add_option("--crit", crit, "critical value (default 6.0)");
  trim->add_option("--family", family, "monitored family: gamma or tau");
  auto* pack = ds->add_subcommand("pack", "concatenate record files");
  pack->add_option("output", out_file)->required();
  pack->add_option("inputs", pack_inputs)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ds->parsed()) {
      if (stats->parsed()) {
        const auto recs = read_records(in_file);
        std::cout << dataset_stats(recs).dump(2) << '\n';
      } else if (trim->parsed()) {
        const Family f = family_from_string(family);
        auto recs = read_records(in_file);
        std::size_t excluded = 0;
        for (auto& r : recs) {
          r = pre_trim(r, crit, f);
          excluded += r.excluded();
        }
        write_records(out_file, recs);
        std::cerr << "trimmed " << recs.size() << " records, " << excluded << " excluded\n";
      } else if (pack->parsed()) {
        std::vector<SequenceRecord> all;
        for (const auto& f : pack_inputs) {
          auto recs = read_records(f);
          all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
        }
        write_records(out_file, all);
        std::cerr << "packed " << all.size() << " records\n";
      }
      return 0;
    }

    RunContext ctx;
    ctx.config = load_config(config_file);
    if (seed_override) ctx.config.override_seeds(*seed_override);
    ctx.root = resolve_output_root(ctx.config);
    ctx.jobs = jobs;
    ctx.log = &std::cerr;
    run_stage(ctx, chosen);
    return 0;
  } catch (const MissingArtifact& e) {
    return fail(e.what(), 3);
  } catch (const InvalidInput& e) {
    return fail(e.what(), 2);
  } catch (const Error& e) {
    return fail(e.what(), 1);
  } catch (const std::exception& e) {
    return fail(e.what(), 1);
  }
}
