// Command-line front end: one subcommand per pipeline stage.
#include "mpnet/errors.hpp"
#include "mpnet/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Options {
  std::string config;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<std::string> pair_scope;
  std::optional<std::size_t> top_k;
};

int report(const std::filesystem::path &out_dir, const std::string &kind,
           const std::string &message, int code) {
  mpnet::write_error_record(out_dir, kind, message, code);
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump()
            << '\n';
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multilayer disease network reconstruction from omics tables"};
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate a synthetic dataset with planted mediators"},
      {"validate", "check input tables against their schemas and merge them"},
      {"preprocess", "impute missing values and discretize, once per run"},
      {"network", "build the MI significance network for every run"},
      {"project", "project biomarker layers onto phenotype pairs"},
      {"contribute", "rank biomarkers by their contribution score"},
      {"importance", "relative importance of risk factors"},
      {"compare", "fit projected weights against direct MI"},
      {"all", "run every stage in order"}};
  for (const auto &[name, help] : commands) {
    auto *sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", opt.config, "pipeline config (YAML)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--threads,-j", opt.threads,
                    "worker threads (0 = all cores)");
    sub->add_option("--out,-o", opt.out, "output directory");
    if (name == "contribute" || name == "all") {
      sub->add_option("--pair-scope", opt.pair_scope,
                      "cvd-x-depression | phenotypes | risk-x-phenotype | "
                      "full | pair:A,B;C,D");
      sub->add_option("--top-k", opt.top_k, "biomarkers to report");
    }
  }
  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  std::filesystem::path out_dir = opt.out.value_or("out");
  try {
    auto config = mpnet::load_config(opt.config);
    if (opt.out)
      config.output_dir = *opt.out;
    if (opt.threads)
      config.threads = *opt.threads;
    if (opt.pair_scope)
      config.pair_scope = *opt.pair_scope;
    if (opt.top_k)
      config.top_k = *opt.top_k;
    out_dir = config.output_dir;
    mpnet::Pipeline pipeline(std::move(config));
    pipeline.run(stage);
  } catch (const mpnet::Error &e) {
    return report(out_dir, e.kind(), e.what(),
                  mpnet::exit_code(e.error_class()));
  } catch (const std::exception &e) {
    return report(out_dir, "InternalError", e.what(), 1);
  }
  return 0;
}
