#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "wold/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Wold-type decompositions of covariant representations"};
  app.require_subcommand(1, 1);

  wold::cli::RunConfig cfg;
  std::string input;
  std::string demo;
  std::string out_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--cap", cfg.level_cap, "level cap for chains and grids")->default_val(6);
    sub->add_option("--rank-tol", cfg.tolerances.rank_tol, "relative rank cutoff");
    sub->add_option("--eq-tol", cfg.tolerances.eq_tol, "residual tolerance for identities");
    sub->add_option("--out", out_path, "write the JSON report here instead of standard output");
    sub->add_flag("--json-only", cfg.json_only, "suppress the text summary");
  };
  for (const char* name : {"check", "decompose", "multi"}) {
    CLI::App* sub = app.add_subcommand(name, std::string(name) + " a representation file or a demo");
    sub->add_option("--input", input, "representation JSON file");
    sub->add_option("--demo", demo, "named demo construction");
    common(sub);
  }
  CLI::App* demo_cmd = app.add_subcommand("demo", "run the full pipeline on a named construction");
  demo_cmd->add_option("name", demo, "demo name")->required();
  common(demo_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  cfg.command = *wold::cli::parse_command(app.get_subcommands().front()->get_name());
  if (!input.empty()) cfg.input_path = input;
  if (!demo.empty()) cfg.demo_name = demo;
  if (!out_path.empty()) cfg.output_path = out_path;

  const wold::cli::RunResult res = wold::cli::run(cfg);
  const std::string doc = res.document.dump(2);
  if (cfg.output_path) {
    std::ofstream f(*cfg.output_path);
    if (!f) {
      std::cerr << "error: cannot write '" << *cfg.output_path << "'\n";
      return 2;
    }
    f << doc << '\n';
    if (!cfg.json_only) std::cout << res.summary;
  } else {
    std::cout << doc << '\n';
    if (!cfg.json_only) std::cerr << res.summary;
  }
  return res.exit_code;
}
