#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "rp2ends/error.hpp"

namespace {

using rp2ends::cli::Context;

struct Flags {
  std::string config;
  std::string out;
  std::string format = "csv";
  bool svg = false;
  std::vector<std::string> positional;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RP^2 end structures from cubic differentials"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"classify", "classify residues: class, spectrum, twist sign"},
      {"spectrum", "spectrum of a residue, or residues for a spectrum"},
      {"wang", "solve Wang's equation on a model end"},
      {"develop", "develop a ray and report its limit point"},
      {"holonomy", "holonomy of the core loop at a given height"},
      {"levinson", "asymptotic solutions of a perturbed diagonal system"},
      {"family", "degeneration sweep along a plumbing family"},
      {"triangle", "limit-point table of the triangle model"}};
  const std::map<std::string, std::function<int(Context&)>> handlers{
      {"classify", rp2ends::cli::cmd_classify}, {"spectrum", rp2ends::cli::cmd_spectrum},
      {"wang", rp2ends::cli::cmd_wang},         {"develop", rp2ends::cli::cmd_develop},
      {"holonomy", rp2ends::cli::cmd_holonomy}, {"levinson", rp2ends::cli::cmd_levinson},
      {"family", rp2ends::cli::cmd_family},     {"triangle", rp2ends::cli::cmd_triangle}};

  Flags flags;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "key = value configuration file");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--format", flags.format, "table format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--svg", flags.svg, "also write SVG renderings");
    if (name == "classify") sub->add_option("residues", flags.positional, "complex literals such as 1-2i");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    Context ctx;
    if (!flags.config.empty()) ctx.config = rp2ends::cli::Config::load(flags.config);
    if (!flags.out.empty()) ctx.out = flags.out;
    ctx.format = flags.format == "json" ? rp2ends::cli::Format::Json : rp2ends::cli::Format::Csv;
    ctx.svg = flags.svg;
    ctx.positional = flags.positional;
    ctx.stdout_ = &std::cout;
    return handlers.at(name)(ctx);
  } catch (const std::exception& e) {
    std::cerr << "rp2ends " << name << ": " << e.what() << "\n";
    return rp2ends::cli::exit_code_for(e);
  }
}
