// tmf <subcommand> --config <path> [--workers N] [--seed S] [--out DIR]
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 numerical, 4 io, 5 other.
// Failures print one line on stderr:
//   TMF_ERROR code=<kind> [key=<config key>] message="..."

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "tmf/commands.hpp"

namespace {

std::string quoted(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return "\"" + out + "\"";
}

int fail(const char* code, int status, const std::string& message, const std::string& key = {}) {
  std::cerr << "TMF_ERROR code=" << code;
  if (!key.empty()) std::cerr << " key=" << key;
  std::cerr << " message=" << quoted(message) << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic mean-field Navier-Stokes laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  int workers = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> outdir;

  for (const auto& [name, run] : tmf::command_table()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--workers", workers, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override ensemble.seed");
    sub->add_option("--out", outdir, "override output.dir");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fail("usage", 1, e.what());
  }

  const auto* chosen = app.get_subcommands().front();
  try {
    tmf::CommandContext ctx;
    ctx.config = tmf::load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (outdir) ctx.config.output_dir = *outdir;
    ctx.outdir = ctx.config.output_dir;
    ctx.workers = workers;
    tmf::command_table().at(chosen->get_name())(ctx);
  } catch (const tmf::ConfigError& e) {
    return fail("config", 2, e.what(), e.key());
  } catch (const tmf::NumericalError& e) {
    return fail("numerical", 3, e.what());
  } catch (const tmf::IoError& e) {
    return fail("io", 4, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", 4, e.what());
  } catch (const std::exception& e) {
    return fail("internal", 5, e.what());
  }
  return 0;
}
