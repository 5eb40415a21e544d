#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "csrobust.h"

namespace {

int report_error(csr_status status, const std::string& message) {
  nlohmann::json j = {{"status", "error"}, {"code", csr_status_name(status)}, {"message", message}};
  std::cout << j.dump() << std::endl;
  return csr_exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness experiments for compressed-sensing MRI reconstruction"};
  app.set_version_flag("--version", std::string(csr_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  int jobs = 1;
  for (std::size_t i = 0; i < csr_command_count(); ++i) {
    auto* sub = app.add_subcommand(csr_command_name(i));
    sub->add_option("--config", config, "experiment config (JSON)")->required();
    sub->add_option("--jobs", jobs, "maximum concurrent jobs")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides output_dir in the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(CSR_SCHEMA, e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  csr_run_result* result = nullptr;
  const csr_status st = csr_run(command.c_str(), config.c_str(), out.empty() ? nullptr : out.c_str(), jobs, &result);
  if (st != CSR_OK) return report_error(st, csr_last_error());

  nlohmann::json j = {{"status", "ok"}, {"command", command}, {"out_dir", csr_run_out_dir(result)}};
  j["artifacts"] = nlohmann::json::array();
  for (std::size_t i = 0; i < csr_run_artifact_count(result); ++i) j["artifacts"].push_back(csr_run_artifact(result, i));
  csr_run_free(result);
  std::cout << j.dump() << std::endl;
  return 0;
}
