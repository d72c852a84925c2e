/// Scenario driver: parses a JSON config, runs the solver pipeline and the
/// selected estimate suites, and writes fields plus JSON reports.
///
/// Exit codes from `run`: 0 all selected checks pass, 2 hypotheses not met
/// (nothing asserted), 1 failure or error.

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aronsson/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Aronsson equation laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> suites;

    auto* run = app.add_subcommand("run", "run a scenario config");
    run->add_option("config", config_path, "path to a scenario JSON config")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_option("--suite", suites, "estimate suites to run (overrides the config)")
        ->delimiter(',');

    auto* check = app.add_subcommand("check", "parse and validate a config");
    check->add_option("config", config_path, "path to a scenario JSON config")->required();

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand(run)) return aronsson::run_config_file(config_path, out_dir, suites);
    return aronsson::check_config_file(config_path);
}
