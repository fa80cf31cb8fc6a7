#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bundleflow/commands.hpp"
#include "bundleflow/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Cohomogeneity-one bundle flows: Einstein points, phase portraits, metric reconstruction, checks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::string family;

    for (const auto& name : bundleflow::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        if (name == "verify") sub->add_option("--family", family, "Only checks whose id starts with this prefix");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return bundleflow::kExitConfig;
    }

    bundleflow::CommandRequest req;
    req.command = app.get_subcommands().front()->get_name();
    req.out_dir = out_dir;
    req.family = family;
    if (!config_path.empty()) {
        try {
            req.config_text = bundleflow::read_text_file(config_path);
        } catch (const bundleflow::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return bundleflow::kExitConfig;
        }
    }
    return bundleflow::run_command(req, std::cerr);
}
