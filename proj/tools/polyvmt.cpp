// Command-line front end: one subcommand per pipeline stage.
#include "polyvmt/error.hpp"
#include "polyvmt/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>

int main(int argc, char** argv) {
    using namespace polyvmt;

    CLI::App app{"Hexagonal job accessibility and household VMT estimation pipeline"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string seed;
    std::string out_dir;
    std::string percentile;
    std::string min_jobs;
    std::string bootstrap_reps;
    std::string threads;
    std::vector<std::string> sets;

    app.add_option("--config", config_path, "Flat key = value configuration file");
    app.add_option("--seed", seed, "Master seed (unsigned 64-bit)");
    app.add_option("--out", out_dir, "Output directory for all artifacts");
    app.add_option("--threads", threads, "Worker threads, 0 for all cores");
    app.add_option("--set", sets, "Extra key=value override, repeatable");

    const std::map<std::string, std::string> about{
        {"synth", "Generate a synthetic region, amenity layers and households"},
        {"grid", "Tessellate the region and bin establishment jobs"},
        {"centers", "Identify employment sub-centers"},
        {"access", "Compute gravity access and instrument vectors per cell"},
        {"estimate", "Fit Tobit models per family and sample"},
        {"iv-estimate", "Fit two-step IV-Tobit models with first-stage and Sargan diagnostics"},
        {"elasticity", "Tabulate VMT elasticities from the fitted models"},
        {"scenario", "Apply a percentage access change to an elasticity"},
        {"report", "Assemble regression tables and the quintile classification"},
    };
    for (const auto& name : stage_names()) {
        auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : std::string{});
        if (name == "centers" || name == "synth" || name == "access") {
            sub->add_option("--percentile", percentile, "Density percentile for sub-center candidates");
            sub->add_option("--min-jobs", min_jobs, "Minimum total jobs of a sub-center");
        }
        if (name == "iv-estimate")
            sub->add_option("--bootstrap-reps", bootstrap_reps, "Pairs bootstrap replications");
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        KeyValues overrides;
        auto put = [&](const char* key, const std::string& value) {
            if (!value.empty())
                overrides[key] = value;
        };
        put("seed", seed);
        put("out_dir", out_dir);
        put("percentile", percentile);
        put("min_jobs", min_jobs);
        put("bootstrap_reps", bootstrap_reps);
        put("threads", threads);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + s + "'");
            overrides[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
        }
        std::optional<std::filesystem::path> file;
        if (!config_path.empty())
            file = config_path;
        const PipelineConfig cfg = resolve_config(file, overrides);
        const std::string stage = app.get_subcommands().front()->get_name();
        run_stage(stage, cfg);
        std::cerr << stage << ": wrote artifacts to " << cfg.out_dir.string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
