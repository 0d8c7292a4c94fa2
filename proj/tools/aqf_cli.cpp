// Command-line driver: aqf <subcommand> [--config file] [overrides...]

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aqf/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Next-day air-quality index forecasting pipeline"};
    app.require_subcommand(1, 1);

    std::string config_path, input, out, task, country, method;
    std::vector<std::string> excluded;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;

    for (const auto& name : aqf::subcommands()) {
        auto* sub = app.add_subcommand(name, name == "all" ? "run every stage in order" : "run the " + name + " stage");
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--input", input, "raw CSV snapshot");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--task", task, "regression, classification or both");
        sub->add_option("--country", country, "country for the projection and the LIME instance");
        sub->add_option("--exclude-feature", excluded, "drop a feature (repeatable)");
        sub->add_option("--seed", seed, "global seed");
        sub->add_option("--workers", workers, "worker threads");
        sub->add_option("--method", method, "explain method: lime, permutation, pdp or all");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string subcommand = app.get_subcommands().front()->get_name();

    aqf::PipelineConfig cfg;
    try {
        if (!config_path.empty()) cfg = aqf::PipelineConfig::load(config_path);
        if (!input.empty()) cfg.set("input", input);
        if (!out.empty()) cfg.set("out", out);
        if (!task.empty()) cfg.set("task", task);
        if (!country.empty()) cfg.set("country", country);
        for (const auto& f : excluded) cfg.set("exclude_feature", f);
        if (seed) cfg.set("seed", std::to_string(*seed));
        if (workers) cfg.set("workers", std::to_string(*workers));
        if (!method.empty()) cfg.set("explain.method", method);
    } catch (const aqf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }
    return aqf::run(subcommand, cfg);
}
