#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "muce/errors.hpp"
#include "muce/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"desk-scale lab for contrastive multi-user channel estimation"};
    app.require_subcommand(1);

    std::string config_path, out_override, stage = "all", axis = "snr";
    uint64_t seed = 0;
    bool force = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config (built-in defaults when absent)");
        sub->add_option("--seed", seed, "root seed (overrides the config)");
        sub->add_option("--out", out_override, "output directory (overrides the config)");
    };

    CLI::App* gen = app.add_subcommand("generate", "draw the scene, channels, and measurements");
    add_common(gen);
    gen->add_flag("--force", force, "regenerate over existing data");

    CLI::App* train = app.add_subcommand("train", "train one stage (or all of them)");
    add_common(train);
    train->add_option("--stage", stage, "clnet | dsnet:<q> | joint | baselines | all");

    CLI::App* eval = app.add_subcommand("evaluate", "score every trained method on the test set");
    add_common(eval);
    eval->add_option("--axis", axis, "snr | labels | pilot | grid");

    CLI::App* study = app.add_subcommand("similarity-study", "similarity vs distance curves");
    add_common(study);

    CLI11_PARSE(app, argc, argv);

    try {
        muce::cfg::ExperimentConfig cfg = config_path.empty()
                                              ? muce::cfg::ExperimentConfig{}
                                              : muce::cfg::parse_config(config_path);
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--seed") > 0) cfg.seed = seed;
        if (!out_override.empty()) cfg.out = out_override;
        cfg.validate();
        if (sub == gen)
            muce::exp::cmd_generate(cfg, force);
        else if (sub == train)
            muce::exp::cmd_train(cfg, stage);
        else if (sub == eval)
            muce::exp::cmd_evaluate(cfg, axis);
        else
            muce::exp::cmd_similarity_study(cfg);
    } catch (const muce::Error& e) {
        std::fprintf(stderr, "muce: %s\n", e.what());
        return 1;
    }
    return 0;
}
