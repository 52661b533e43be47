#include "commands.hpp"

#include "uavipp/baselines.hpp"
#include "uavipp/coma.hpp"
#include "uavipp/config.hpp"
#include "uavipp/envgen.hpp"
#include "uavipp/errors.hpp"
#include "uavipp/evalkit.hpp"
#include "uavipp/sendfuse.hpp"

#include <CLI11.hpp>
#include <torch/torch.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace uavipp::cli {

std::filesystem::path out_root()
{
    const char* env = std::getenv("UAVIPP_OUT_ROOT");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string noise;
};

void add_common(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--config", f.config, "Run configuration file");
    cmd->add_option("--seed", f.seed, "Overrides the configured seed");
    cmd->add_option("--noise", f.noise, "Channel noise level")->check(CLI::IsMember({"none", "moderate", "loud"}));
}

RunConfig resolve_config(const CommonFlags& f, const std::filesystem::path& fallback = {})
{
    RunConfig cfg;
    if (!f.config.empty()) {
        cfg = load_config(f.config);
    } else if (!fallback.empty() && std::filesystem::exists(fallback)) {
        cfg = load_config(fallback);
    }
    if (f.seed) {
        cfg.seed = *f.seed;
    }
    if (!f.noise.empty()) {
        cfg.channel = ChannelParams::for_level(noise_level_from_string(f.noise));
    }
    cfg.validate();
    return cfg;
}

void stamp_run_dir(const std::filesystem::path& dir, const RunConfig& cfg)
{
    std::filesystem::create_directories(dir);
    save_config(cfg, dir / "config.ini");
    std::ofstream(dir / "VERSION") << "uavipp " << UAVIPP_VERSION << "\n";
}

void log(const std::string& msg) { std::cerr << msg << std::endl; }

std::filesystem::path default_sendfuse_path() { return out_root() / "sendfuse" / "sendfuse.ckpt"; }

// ---------------------------------------------------------------- gen-env

struct GenEnvArgs {
    CommonFlags common;
    std::optional<int> width, height, shapes;
    std::optional<std::uint64_t> env_seed;
    std::string out;
};

int cmd_gen_env(const GenEnvArgs& a)
{
    auto cfg = resolve_config(a.common);
    auto spec = cfg.env.synthetic;
    if (a.width) {
        spec.width = *a.width;
    }
    if (a.height) {
        spec.height = *a.height;
    }
    if (a.shapes) {
        spec.shape_count = *a.shapes;
    }
    if (a.env_seed) {
        spec.seed = *a.env_seed;
    }
    const std::filesystem::path out =
        a.out.empty() ? out_root() / "envs" / ("env_seed" + std::to_string(spec.seed) + ".png") : std::filesystem::path(a.out);
    if (out.has_parent_path()) {
        std::filesystem::create_directories(out.parent_path());
    }
    const auto grid = gen_env(spec, out);
    std::cout << out.string() << ": " << grid.width() << "x" << grid.height() << ", " << grid.valuable_count()
              << " valuable cells\n";
    return kExitOk;
}

// ---------------------------------------------------------------- pretrain-sendfuse

struct PretrainArgs {
    CommonFlags common;
    std::optional<int> epochs;
    std::string out;
};

int cmd_pretrain(const PretrainArgs& a)
{
    auto cfg = resolve_config(a.common);
    if (a.epochs) {
        cfg.sendfuse.epochs = *a.epochs;
    }
    cfg.validate();
    const std::filesystem::path ckpt = a.out.empty() ? default_sendfuse_path() : std::filesystem::path(a.out);
    const auto dir = ckpt.has_parent_path() ? ckpt.parent_path() : std::filesystem::path(".");
    stamp_run_dir(dir, cfg);

    const auto& s = cfg.sendfuse;
    log("generating " + std::to_string(s.dataset_size) + " training patches");
    const auto train = make_patch_dataset(s.dataset_size, s.patch_size, derive_seed(cfg.seed, 10));
    const auto held_out = make_patch_dataset(std::max(100, s.dataset_size / 10), s.patch_size, derive_seed(cfg.seed, 11));
    auto model = make_sendfuse(s, derive_seed(cfg.seed, 12));

    PretrainOptions opt;
    opt.epochs = s.epochs;
    opt.batch_size = s.batch_size;
    opt.lr = s.lr;
    opt.channel = cfg.channel;
    opt.loss = s.loss;
    opt.seed = derive_seed(cfg.seed, 13);
    const auto t0 = std::chrono::steady_clock::now();
    opt.on_epoch = [&](const EpochLoss& e) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char buf[160];
        std::snprintf(buf, sizeof(buf), "epoch %d/%d  total %.5f  mse %.5f  mae %.5f  ssim %.4f  (%.0f s)", e.epoch,
                      opt.epochs, e.total, e.mse, e.mae, e.ssim, secs);
        log(buf);
    };
    const auto trace = pretrain(model, train, opt);
    save_sendfuse(ckpt, model);
    write_loss_trace(dir / "loss_trace.csv", trace);

    const auto denoise = evaluate_denoising(model, held_out, cfg.channel, derive_seed(cfg.seed, 14));
    const auto fusion = evaluate_fusion(model, held_out, cfg.channel, 3, derive_seed(cfg.seed, 15));
    std::ofstream eval(dir / "denoise_eval.csv");
    eval << "metric,value\n"
         << "ssim_output," << format_double(denoise.ssim_output) << "\n"
         << "ssim_noisy," << format_double(denoise.ssim_noisy) << "\n"
         << "ssim_fused," << format_double(fusion.ssim_fused) << "\n"
         << "ssim_best_single," << format_double(fusion.ssim_best_single) << "\n"
         << "ssim_clean_recon," << format_double(fusion.ssim_clean_recon) << "\n";
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "held-out SSIM: output %.4f vs noisy %.4f; fused %.4f vs best single %.4f; clean recon %.4f",
                  denoise.ssim_output, denoise.ssim_noisy, fusion.ssim_fused, fusion.ssim_best_single,
                  fusion.ssim_clean_recon);
    log(buf);
    std::cout << ckpt.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    CommonFlags common;
    std::optional<int> episodes;
    std::string ablate;
    std::string out;
    std::string sendfuse;
    std::string dump_obs;
};

SendfuseModel require_sendfuse(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw ConfigError("SenDFuse checkpoint not found at " + path.string() +
                          "; run `uavipp pretrain-sendfuse --out " + path.string() +
                          "` first, or pass --sendfuse <checkpoint>");
    }
    auto model = load_sendfuse(path);
    if (!model.trained) {
        log("warning: SenDFuse checkpoint " + path.string() + " was never pretrained");
    }
    return model;
}

int cmd_train(const TrainArgs& a)
{
    auto cfg = resolve_config(a.common);
    if (a.episodes) {
        cfg.train.episodes = *a.episodes;
    }
    if (!a.ablate.empty()) {
        cfg.train.ablate = ablation_from_string(a.ablate);
    }
    cfg.validate();
    const std::filesystem::path dir =
        a.out.empty() ? out_root() / "train" /
                            (std::string(to_string(cfg.train.ablate)) + "_seed" + std::to_string(cfg.seed))
                      : std::filesystem::path(a.out);

    std::optional<SendfuseModel> sf;
    if (uses_sendfuse(cfg.train.ablate)) {
        sf = require_sendfuse(a.sendfuse.empty() ? default_sendfuse_path() : std::filesystem::path(a.sendfuse));
    }
    const auto truth = std::make_shared<const GroundTruthGrid>(build_ground_truth(cfg.env));
    const auto ec = build_episode_config(cfg, *truth);
    stamp_run_dir(dir, cfg);

    auto agent = make_agent(cfg.train.arch, cfg.train.ablate, std::move(sf), derive_seed(cfg.seed, 0));
    ComaOptions opt;
    opt.train = cfg.train;
    opt.channel = cfg.channel;
    opt.seed = cfg.seed;
    opt.out_dir = dir;
    if (!a.dump_obs.empty()) {
        opt.dump_obs = a.dump_obs;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const int every = std::max(1, cfg.train.episodes / 20);
    double window = 0.0;
    int in_window = 0;
    opt.on_episode = [&](const EpisodeRecord& r) {
        window += r.reward;
        ++in_window;
        if (r.episode % every == 0 || r.episode == cfg.train.episodes) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            char buf[160];
            std::snprintf(buf, sizeof(buf), "[%s] episode %d/%d  mean reward %.3f  last F1 %.3f  H %.3f  (%.0f s)",
                          std::string(variant_name(cfg.train.ablate)).c_str(), r.episode, cfg.train.episodes,
                          window / in_window, r.f1_final, r.entropy_final, secs);
            log(buf);
            window = 0.0;
            in_window = 0;
        }
    };
    train_coma(agent, truth, ec, opt);
    save_agent(dir / "policy.ckpt", agent);
    std::cout << (dir / "policy.ckpt").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    CommonFlags common;
    std::vector<std::string> policies;
    std::string checkpoint;
    std::string env;
    std::optional<int> trials;
    std::string out;
    bool traces = true;
};

std::unique_ptr<JointPolicy> make_policy(const std::string& name, const std::string& checkpoint,
                                         const ChannelParams& channel)
{
    if (name == "random") {
        return std::make_unique<RandomPlanner>();
    }
    if (name == "nl") {
        return std::make_unique<LawnmowerPlanner>();
    }
    if (name == "ag") {
        return std::make_unique<AdaptiveGainPlanner>();
    }
    if (checkpoint.empty()) {
        throw ConfigError("--policy ours needs --checkpoint <policy.ckpt> (written by `uavipp train`)");
    }
    auto agent = std::make_shared<ComaAgent>(load_agent(checkpoint));
    if (agent->sendfuse && !agent->sendfuse->trained) {
        log("warning: the policy's SenDFuse model was never pretrained");
    }
    return std::make_unique<LearnedPolicy>(agent, channel);
}

int cmd_eval(const EvalArgs& a)
{
    const std::filesystem::path run_config =
        a.checkpoint.empty() ? std::filesystem::path() : std::filesystem::path(a.checkpoint).parent_path() / "config.ini";
    auto cfg = resolve_config(a.common, run_config);
    if (a.trials) {
        cfg.eval.trials = *a.trials;
    }
    std::string env_name = "synthetic";
    if (!a.env.empty() && a.env != "synthetic") {
        cfg.env.kind = "image";
        cfg.env.image_path = a.env;
        env_name = std::filesystem::path(a.env).stem().string();
    } else if (cfg.env.kind == "image") {
        env_name = std::filesystem::path(cfg.env.image_path).stem().string();
    }
    cfg.validate();
    const std::filesystem::path dir = a.out.empty() ? out_root() / "eval" / env_name : std::filesystem::path(a.out);
    const auto truth = std::make_shared<const GroundTruthGrid>(build_ground_truth(cfg.env));
    const auto ec = build_episode_config(cfg, *truth);

    std::vector<std::unique_ptr<JointPolicy>> policies;
    for (const auto& p : a.policies) {
        policies.push_back(make_policy(p, a.checkpoint, cfg.channel));
    }
    stamp_run_dir(dir, cfg);
    std::vector<MethodResult> results;
    for (auto& policy : policies) {
        const auto r = run_trials(*policy, truth, ec, cfg.eval.trials, derive_seed(cfg.seed, 20));
        const auto& last = r.stats.checkpoints.back();
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-7s F1 %.4f +- %.4f   H %.4f +- %.4f  (step %d, %d trials)",
                      policy->name().c_str(), last.f1.mean, last.f1.std, last.entropy.mean, last.entropy.std,
                      last.step, r.stats.n_trials);
        std::cout << buf << "\n";
        if (a.traces) {
            std::ofstream out(dir / ("traces_" + policy->name() + ".jsonl"));
            for (std::size_t k = 0; k < r.traces.size(); ++k) {
                write_trace_jsonl(out, r.traces[k], static_cast<int>(k));
            }
        }
        results.push_back({env_name, policy->name(), r.stats});
    }
    make_report(results, dir);
    return kExitOk;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
    std::string curves;
    std::string out;
};

int cmd_plot(const PlotArgs& a)
{
    const std::filesystem::path out = a.out.empty() ? std::filesystem::path(a.curves).parent_path() : std::filesystem::path(a.out);
    for (const auto& p : plot_curves(a.curves, out)) {
        std::cout << p.string() << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- config

int cmd_config(const CommonFlags& f)
{
    std::cout << to_ini(resolve_config(f));
    return kExitOk;
}

} // namespace

int run(int argc, char** argv)
{
    torch::set_num_threads(1);

    CLI::App app{"uavipp: multi-UAV informative path planning with COMA and SenDFuse"};
    app.require_subcommand(1);
    std::function<int()> action;

    GenEnvArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-env", "Generate a synthetic star-blob environment image");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--width", gen.width, "Grid width")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--height", gen.height, "Grid height")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--shapes", gen.shapes, "Number of star shapes");
    gen_cmd->add_option("--env-seed", gen.env_seed, "Generator seed");
    gen_cmd->add_option("--out", gen.out, "Output image (.png or .pgm)");
    gen_cmd->callback([&] { action = [&] { return cmd_gen_env(gen); }; });

    PretrainArgs pre;
    auto* pre_cmd = app.add_subcommand("pretrain-sendfuse", "Pretrain the SenDFuse denoising autoencoder");
    add_common(pre_cmd, pre.common);
    pre_cmd->add_option("--epochs", pre.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    pre_cmd->add_option("--out", pre.out, "Checkpoint path");
    pre_cmd->callback([&] { action = [&] { return cmd_pretrain(pre); }; });

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train the actor and critic with COMA");
    add_common(tr_cmd, tr.common);
    tr_cmd->add_option("--episodes", tr.episodes, "Training episodes")->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--ablate", tr.ablate, "Module to remove")
        ->check(CLI::IsMember({"none", "cbam", "fusion", "both"}));
    tr_cmd->add_option("--out", tr.out, "Run directory");
    tr_cmd->add_option("--sendfuse", tr.sendfuse, "Pretrained SenDFuse checkpoint");
    tr_cmd->add_option("--dump-obs", tr.dump_obs, "Directory for NPY dumps of the first episode's observations");
    tr_cmd->callback([&] { action = [&] { return cmd_train(tr); }; });

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate planners over independent trials");
    add_common(ev_cmd, ev.common);
    ev_cmd->add_option("--policy", ev.policies, "Planner (repeatable)")
        ->required()
        ->check(CLI::IsMember({"ours", "ag", "nl", "random"}));
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "Policy checkpoint for --policy ours");
    ev_cmd->add_option("--env", ev.env, "Environment image, or 'synthetic' for the configured generator");
    ev_cmd->add_option("--trials", ev.trials, "Number of trials")->check(CLI::PositiveNumber);
    ev_cmd->add_option("--out", ev.out, "Output directory");
    ev_cmd->add_flag("!--no-traces", ev.traces, "Skip the JSON-lines trace files");
    ev_cmd->callback([&] { action = [&] { return cmd_eval(ev); }; });

    PlotArgs pl;
    auto* pl_cmd = app.add_subcommand("plot", "Render F1 and entropy curves from a curves.csv");
    pl_cmd->add_option("--curves", pl.curves, "curves.csv written by eval")->required();
    pl_cmd->add_option("--out", pl.out, "Output directory");
    pl_cmd->callback([&] { action = [&] { return cmd_plot(pl); }; });

    CommonFlags cf;
    bool dump = false;
    auto* cf_cmd = app.add_subcommand("config", "Print the effective configuration");
    add_common(cf_cmd, cf);
    cf_cmd->add_flag("--dump", dump, "Print all keys with their values");
    cf_cmd->callback([&] { action = [&] { return cmd_config(cf); }; });

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        return action();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace uavipp::cli
