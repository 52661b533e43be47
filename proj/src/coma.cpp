#include "uavipp/coma.hpp"

#include "uavipp/checkpoint.hpp"
#include "uavipp/errors.hpp"
#include "uavipp/npy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace uavipp {

std::vector<double> discounted_returns(std::span<const double> rewards, std::span<const std::uint8_t> terminal,
                                       double gamma)
{
    if (rewards.size() != terminal.size()) {
        throw ContractViolation("rewards and terminal flags differ in length");
    }
    std::vector<double> g(rewards.size());
    double next = 0.0;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        if (terminal[k]) {
            next = 0.0;
        }
        g[k] = rewards[k] + gamma * next;
        next = g[k];
    }
    return g;
}

std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const std::uint8_t> terminal,
                                   std::span<const double> v_next, double gamma, double lambda)
{
    if (rewards.size() != terminal.size() || rewards.size() != v_next.size()) {
        throw ContractViolation("rewards, terminal flags and bootstrap values differ in length");
    }
    std::vector<double> g(rewards.size());
    double next = 0.0;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        if (terminal[k]) {
            g[k] = rewards[k];
        } else {
            g[k] = rewards[k] + gamma * ((1.0 - lambda) * v_next[k] + lambda * next);
        }
        next = g[k];
    }
    return g;
}

torch::Tensor critic_loss(const torch::Tensor& q, const torch::Tensor& taken, const torch::Tensor& target)
{
    const auto q_taken = q.gather(1, taken.view({-1, 1})).squeeze(1);
    return (q_taken - target).pow(2).mean();
}

double counterfactual_advantage(const std::array<double, kNumActions>& q, const ActionDistribution& pi, Action taken)
{
    double baseline = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
        baseline += pi[static_cast<std::size_t>(a)] * q[static_cast<std::size_t>(a)];
    }
    return q[static_cast<std::size_t>(to_index(taken))] - baseline;
}

torch::Tensor counterfactual_advantage(const torch::Tensor& q, const torch::Tensor& pi, const torch::Tensor& taken)
{
    const auto q_taken = q.gather(1, taken.view({-1, 1})).squeeze(1);
    return q_taken - (pi * q).sum(1);
}

torch::Tensor actor_loss(const torch::Tensor& log_pi_taken, const torch::Tensor& advantage)
{
    return -(log_pi_taken * advantage.detach()).mean();
}

ComaAgent make_agent(const PolicyArch& arch, Ablation ablate, std::optional<SendfuseModel> sendfuse,
                     std::uint64_t seed)
{
    if (uses_sendfuse(ablate) && !sendfuse) {
        throw ConfigError("this variant needs a pretrained SenDFuse model");
    }
    torch::manual_seed(seed);
    ComaAgent a;
    a.arch = arch;
    a.ablate = ablate;
    a.actor = PolicyNet(kActorChannels, arch, uses_cbam(ablate));
    a.critic = PolicyNet(kCriticChannels, arch, uses_cbam(ablate));
    if (uses_sendfuse(ablate)) {
        a.sendfuse = std::move(sendfuse);
        a.canvas_side = a.sendfuse->arch.patch_size;
        for (auto& p : a.sendfuse->net->parameters()) {
            p.set_requires_grad(false);
        }
    }
    return a;
}

std::vector<Image> fusion_canvases(ComaAgent& agent, const SwarmState& state, const ChannelParams& channel, Rng& rng)
{
    const int n = state.n_uavs();
    const int side = agent.canvas_side;
    if (state.last_readings.empty()) {
        return std::vector<Image>(static_cast<std::size_t>(n), Image(side, side, kUnknownFill));
    }
    std::vector<Message> sent;
    for (int j = 0; j < n; ++j) {
        sent.push_back(to_message(j, state.last_readings[static_cast<std::size_t>(j)]));
    }
    const auto inboxes = broadcast(sent, channel, rng);
    std::vector<std::vector<Image>> aligned;
    for (int i = 0; i < n; ++i) {
        aligned.push_back(align(inboxes[static_cast<std::size_t>(i)], i, state.poses[static_cast<std::size_t>(i)],
                                side, side));
    }
    std::vector<Image> out;
    if (agent.sendfuse) {
        const std::size_t n_src = aligned.front().size();
        auto stack = torch::empty({static_cast<std::int64_t>(n_src), n, 1, side, side}, torch::kFloat32);
        for (std::size_t s = 0; s < n_src; ++s) {
            for (int r = 0; r < n; ++r) {
                stack[static_cast<std::int64_t>(s)][r][0].copy_(image_to_tensor(aligned[static_cast<std::size_t>(r)][s])[0]);
            }
        }
        const auto fused = run(*agent.sendfuse, stack).image;
        for (int r = 0; r < n; ++r) {
            out.push_back(tensor_to_image(fused[r]));
        }
        return out;
    }
    for (const auto& sources : aligned) {
        Image mean(side, side, 0.0f);
        for (const auto& img : sources) {
            for (std::size_t k = 0; k < img.pixels.size(); ++k) {
                mean.pixels[k] += img.pixels[k];
            }
        }
        const float inv = 1.0f / static_cast<float>(sources.size());
        for (auto& v : mean.pixels) {
            v *= inv;
        }
        out.push_back(std::move(mean));
    }
    return out;
}

std::vector<ObservationStack> actor_observations(ComaAgent& agent, const SwarmState& state, int z_max,
                                                 const ChannelParams& channel, Rng& rng)
{
    const auto canvases = fusion_canvases(agent, state, channel, rng);
    std::vector<ObservationStack> obs;
    for (int i = 0; i < state.n_uavs(); ++i) {
        obs.push_back(build_actor_obs(state, i, canvases[static_cast<std::size_t>(i)], z_max));
    }
    return obs;
}

namespace {

struct Buffer {
    std::vector<ObservationStack> actor_obs;   // T * N
    std::vector<ObservationStack> critic_obs;  // T * N
    std::vector<ActionMask> masks;             // T * N
    std::vector<std::int64_t> actions;         // T * N
    std::vector<double> rewards;               // T
    std::vector<std::uint8_t> terminal;        // T

    std::size_t size() const { return rewards.size(); }
    void clear() { *this = Buffer{}; }
};

void clip_and_step(torch::optim::Optimizer& opt, PolicyNet& net, double clip)
{
    if (clip > 0.0) {
        torch::nn::utils::clip_grad_norm_(net->parameters(), clip);
    }
    opt.step();
}

[[noreturn]] void diverged(const ComaOptions& options, const std::string& what, int episode, int update,
                           const Buffer& buffer, double c_loss, double a_loss)
{
    std::ostringstream msg;
    msg << "COMA training diverged: " << what << "\n"
        << "episode=" << episode << " update=" << update << " buffer_transitions=" << buffer.size() << "\n"
        << "critic_loss=" << c_loss << " actor_loss=" << a_loss << "\n"
        << "lr_actor=" << options.train.lr_actor << " lr_critic=" << options.train.lr_critic
        << " grad_clip=" << options.train.grad_clip << "\n";
    double rmin = 0.0, rmax = 0.0;
    if (!buffer.rewards.empty()) {
        rmin = *std::min_element(buffer.rewards.begin(), buffer.rewards.end());
        rmax = *std::max_element(buffer.rewards.begin(), buffer.rewards.end());
    }
    msg << "reward_min=" << rmin << " reward_max=" << rmax << "\n";
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        std::ofstream(*options.out_dir / "diagnostics.txt") << msg.str();
    }
    throw TrainingDiverged(msg.str());
}

void dump_stacks(const std::filesystem::path& dir, const std::string& name, const std::vector<ObservationStack>& obs)
{
    std::filesystem::create_directories(dir);
    std::vector<float> flat;
    for (const auto& o : obs) {
        flat.insert(flat.end(), o.data.begin(), o.data.end());
    }
    write_npy(dir / (name + ".npy"), flat,
              {static_cast<std::int64_t>(obs.size()), obs.front().channels, kObsSide, kObsSide});
}

std::string checkpoint_name(int episode)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ep_%05d.ckpt", episode);
    return buf;
}

} // namespace

TrainResult train_coma(ComaAgent& agent, std::shared_ptr<const GroundTruthGrid> truth, const EpisodeConfig& config,
                       const ComaOptions& options)
{
    options.train.validate();
    config.validate(truth.get());
    const auto& tc = options.train;
    const int n = config.n_uavs;

    torch::manual_seed(derive_seed(options.seed, 3));
    torch::optim::Adam actor_opt(agent.actor->parameters(), torch::optim::AdamOptions(tc.lr_actor));
    torch::optim::Adam critic_opt(agent.critic->parameters(), torch::optim::AdamOptions(tc.lr_critic));
    Rng action_rng(derive_seed(options.seed, 1));
    Rng channel_rng(derive_seed(options.seed, 2));
    Environment env(truth, config);

    TrainResult result;
    Buffer buffer;

    auto update = [&](int episode) {
        const auto m = static_cast<std::int64_t>(buffer.actions.size());
        const auto co = stack_observations(buffer.critic_obs);
        const auto ao = stack_observations(buffer.actor_obs);
        const auto mask = stack_masks(buffer.masks);
        const auto u = torch::tensor(buffer.actions, torch::kLong);

        torch::Tensor q_old;
        {
            torch::NoGradGuard no_grad;
            q_old = agent.critic->forward(co);
        }
        std::vector<double> g;
        if (tc.return_mode == ReturnMode::monte_carlo) {
            g = discounted_returns(buffer.rewards, buffer.terminal, tc.gamma);
        } else {
            const auto q_taken = q_old.gather(1, u.view({-1, 1})).view({-1, n}).mean(1).to(torch::kFloat64).contiguous();
            const double* v = q_taken.data_ptr<double>();
            std::vector<double> v_next(buffer.size(), 0.0);
            for (std::size_t t = 0; t + 1 < buffer.size(); ++t) {
                v_next[t] = v[t + 1];
            }
            g = lambda_returns(buffer.rewards, buffer.terminal, v_next, tc.gamma, tc.lambda);
        }
        std::vector<float> target;
        target.reserve(static_cast<std::size_t>(m));
        for (double gt : g) {
            target.insert(target.end(), static_cast<std::size_t>(n), static_cast<float>(gt));
        }
        const auto target_t = torch::tensor(target, torch::kFloat32);

        double c_val = 0.0;
        for (int k = 0; k < tc.critic_steps; ++k) {
            critic_opt.zero_grad();
            const auto c_loss = critic_loss(agent.critic->forward(co), u, target_t);
            c_val = c_loss.item<double>();
            if (!std::isfinite(c_val)) {
                diverged(options, "non-finite critic loss", episode, static_cast<int>(result.updates.size()), buffer,
                         c_val, 0.0);
            }
            c_loss.backward();
            clip_and_step(critic_opt, agent.critic, tc.grad_clip);
        }

        torch::Tensor q_new;
        {
            torch::NoGradGuard no_grad;
            q_new = agent.critic->forward(co);
        }
        actor_opt.zero_grad();
        const auto log_pi = masked_log_softmax(agent.actor->forward(ao), mask);
        const auto pi = log_pi.exp();
        auto adv = counterfactual_advantage(q_new, pi.detach(), u);
        if (tc.normalize_advantage && m > 1) {
            adv = adv / (adv.std() + 1e-8);
        }
        auto a_loss = actor_loss(log_pi.gather(1, u.view({-1, 1})).squeeze(1), adv);
        if (tc.entropy_coef > 0.0) {
            // Masked entries have pi = 0 and log_pi = -inf; zero log_pi there so the product stays finite.
            const auto plogp = pi * log_pi.masked_fill(mask.logical_not(), 0.0);
            a_loss = a_loss + tc.entropy_coef * plogp.sum(1).mean();
        }
        const double a_val = a_loss.item<double>();
        if (!std::isfinite(a_val)) {
            diverged(options, "non-finite actor loss", episode, static_cast<int>(result.updates.size()), buffer,
                     c_val, a_val);
        }
        a_loss.backward();
        clip_and_step(actor_opt, agent.actor, tc.grad_clip);

        result.updates.push_back({static_cast<int>(buffer.size()), c_val, a_val});
        buffer.clear();
    };

    for (int ep = 1; ep <= tc.episodes; ++ep) {
        env.reset(derive_seed(options.seed, 100000 + static_cast<std::uint64_t>(ep)));
        double ep_reward = 0.0;
        int t = 0;
        while (!env.done()) {
            const auto& state = env.state();
            auto obs = actor_observations(agent, state, config.z_max, options.channel, channel_rng);
            std::vector<ActionMask> masks;
            for (int i = 0; i < n; ++i) {
                masks.push_back(env.valid_actions(i));
            }
            const auto dists = actor_distributions(agent.actor, obs, masks);
            std::vector<Action> joint;
            for (const auto& d : dists) {
                joint.push_back(select_action(d, SelectMode::sample, action_rng));
            }
            std::vector<ObservationStack> critic_obs;
            for (int i = 0; i < n; ++i) {
                critic_obs.push_back(build_critic_obs(obs[static_cast<std::size_t>(i)], state, i, joint, i));
            }
            if (options.dump_obs && ep == 1) {
                char name[32];
                std::snprintf(name, sizeof(name), "t%02d", t);
                dump_stacks(*options.dump_obs, std::string("actor_") + name, obs);
                dump_stacks(*options.dump_obs, std::string("critic_") + name, critic_obs);
            }
            const auto step = env.step(joint);
            ep_reward += step.reward;
            for (int i = 0; i < n; ++i) {
                buffer.actions.push_back(to_index(joint[static_cast<std::size_t>(i)]));
            }
            buffer.actor_obs.insert(buffer.actor_obs.end(), std::make_move_iterator(obs.begin()),
                                    std::make_move_iterator(obs.end()));
            buffer.critic_obs.insert(buffer.critic_obs.end(), std::make_move_iterator(critic_obs.begin()),
                                     std::make_move_iterator(critic_obs.end()));
            buffer.masks.insert(buffer.masks.end(), masks.begin(), masks.end());
            buffer.rewards.push_back(step.reward);
            buffer.terminal.push_back(env.done() ? 1 : 0);
            if (static_cast<int>(buffer.size()) >= tc.batch_size) {
                update(ep);
            }
            ++t;
        }
        const auto& final_belief = env.state().global_belief;
        EpisodeRecord rec{ep, ep_reward, entropy(final_belief), f1_score(final_belief, *truth)};
        result.trace.push_back(rec);
        if (options.on_episode) {
            options.on_episode(rec);
        }
        ++agent.episodes_trained;
        if (options.out_dir && tc.checkpoint_every > 0 && ep % tc.checkpoint_every == 0) {
            save_agent(*options.out_dir / "checkpoints" / checkpoint_name(ep), agent);
            write_reward_trace(*options.out_dir / "reward_trace.csv", result.trace);
        }
    }
    if (options.out_dir) {
        write_reward_trace(*options.out_dir / "reward_trace.csv", result.trace);
        write_update_trace(*options.out_dir / "updates.csv", result.updates);
    }
    return result;
}

void write_update_trace(const std::filesystem::path& path, const std::vector<UpdateStats>& updates)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    out << "update,transitions,critic_loss,actor_loss\n";
    for (std::size_t k = 0; k < updates.size(); ++k) {
        out << k + 1 << ',' << updates[k].transitions << ',' << format_double(updates[k].critic_loss) << ','
            << format_double(updates[k].actor_loss) << '\n';
    }
}

void write_reward_trace(const std::filesystem::path& path, const std::vector<EpisodeRecord>& trace)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    out << "episode,reward,entropy_final,f1_final\n";
    for (const auto& r : trace) {
        out << r.episode << ',' << format_double(r.reward) << ',' << format_double(r.entropy_final) << ','
            << format_double(r.f1_final) << '\n';
    }
}

std::vector<EpisodeRecord> read_reward_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read reward trace " + path.string());
    }
    std::string line;
    std::getline(in, line);
    std::vector<EpisodeRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string f[4];
        for (auto& s : f) {
            if (!std::getline(row, s, ',')) {
                throw ConfigError("malformed reward trace row: " + line);
            }
        }
        out.push_back({std::stoi(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
    }
    return out;
}

void save_agent(const std::filesystem::path& path, const ComaAgent& agent)
{
    Checkpoint c;
    c.kind = "policy";
    std::string widths;
    for (std::size_t i = 0; i < agent.arch.widths.size(); ++i) {
        widths += (i ? "," : "") + std::to_string(agent.arch.widths[i]);
    }
    c.meta["ablate"] = std::string(to_string(agent.ablate));
    c.meta["widths"] = widths;
    c.meta["reduction"] = std::to_string(agent.arch.reduction);
    c.meta["hidden"] = std::to_string(agent.arch.hidden);
    c.meta["canvas_side"] = std::to_string(agent.canvas_side);
    c.meta["episodes_trained"] = std::to_string(agent.episodes_trained);
    c.meta["has_sendfuse"] = agent.sendfuse ? "1" : "0";
    append_module(c, "actor.", *agent.actor);
    append_module(c, "critic.", *agent.critic);
    if (agent.sendfuse) {
        append_sendfuse(c, "sendfuse.", *agent.sendfuse);
    }
    write_checkpoint(path, c);
}

ComaAgent load_agent(const std::filesystem::path& path)
{
    const auto c = read_checkpoint(path, "policy");
    PolicyArch arch;
    arch.widths.clear();
    std::istringstream ws(c.get("widths"));
    for (std::string w; std::getline(ws, w, ',');) {
        arch.widths.push_back(std::stoi(w));
    }
    arch.reduction = c.get_int("reduction");
    arch.hidden = c.get_int("hidden");
    const auto ablate = ablation_from_string(c.get("ablate"));
    std::optional<SendfuseModel> sf;
    if (c.get("has_sendfuse") == "1") {
        sf = read_sendfuse(c, "sendfuse.");
    }
    auto agent = make_agent(arch, ablate, std::move(sf), 0);
    load_module(c, "actor.", *agent.actor);
    load_module(c, "critic.", *agent.critic);
    agent.canvas_side = c.get_int("canvas_side");
    agent.episodes_trained = c.get_int("episodes_trained");
    return agent;
}

LearnedPolicy::LearnedPolicy(std::shared_ptr<ComaAgent> agent, ChannelParams channel)
    : agent_(std::move(agent)), channel_(channel)
{
}

std::vector<Action> LearnedPolicy::act(const Environment& env, Rng& rng)
{
    const auto obs = actor_observations(*agent_, env.state(), env.config().z_max, channel_, rng);
    std::vector<ActionMask> masks;
    for (int i = 0; i < env.state().n_uavs(); ++i) {
        masks.push_back(env.valid_actions(i));
    }
    std::vector<Action> joint;
    for (const auto& d : actor_distributions(agent_->actor, obs, masks)) {
        joint.push_back(select_action(d, SelectMode::greedy, rng));
    }
    return joint;
}

} // namespace uavipp
