#include "uavipp/evalkit.hpp"

#include "uavipp/baselines.hpp"
#include "uavipp/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace uavipp {

double f1_score(const BeliefGrid& belief, const GroundTruthGrid& truth, double threshold)
{
    if (belief.width() != truth.width() || belief.height() != truth.height()) {
        throw ContractViolation("f1_score: belief and truth dimensions differ");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    const auto& probs = belief.probs();
    const auto& labels = truth.labels();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool predicted = probs[i] > threshold;
        const bool actual = labels[i] == 1;
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
    }
    if (tp == 0) {
        return 0.0;
    }
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::vector<UavPose> EpisodeTrace::trajectory(int agent) const
{
    std::vector<UavPose> path;
    path.reserve(poses.size());
    for (const auto& snapshot : poses) {
        path.push_back(snapshot[static_cast<std::size_t>(agent)]);
    }
    return path;
}

double info_gain(const std::vector<double>& entropies)
{
    if (entropies.size() < 2) {
        throw ContractViolation("info_gain needs at least one step");
    }
    double telescoped = 0.0;
    for (std::size_t j = 0; j + 1 < entropies.size(); ++j) {
        telescoped += entropies[j] - entropies[j + 1];
    }
    const double endpoints = entropies.front() - entropies.back();
    if (std::abs(telescoped - endpoints) > 1e-9) {
        throw InternalConsistencyError("info_gain: telescoped sum disagrees with endpoint difference");
    }
    return telescoped;
}

double info_gain(const EpisodeTrace& trace) { return info_gain(trace.entropy); }

std::vector<Action> RandomPlanner::act(const Environment& env, Rng& rng)
{
    std::vector<Action> joint;
    for (int i = 0; i < env.state().n_uavs(); ++i) {
        joint.push_back(random_policy(env.valid_actions(i), rng));
    }
    return joint;
}

std::optional<std::vector<UavPose>> LawnmowerPlanner::start_poses(const EpisodeConfig& config) const
{
    return lawnmower_start_poses(config.width, config.height, config.n_uavs);
}

void LawnmowerPlanner::begin_episode(const Environment& env)
{
    const auto& c = env.config();
    plan_ = lawnmower_plan(c.width, c.height, c.n_uavs, c.budget);
}

std::vector<Action> LawnmowerPlanner::act(const Environment& env, Rng& /*rng*/)
{
    const auto t = static_cast<std::size_t>(env.state().step_index);
    std::vector<Action> joint;
    for (int i = 0; i < env.state().n_uavs(); ++i) {
        const auto mask = env.valid_actions(i);
        Action a = plan_[static_cast<std::size_t>(i)][t];
        if (!mask[static_cast<std::size_t>(to_index(a))]) {
            // Blocked by a no-fly cell: take the first legal move instead.
            const auto it = std::find(mask.begin(), mask.end(), true);
            a = action_from_index(static_cast<int>(it - mask.begin()));
        }
        joint.push_back(a);
    }
    return joint;
}

std::vector<Action> AdaptiveGainPlanner::act(const Environment& env, Rng& /*rng*/)
{
    std::vector<Action> joint;
    for (int i = 0; i < env.state().n_uavs(); ++i) {
        joint.push_back(adaptive_gain_step(env.state(), i, env.valid_actions(i), env.config().sensor));
    }
    return joint;
}

EpisodeTrace run_episode(JointPolicy& policy, Environment& env, Rng& policy_rng)
{
    EpisodeTrace trace;
    policy.begin_episode(env);
    trace.entropy.push_back(entropy(env.state().global_belief));
    trace.f1.push_back(f1_score(env.state().global_belief, env.truth()));
    trace.poses.push_back(env.state().poses);
    while (!env.done()) {
        const auto joint = policy.act(env, policy_rng);
        const auto result = env.step(joint);
        trace.actions.push_back(joint);
        trace.rewards.push_back(result.reward);
        trace.entropy.push_back(result.entropy_after);
        trace.f1.push_back(f1_score(env.state().global_belief, env.truth()));
        trace.poses.push_back(env.state().poses);
    }
    trace.final_belief = env.state().global_belief;
    return trace;
}

std::array<int, kNumCheckpoints> checkpoint_steps(int budget)
{
    std::array<int, kNumCheckpoints> steps{};
    for (int k = 1; k <= kNumCheckpoints; ++k) {
        steps[static_cast<std::size_t>(k - 1)] = (k * budget + kNumCheckpoints - 1) / kNumCheckpoints;
    }
    return steps;
}

MeanStd mean_std(const std::vector<double>& values)
{
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        sq += (v - out.mean) * (v - out.mean);
    }
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

TrialStats summarize(const std::vector<EpisodeTrace>& traces, int budget)
{
    TrialStats stats;
    stats.n_trials = static_cast<int>(traces.size());
    auto column = [&](int step, bool f1) {
        std::vector<double> v;
        v.reserve(traces.size());
        for (const auto& t : traces) {
            const auto& series = f1 ? t.f1 : t.entropy;
            const auto idx = std::min<std::size_t>(static_cast<std::size_t>(step), series.size() - 1);
            v.push_back(series[idx]);
        }
        return v;
    };
    const auto steps = checkpoint_steps(budget);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        stats.checkpoints[k] = {steps[k], mean_std(column(steps[k], true)), mean_std(column(steps[k], false))};
    }
    for (int s = 0; s <= budget; ++s) {
        stats.curve.push_back({s, mean_std(column(s, true)), mean_std(column(s, false))});
    }
    return stats;
}

TrialResult run_trials(JointPolicy& policy, std::shared_ptr<const GroundTruthGrid> truth, const EpisodeConfig& config,
                       int n_trials, std::uint64_t seed)
{
    if (n_trials < 1) {
        throw ContractViolation("run_trials needs n_trials >= 1");
    }
    EpisodeConfig cfg = config;
    if (auto starts = policy.start_poses(config)) {
        cfg.start_poses = std::move(*starts);
    }
    TrialResult result;
    for (int k = 0; k < n_trials; ++k) {
        cfg.seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(k));
        Environment env(truth, cfg);
        Rng policy_rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(k) + 1));
        result.traces.push_back(run_episode(policy, env, policy_rng));
    }
    result.stats = summarize(result.traces, config.budget);
    return result;
}

namespace {

std::string fmt6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

const char* checkpoint_label(std::size_t k)
{
    static const char* labels[kNumCheckpoints] = {"33%", "67%", "100%"};
    return labels[k];
}

struct Best {
    std::size_t f1 = 0;
    std::size_t entropy = 0;
};

// Index (into results) of the best method per env and checkpoint; ties keep the first.
std::map<std::pair<std::string, std::size_t>, Best> best_per_column(const std::vector<MethodResult>& results)
{
    std::map<std::pair<std::string, std::size_t>, Best> best;
    for (std::size_t r = 0; r < results.size(); ++r) {
        for (std::size_t k = 0; k < kNumCheckpoints; ++k) {
            const auto key = std::make_pair(results[r].env, k);
            auto it = best.find(key);
            if (it == best.end()) {
                best[key] = {r, r};
                continue;
            }
            const auto& cp = results[r].stats.checkpoints[k];
            if (cp.f1.mean > results[it->second.f1].stats.checkpoints[k].f1.mean) {
                it->second.f1 = r;
            }
            if (cp.entropy.mean < results[it->second.entropy].stats.checkpoints[k].entropy.mean) {
                it->second.entropy = r;
            }
        }
    }
    return best;
}

} // namespace

void make_report(const std::vector<MethodResult>& results, const std::filesystem::path& out_dir)
{
    if (results.empty()) {
        throw ContractViolation("make_report needs at least one method");
    }
    std::filesystem::create_directories(out_dir);
    const auto best = best_per_column(results);

    std::ofstream table(out_dir / kTableCsv);
    table << "env,method,checkpoint,step,f1_mean,f1_std,h_mean,h_std,f1_best,h_best\n";
    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& m = results[r];
        for (std::size_t k = 0; k < kNumCheckpoints; ++k) {
            const auto& cp = m.stats.checkpoints[k];
            const auto& b = best.at({m.env, k});
            table << m.env << ',' << m.method << ',' << checkpoint_label(k) << ',' << cp.step << ','
                  << fmt6(cp.f1.mean) << ',' << fmt6(cp.f1.std) << ',' << fmt6(cp.entropy.mean) << ','
                  << fmt6(cp.entropy.std) << ',' << (b.f1 == r ? 1 : 0) << ',' << (b.entropy == r ? 1 : 0) << '\n';
        }
    }

    std::ofstream md(out_dir / kTableMarkdown);
    md << "| Env | Method | F1 33% | F1 67% | F1 100% | Entropy 33% | Entropy 67% | Entropy 100% |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& m = results[r];
        md << "| " << m.env << " | " << m.method;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < kNumCheckpoints; ++k) {
                const auto& cp = m.stats.checkpoints[k];
                const auto& b = best.at({m.env, k});
                const bool is_best = pass == 0 ? b.f1 == r : b.entropy == r;
                const auto& ms = pass == 0 ? cp.f1 : cp.entropy;
                const std::string mean = fmt6(ms.mean).substr(0, 6);
                md << " | " << (is_best ? "**" + mean + "**" : mean) << " ± " << fmt6(ms.std).substr(0, 6);
            }
        }
        md << " |\n";
    }

    std::ofstream curves(out_dir / kCurvesCsv);
    curves << "env,method,step,f1_mean,f1_std,h_mean,h_std\n";
    for (const auto& m : results) {
        for (const auto& s : m.stats.curve) {
            curves << m.env << ',' << m.method << ',' << s.step << ',' << fmt6(s.f1.mean) << ',' << fmt6(s.f1.std)
                   << ',' << fmt6(s.entropy.mean) << ',' << fmt6(s.entropy.std) << '\n';
        }
    }
    curves.close();
    plot_curves(out_dir / kCurvesCsv, out_dir);
}

namespace {

struct CurveRow {
    int step = 0;
    double f1_mean = 0, f1_std = 0, h_mean = 0, h_std = 0;
};

using CurveTable = std::map<std::string, std::vector<std::pair<std::string, std::vector<CurveRow>>>>;

CurveTable read_curves(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open curves file " + path.string());
    }
    CurveTable table;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string env, method, field;
        std::getline(ss, env, ',');
        std::getline(ss, method, ',');
        CurveRow row;
        std::getline(ss, field, ',');
        row.step = std::stoi(field);
        double* dst[4] = {&row.f1_mean, &row.f1_std, &row.h_mean, &row.h_std};
        for (double* d : dst) {
            if (!std::getline(ss, field, ',')) {
                throw ConfigError("malformed curves row: " + line);
            }
            *d = std::stod(field);
        }
        auto& methods = table[env];
        auto it = std::find_if(methods.begin(), methods.end(), [&](const auto& p) { return p.first == method; });
        if (it == methods.end()) {
            methods.emplace_back(method, std::vector<CurveRow>{});
            it = std::prev(methods.end());
        }
        it->second.push_back(row);
    }
    return table;
}

void write_svg(const std::filesystem::path& file, const std::string& title, const std::string& ylabel,
               const std::vector<std::pair<std::string, std::vector<CurveRow>>>& methods, bool f1)
{
    static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    constexpr double kW = 640, kH = 420, kLeft = 60, kRight = 140, kTop = 40, kBottom = 50;
    int max_step = 1;
    for (const auto& [name, rows] : methods) {
        for (const auto& r : rows) {
            max_step = std::max(max_step, r.step);
        }
    }
    auto px = [&](double step) { return kLeft + step / max_step * (kW - kLeft - kRight); };
    auto py = [&](double v) { return kH - kBottom - std::clamp(v, 0.0, 1.0) * (kH - kTop - kBottom); };

    std::ofstream svg(file);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << px(max_step) << "\" y2=\"" << py(0)
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft << "\" y2=\"" << py(1)
        << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = t / 4.0;
        svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
            << fmt6(v).substr(0, 4) << "</text>\n";
    }
    for (int s = 0; s <= max_step; s += std::max(1, max_step / 5)) {
        svg << "<text x=\"" << px(s) << "\" y=\"" << py(0) + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << s
            << "</text>\n";
    }
    svg << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
    svg << "<text x=\"16\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 16 " << kH / 2
        << ")\" text-anchor=\"middle\" font-size=\"12\">" << ylabel << "</text>\n";

    std::size_t ci = 0;
    for (const auto& [name, rows] : methods) {
        const char* color = colors[ci % std::size(colors)];
        std::ostringstream band, line;
        for (const auto& r : rows) {
            const double m = f1 ? r.f1_mean : r.h_mean;
            const double s = f1 ? r.f1_std : r.h_std;
            band << px(r.step) << ',' << py(m + s) << ' ';
            line << px(r.step) << ',' << py(m) << ' ';
        }
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
            const double m = f1 ? it->f1_mean : it->h_mean;
            const double s = f1 ? it->f1_std : it->h_std;
            band << px(it->step) << ',' << py(m - s) << ' ';
        }
        svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.18\"/>\n";
        svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        const double ly = kTop + 18.0 * static_cast<double>(ci);
        svg << "<line x1=\"" << kW - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 32 << "\" y2=\""
            << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << kW - kRight + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << name
            << "</text>\n";
        ++ci;
    }
    svg << "</svg>\n";
}

} // namespace

std::vector<std::filesystem::path> plot_curves(const std::filesystem::path& curves_csv,
                                               const std::filesystem::path& out_dir)
{
    const auto table = read_curves(curves_csv);
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [env, methods] : table) {
        const auto f1_file = out_dir / (env + "_f1.svg");
        const auto h_file = out_dir / (env + "_entropy.svg");
        write_svg(f1_file, env + ": F1-score vs. step", "F1", methods, true);
        write_svg(h_file, env + ": entropy vs. step", "normalized entropy", methods, false);
        written.push_back(f1_file);
        written.push_back(h_file);
    }
    return written;
}

void write_trace_jsonl(std::ostream& out, const EpisodeTrace& trace, int trial)
{
    for (int t = 0; t < trace.steps(); ++t) {
        nlohmann::json line;
        line["trial"] = trial;
        line["step"] = t + 1;
        auto poses = nlohmann::json::array();
        for (const auto& p : trace.poses[static_cast<std::size_t>(t + 1)]) {
            poses.push_back({p.x, p.y, p.z});
        }
        line["poses"] = std::move(poses);
        auto actions = nlohmann::json::array();
        for (Action a : trace.actions[static_cast<std::size_t>(t)]) {
            actions.push_back(to_index(a));
        }
        line["actions"] = std::move(actions);
        line["reward"] = trace.rewards[static_cast<std::size_t>(t)];
        line["entropy"] = trace.entropy[static_cast<std::size_t>(t + 1)];
        line["f1"] = trace.f1[static_cast<std::size_t>(t + 1)];
        out << line.dump() << '\n';
    }
}

} // namespace uavipp
