#include "tubenav/config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace tubenav {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Binder {
    std::map<std::string, std::function<void(const std::string&)>> setters;

    void num(const std::string& key, double* target) {
        setters[key] = [target, key](const std::string& v) {
            std::size_t pos = 0;
            *target = std::stod(v, &pos);
            if (pos != v.size()) throw std::runtime_error("bad numeric value for " + key);
        };
    }
    void integer(const std::string& key, int* target) {
        setters[key] = [target, key](const std::string& v) {
            std::size_t pos = 0;
            *target = std::stoi(v, &pos);
            if (pos != v.size()) throw std::runtime_error("bad integer value for " + key);
        };
    }
    void u64(const std::string& key, std::uint64_t* target) {
        setters[key] = [target, key](const std::string& v) {
            std::size_t pos = 0;
            *target = std::stoull(v, &pos);
            if (pos != v.size()) throw std::runtime_error("bad integer value for " + key);
        };
    }
    void str(const std::string& key, std::string* target) {
        setters[key] = [target](const std::string& v) { *target = v; };
    }
};

std::map<std::string, Binder> make_binders(WorkbenchConfig& c) {
    std::map<std::string, Binder> b;
    auto& g = b["geometry"];
    g.num("radius", &c.geometry.radius);
    g.num("tube_length", &c.geometry.tube_length);
    g.integer("n_samples", &c.geometry.n_samples);
    g.integer("raw_points", &c.geometry.raw_points);
    g.integer("circle_segments", &c.geometry.circle_segments);

    auto& s = b["sensing"];
    s.integer("n_beams", &c.sensing.n_beams);
    s.num("d_max_factor", &c.sensing.d_max_factor);
    s.num("lookahead_factor", &c.sensing.lookahead_factor);
    s.num("depth_max_factor", &c.sensing.depth_max_factor);
    s.integer("memory_horizon", &c.sensing.memory_horizon);
    s.num("ring_offset", &c.sensing.ring_offset);

    auto& d = b["dynamics"];
    d.num("v_max", &c.dynamics.v_max);
    d.num("max_turn_rate", &c.dynamics.max_turn_rate);
    d.num("accel_max", &c.dynamics.accel_max);
    d.num("dt", &c.dynamics.dt);
    d.num("delta_t", &c.dynamics.delta_t);
    d.num("k_action", &c.dynamics.k_action);
    d.num("fw_over_c", &c.dynamics.fw_over_c);
    d.num("fh_over_c", &c.dynamics.fh_over_c);
    d.num("lambda_gravity", &c.dynamics.lambda_gravity);
    d.num("mass", &c.dynamics.mass);
    d.num("inertia_xx", &c.dynamics.inertia_xx);
    d.num("inertia_yy", &c.dynamics.inertia_yy);
    d.num("inertia_zz", &c.dynamics.inertia_zz);
    d.num("k_vel", &c.dynamics.k_vel);
    d.num("k_att", &c.dynamics.k_att);
    d.num("k_damp", &c.dynamics.k_damp);

    auto& e = b["env"];
    e.integer("t_warmup", &c.env.t_warmup);
    e.integer("t_max", &c.env.t_max);
    e.num("eps_goal_factor", &c.env.eps_goal_factor);
    e.num("ell_safe_factor", &c.env.ell_safe_factor);
    e.integer("window", &c.env.window);
    e.num("threshold_level0", &c.env.threshold_level0);
    e.num("threshold_level1", &c.env.threshold_level1);
    e.num("threshold_level2", &c.env.threshold_level2);

    auto& p = b["pure_pursuit"];
    p.num("lookahead_factor", &c.pure_pursuit.lookahead_factor);
    p.str("speed_policy", &c.pure_pursuit.speed_policy);
    p.num("v_cmd", &c.pure_pursuit.v_cmd);
    p.num("kappa_ref", &c.pure_pursuit.kappa_ref);

    auto& o = b["ppo"];
    o.num("lr", &c.ppo.lr);
    o.num("gamma", &c.ppo.gamma);
    o.num("lambda_gae", &c.ppo.lambda_gae);
    o.num("clip", &c.ppo.clip);
    o.num("entropy_coef", &c.ppo.entropy_coef);
    o.num("vf_coef", &c.ppo.vf_coef);
    o.integer("epochs_per_iter", &c.ppo.epochs_per_iter);
    o.integer("n_workers", &c.ppo.n_workers);
    o.integer("train_batch", &c.ppo.train_batch);
    o.integer("minibatch", &c.ppo.minibatch);
    o.integer("rollout_len", &c.ppo.rollout_len);
    o.integer("max_iterations", &c.ppo.max_iterations);
    o.num("max_wall_seconds", &c.ppo.max_wall_seconds);
    o.integer("checkpoint_every", &c.ppo.checkpoint_every);
    o.u64("seed", &c.ppo.seed);

    auto& br = b["bridge"];
    br.str("transport", &c.bridge.transport);
    br.str("shm_name", &c.bridge.shm_name);
    br.num("dt", &c.bridge.dt);
    br.num("delta_t", &c.bridge.delta_t);
    return b;
}

} // namespace

WorkbenchConfig apply_config_text(const std::string& text, WorkbenchConfig base) {
    auto binders = make_binders(base);
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::runtime_error("config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (binders.find(section) == binders.end())
                throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty()) throw std::runtime_error("config line " + std::to_string(line_no) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto& binder = binders.at(section);
        auto it = binder.setters.find(key);
        if (it == binder.setters.end())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "' in [" + section + "]");
        it->second(value);
    }
    return base;
}

WorkbenchConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return apply_config_text(ss.str(), WorkbenchConfig{});
}

std::string dump_config(const WorkbenchConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "[geometry]\n"
       << "radius = " << c.geometry.radius << "\n"
       << "tube_length = " << c.geometry.tube_length << "\n"
       << "n_samples = " << c.geometry.n_samples << "\n"
       << "raw_points = " << c.geometry.raw_points << "\n"
       << "circle_segments = " << c.geometry.circle_segments << "\n\n";
    os << "[sensing]\n"
       << "n_beams = " << c.sensing.n_beams << "\n"
       << "d_max_factor = " << c.sensing.d_max_factor << "\n"
       << "lookahead_factor = " << c.sensing.lookahead_factor << "\n"
       << "depth_max_factor = " << c.sensing.depth_max_factor << "\n"
       << "memory_horizon = " << c.sensing.memory_horizon << "\n"
       << "ring_offset = " << c.sensing.ring_offset << "\n\n";
    os << "[dynamics]\n"
       << "v_max = " << c.dynamics.v_max << "\n"
       << "max_turn_rate = " << c.dynamics.max_turn_rate << "\n"
       << "accel_max = " << c.dynamics.accel_max << "\n"
       << "dt = " << c.dynamics.dt << "\n"
       << "delta_t = " << c.dynamics.delta_t << "\n"
       << "k_action = " << c.dynamics.k_action << "\n"
       << "fw_over_c = " << c.dynamics.fw_over_c << "\n"
       << "fh_over_c = " << c.dynamics.fh_over_c << "\n"
       << "lambda_gravity = " << c.dynamics.lambda_gravity << "\n"
       << "mass = " << c.dynamics.mass << "\n"
       << "inertia_xx = " << c.dynamics.inertia_xx << "\n"
       << "inertia_yy = " << c.dynamics.inertia_yy << "\n"
       << "inertia_zz = " << c.dynamics.inertia_zz << "\n"
       << "k_vel = " << c.dynamics.k_vel << "\n"
       << "k_att = " << c.dynamics.k_att << "\n"
       << "k_damp = " << c.dynamics.k_damp << "\n\n";
    os << "[env]\n"
       << "t_warmup = " << c.env.t_warmup << "\n"
       << "t_max = " << c.env.t_max << "\n"
       << "eps_goal_factor = " << c.env.eps_goal_factor << "\n"
       << "ell_safe_factor = " << c.env.ell_safe_factor << "\n"
       << "window = " << c.env.window << "\n"
       << "threshold_level0 = " << c.env.threshold_level0 << "\n"
       << "threshold_level1 = " << c.env.threshold_level1 << "\n"
       << "threshold_level2 = " << c.env.threshold_level2 << "\n\n";
    os << "[pure_pursuit]\n"
       << "lookahead_factor = " << c.pure_pursuit.lookahead_factor << "\n"
       << "speed_policy = " << c.pure_pursuit.speed_policy << "\n"
       << "v_cmd = " << c.pure_pursuit.v_cmd << "\n"
       << "kappa_ref = " << c.pure_pursuit.kappa_ref << "\n\n";
    os << "[ppo]\n"
       << "lr = " << c.ppo.lr << "\n"
       << "gamma = " << c.ppo.gamma << "\n"
       << "lambda_gae = " << c.ppo.lambda_gae << "\n"
       << "clip = " << c.ppo.clip << "\n"
       << "entropy_coef = " << c.ppo.entropy_coef << "\n"
       << "vf_coef = " << c.ppo.vf_coef << "\n"
       << "epochs_per_iter = " << c.ppo.epochs_per_iter << "\n"
       << "n_workers = " << c.ppo.n_workers << "\n"
       << "train_batch = " << c.ppo.train_batch << "\n"
       << "minibatch = " << c.ppo.minibatch << "\n"
       << "rollout_len = " << c.ppo.rollout_len << "\n"
       << "max_iterations = " << c.ppo.max_iterations << "\n"
       << "max_wall_seconds = " << c.ppo.max_wall_seconds << "\n"
       << "checkpoint_every = " << c.ppo.checkpoint_every << "\n"
       << "seed = " << c.ppo.seed << "\n\n";
    os << "[bridge]\n"
       << "transport = " << c.bridge.transport << "\n"
       << "shm_name = " << c.bridge.shm_name << "\n"
       << "dt = " << c.bridge.dt << "\n"
       << "delta_t = " << c.bridge.delta_t << "\n";
    return os.str();
}

} // namespace tubenav
