#include "divctl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace divctl {

using nlohmann::json;

namespace {

std::string describe(const std::vector<ConfigIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
        if (!out.empty()) out += "; ";
        out += i.path + ": " + i.message;
    }
    return out;
}

// Schema walker. Records every problem instead of stopping at the first.
class Reader {
public:
    std::vector<ConfigIssue> issues;

    void fail(const std::string& path, const std::string& message) { issues.push_back({path, message}); }

    const json* member(const json& obj, const std::string& key, const std::string& path, bool required) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) {
            if (required) fail(path + "." + key, "missing required field");
            return nullptr;
        }
        return &*it;
    }

    const json* object(const json& obj, const std::string& key, const std::string& path, bool required) {
        const json* j = member(obj, key, path, required);
        if (j && !j->is_object()) {
            fail(path + "." + key, "expected an object");
            return nullptr;
        }
        return j;
    }

    std::optional<double> number(const json& obj, const std::string& key, const std::string& path, bool required) {
        const json* j = member(obj, key, path, required);
        if (!j) return std::nullopt;
        if (!j->is_number()) {
            fail(path + "." + key, "expected a number");
            return std::nullopt;
        }
        return j->get<double>();
    }

    double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
        return number(obj, key, path, false).value_or(fallback);
    }

    std::optional<std::uint64_t> count(const json& obj, const std::string& key, const std::string& path,
                                       bool required) {
        const json* j = member(obj, key, path, required);
        if (!j) return std::nullopt;
        if (!j->is_number_integer() || (j->is_number_integer() && j->get<long long>() < 0 && !j->is_number_unsigned())) {
            fail(path + "." + key, "expected a nonnegative integer");
            return std::nullopt;
        }
        return j->get<std::uint64_t>();
    }

    std::optional<std::string> text(const json& obj, const std::string& key, const std::string& path, bool required) {
        const json* j = member(obj, key, path, required);
        if (!j) return std::nullopt;
        if (!j->is_string()) {
            fail(path + "." + key, "expected a string");
            return std::nullopt;
        }
        return j->get<std::string>();
    }

    std::optional<std::vector<double>> numbers(const json& j, const std::string& path) {
        if (!j.is_array()) {
            fail(path, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) {
                fail(path + "[" + std::to_string(i) + "]", "expected a number");
                return std::nullopt;
            }
            out.push_back(j[i].get<double>());
        }
        return out;
    }

    std::optional<std::vector<double>> numbers(const json& obj, const std::string& key, const std::string& path,
                                               bool required) {
        const json* j = member(obj, key, path, required);
        if (!j) return std::nullopt;
        return numbers(*j, path + "." + key);
    }
};

std::optional<ClaimDistribution> read_claim(Reader& rd, const json& claim, const std::string& path) {
    const auto dist = rd.text(claim, "dist", path, true);
    if (!dist) return std::nullopt;
    if (*dist == "exponential") {
        const auto rate = rd.number(claim, "rate", path, true);
        if (!rate) return std::nullopt;
        return ExponentialClaim{*rate};
    }
    if (*dist == "uniform") {
        const auto lo = rd.number(claim, "lo", path, true);
        const auto hi = rd.number(claim, "hi", path, true);
        if (!lo || !hi) return std::nullopt;
        return UniformClaim{*lo, *hi};
    }
    if (*dist == "table") {
        const auto x = rd.numbers(claim, "x", path, true);
        const auto s = rd.numbers(claim, "survival", path, true);
        if (!x || !s) return std::nullopt;
        return TabulatedClaim{*x, *s};
    }
    rd.fail(path + ".dist", "unknown claim distribution '" + *dist + "' (exponential, uniform, table)");
    return std::nullopt;
}

std::optional<RunningReward> read_running(Reader& rd, const json& f, const std::string& path) {
    const auto type = rd.text(f, "type", path, true);
    if (!type) return std::nullopt;
    if (*type == "zero") return ZeroReward{};
    if (*type != "tabulated") {
        rd.fail(path + ".type", "unknown running reward '" + *type + "' (zero, tabulated)");
        return std::nullopt;
    }
    TabulatedReward t;
    const auto x = rd.numbers(f, "x", path, true);
    const auto u = rd.numbers(f, "u", path, true);
    const json* values = rd.member(f, "values", path, true);
    if (!x || !u || !values) return std::nullopt;
    t.x = *x;
    t.u = *u;
    if (!values->is_array()) {
        rd.fail(path + ".values", "expected an array [regime][x][u]");
        return std::nullopt;
    }
    for (std::size_t l = 0; l < values->size(); ++l) {
        const json& per = (*values)[l];
        const std::string lp = path + ".values[" + std::to_string(l) + "]";
        if (!per.is_array()) {
            rd.fail(lp, "expected an array [x][u]");
            return std::nullopt;
        }
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < per.size(); ++i) {
            auto row = rd.numbers(per[i], lp + "[" + std::to_string(i) + "]");
            if (!row) return std::nullopt;
            rows.push_back(std::move(*row));
        }
        t.values.push_back(std::move(rows));
    }
    return t;
}

std::string json_path_for(const std::string& field) {
    static const std::pair<std::string_view, std::string_view> prefixes[] = {
        {"regimes.beta", "$.model.beta"}, {"regimes.q", "$.model.Q"},     {"payoff.r", "$.model.r"},
        {"payoff.dividend", "$.payoff.c"}, {"payoff.running", "$.payoff.f"}, {"claim", "$.model.claim"},
        {"control", "$.control"},          {"model", "$.model"},
    };
    for (const auto& [from, to] : prefixes)
        if (field.rfind(from, 0) == 0) return std::string(to) + field.substr(from.size());
    return "$." + field;
}

std::size_t line_of(std::string_view text, std::size_t byte, std::size_t& column) {
    std::size_t line = 1;
    column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return line;
}

}  // namespace

ConfigError::ConfigError(Kind kind, std::vector<ConfigIssue> issues)
    : std::runtime_error(describe(issues)), kind_(kind), issues_(std::move(issues)) {}

SimConfig RunConfig::sim_config(const Probe& probe) const {
    const VerifySettings v = verify.value_or(VerifySettings{});
    SimConfig cfg;
    cfg.dt_sim = v.dt_sim;
    cfg.t_max = v.t_max;
    cfg.n_paths = v.n_paths;
    cfg.seed = v.seed;
    cfg.threads = v.threads;
    cfg.x0 = probe.x;
    cfg.regime0 = probe.regime;
    return cfg;
}

RunConfig parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t column = 0;
        const std::size_t line = line_of(text, e.byte > 0 ? e.byte - 1 : 0, column);
        throw ConfigError(ConfigError::Kind::Syntax,
                          {{"$", "syntax error at line " + std::to_string(line) + ", column " +
                                     std::to_string(column) + ": " + e.what()}});
    }

    Reader rd;
    RunConfig cfg;
    if (!root.is_object()) {
        throw ConfigError(ConfigError::Kind::Schema, {{"$", "top level must be an object"}});
    }

    // model
    if (const json* model = rd.object(root, "model", "$", true)) {
        if (auto type = rd.text(*model, "type", "$.model", true)) {
            if (*type == "proportional") cfg.model.reinsurance = Reinsurance::Proportional;
            else if (*type == "excess_of_loss") cfg.model.reinsurance = Reinsurance::ExcessOfLoss;
            else rd.fail("$.model.type", "unknown reinsurance type '" + *type + "' (proportional, excess_of_loss)");
        }
        if (const json* claim = rd.object(*model, "claim", "$.model", true))
            if (auto dist = read_claim(rd, *claim, "$.model.claim")) cfg.model.claim = *dist;
        if (auto beta = rd.numbers(*model, "beta", "$.model", true)) cfg.model.regimes.beta = *beta;
        if (const json* q = rd.member(*model, "Q", "$.model", true)) {
            if (!q->is_array()) {
                rd.fail("$.model.Q", "expected an array of rows");
            } else {
                for (std::size_t l = 0; l < q->size(); ++l)
                    if (auto row = rd.numbers((*q)[l], "$.model.Q[" + std::to_string(l) + "]"))
                        cfg.model.regimes.q.push_back(*row);
            }
        }
        if (auto r = rd.number(*model, "r", "$.model", true)) cfg.model.payoff.r = *r;
    }

    // payoff
    if (const json* payoff = rd.object(root, "payoff", "$", true)) {
        if (const json* c = rd.object(*payoff, "c", "$.payoff", true)) {
            if (auto type = rd.text(*c, "type", "$.payoff.c", true)) {
                if (*type == "constant") {
                    if (auto v = rd.number(*c, "value", "$.payoff.c", true)) cfg.model.payoff.dividend = ConstantWeight{*v};
                } else if (*type == "exp_marginal") {
                    if (auto v = rd.number(*c, "lambda", "$.payoff.c", true))
                        cfg.model.payoff.dividend = ExpMarginalWeight{*v};
                } else {
                    rd.fail("$.payoff.c.type", "unknown dividend weight '" + *type + "' (constant, exp_marginal)");
                }
            }
        }
        if (const json* f = rd.object(*payoff, "f", "$.payoff", false))
            if (auto run = read_running(rd, *f, "$.payoff.f")) cfg.model.payoff.running = *run;
    }

    // control
    if (const json* control = rd.object(root, "control", "$", true)) {
        if (auto v = rd.number(*control, "u_min", "$.control", true)) cfg.model.control.u_min = *v;
        if (auto v = rd.number(*control, "u_max", "$.control", true)) cfg.model.control.u_max = *v;
        if (auto v = rd.count(*control, "n_u", "$.control", true)) cfg.model.control.n_u = static_cast<std::size_t>(*v);
    }

    // grid
    if (const json* grid = rd.object(root, "grid", "$", true)) {
        if (auto v = rd.number(*grid, "h", "$.grid", true)) cfg.h = *v;
        if (auto v = rd.number(*grid, "B", "$.grid", true)) cfg.cap = *v;
    }

    // solver
    if (const json* solver = rd.object(root, "solver", "$", false)) {
        if (auto method = rd.text(*solver, "method", "$.solver", false)) {
            if (*method == "value_iteration") cfg.method = Method::ValueIteration;
            else if (*method == "policy_iteration") cfg.method = Method::PolicyIteration;
            else rd.fail("$.solver.method", "unknown method '" + *method + "' (value_iteration, policy_iteration)");
        }
        cfg.solver.tol = rd.number_or(*solver, "tol", "$.solver", cfg.solver.tol);
        if (auto v = rd.count(*solver, "max_iter", "$.solver", false)) cfg.solver.max_iter = static_cast<std::size_t>(*v);
        if (auto d = rd.text(*solver, "discounting", "$.solver", false)) {
            if (*d == "linear") cfg.solver.discounting = Discounting::Linear;
            else if (*d == "exponential") cfg.solver.discounting = Discounting::Exponential;
            else rd.fail("$.solver.discounting", "unknown discounting '" + *d + "' (linear, exponential)");
        }
        if (auto u = rd.number(*solver, "fixed_control", "$.solver", false)) cfg.solver.fixed_control = *u;
    }

    // verify
    if (const json* verify = rd.object(root, "verify", "$", false)) {
        VerifySettings v;
        v.dt_sim = rd.number_or(*verify, "dt_sim", "$.verify", v.dt_sim);
        v.t_max = rd.number_or(*verify, "t_max", "$.verify", v.t_max);
        if (auto n = rd.count(*verify, "n_paths", "$.verify", false)) v.n_paths = static_cast<std::size_t>(*n);
        if (auto s = rd.count(*verify, "seed", "$.verify", false)) v.seed = *s;
        if (auto t = rd.count(*verify, "threads", "$.verify", false)) v.threads = static_cast<unsigned>(*t);
        cfg.verify = v;
    }

    // probes
    if (const json* probes = rd.member(root, "probes", "$", false)) {
        if (!probes->is_array()) {
            rd.fail("$.probes", "expected an array of [x, regime] pairs");
        } else {
            for (std::size_t i = 0; i < probes->size(); ++i) {
                const json& p = (*probes)[i];
                const std::string path = "$.probes[" + std::to_string(i) + "]";
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number_integer()) {
                    rd.fail(path, "expected [x, regime] with an integer regime");
                    continue;
                }
                const long long regime = p[1].get<long long>();
                if (regime < 1) {
                    rd.fail(path, "regime indices start at 1");
                    continue;
                }
                cfg.probes.push_back({p[0].get<double>(), static_cast<std::size_t>(regime - 1)});
            }
        }
    }

    if (!rd.issues.empty()) throw ConfigError(ConfigError::Kind::Schema, std::move(rd.issues));

    // Semantics.
    std::vector<ConfigIssue> sem;
    for (const Violation& v : validate(cfg.model)) sem.push_back({json_path_for(v.field), v.message});

    std::optional<Grid> grid;
    try {
        grid = cfg.grid();
    } catch (const Error& e) {
        sem.push_back({"$.grid", e.what()});
    }
    if (!(cfg.solver.tol > 0.0)) sem.push_back({"$.solver.tol", "tolerance must be positive"});
    if (cfg.solver.max_iter < 1) sem.push_back({"$.solver.max_iter", "max_iter must be at least 1"});
    if (cfg.solver.fixed_control &&
        (*cfg.solver.fixed_control < cfg.model.control.u_min || *cfg.solver.fixed_control > cfg.model.control.u_max))
        sem.push_back({"$.solver.fixed_control", "fixed control must lie in [u_min, u_max]"});

    for (std::size_t i = 0; i < cfg.probes.size(); ++i) {
        Probe& p = cfg.probes[i];
        const std::string path = "$.probes[" + std::to_string(i) + "]";
        if (p.regime >= cfg.model.regimes.count()) sem.push_back({path, "regime out of range"});
        if (!grid) continue;
        if (p.x < 0.0 || p.x > grid->x(grid->reflecting_index())) {
            sem.push_back({path, "probe x outside [0, B+h]"});
            continue;
        }
        const double snapped = grid->x(grid->nearest(p.x));
        if (std::abs(snapped - p.x) > 1e-9 * std::max(1.0, p.x)) {
            std::ostringstream os;
            os << path << ": probe x=" << p.x << " is not a grid point; snapped to " << snapped;
            cfg.warnings.push_back(os.str());
            p.x = snapped;
        }
    }

    if (cfg.verify && grid) {
        SimConfig sim = cfg.sim_config(Probe{});
        for (const std::string& m : validate(sim, *grid, cfg.model.payoff.r)) sem.push_back({"$.verify", m});
    }

    if (!sem.empty()) throw ConfigError(ConfigError::Kind::Semantic, std::move(sem));
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(ConfigError::Kind::Syntax, {{"$", "cannot read " + path.string()}});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

json to_json(const RunConfig& c) {
    json model;
    model["type"] = c.model.reinsurance == Reinsurance::Proportional ? "proportional" : "excess_of_loss";
    if (const auto* e = std::get_if<ExponentialClaim>(&c.model.claim)) {
        model["claim"] = {{"dist", "exponential"}, {"rate", e->rate}};
    } else if (const auto* u = std::get_if<UniformClaim>(&c.model.claim)) {
        model["claim"] = {{"dist", "uniform"}, {"lo", u->lo}, {"hi", u->hi}};
    } else {
        const auto& t = std::get<TabulatedClaim>(c.model.claim);
        model["claim"] = {{"dist", "table"}, {"x", t.x}, {"survival", t.survival}};
    }
    model["beta"] = c.model.regimes.beta;
    model["Q"] = c.model.regimes.q;
    model["r"] = c.model.payoff.r;

    json payoff;
    if (const auto* w = std::get_if<ConstantWeight>(&c.model.payoff.dividend))
        payoff["c"] = {{"type", "constant"}, {"value", w->value}};
    else
        payoff["c"] = {{"type", "exp_marginal"}, {"lambda", std::get<ExpMarginalWeight>(c.model.payoff.dividend).lambda}};
    if (const auto* t = std::get_if<TabulatedReward>(&c.model.payoff.running))
        payoff["f"] = {{"type", "tabulated"}, {"x", t->x}, {"u", t->u}, {"values", t->values}};
    else
        payoff["f"] = {{"type", "zero"}};

    json solver = {
        {"method", c.method == Method::ValueIteration ? "value_iteration" : "policy_iteration"},
        {"tol", c.solver.tol},
        {"max_iter", c.solver.max_iter},
        {"discounting", c.solver.discounting == Discounting::Linear ? "linear" : "exponential"},
        {"fixed_control", c.solver.fixed_control ? json(*c.solver.fixed_control) : json(nullptr)},
    };

    json out = {
        {"model", model},
        {"payoff", payoff},
        {"control", {{"u_min", c.model.control.u_min}, {"u_max", c.model.control.u_max}, {"n_u", c.model.control.n_u}}},
        {"grid", {{"h", c.h}, {"B", c.cap}}},
        {"solver", solver},
    };
    if (c.verify) {
        out["verify"] = {{"dt_sim", c.verify->dt_sim},
                         {"t_max", c.verify->t_max},
                         {"n_paths", c.verify->n_paths},
                         {"seed", c.verify->seed}};
    }
    json probes = json::array();
    for (const Probe& p : c.probes) probes.push_back({p.x, p.regime + 1});
    out["probes"] = probes;
    return out;
}

}  // namespace divctl
