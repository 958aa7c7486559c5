#include "config_io.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "hoif/errors.hpp"

namespace hoif::cli {

namespace {

using nlohmann::json;

void require_known_fields(const json& j, const std::set<std::string>& allowed,
                          const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError(context + ": unknown field '" + key + "'");
    }
}

const json& require_field(const json& j, const std::string& name, const std::string& context) {
    if (!j.contains(name)) throw ConfigError(context + ": missing field '" + name + "'");
    return j.at(name);
}

double as_number(const json& j, const std::string& context) {
    if (!j.is_number()) throw ConfigError(context + ": expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& context) {
    if (!j.is_number_integer()) throw ConfigError(context + ": expected an integer");
    return j.get<int>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& context) {
    if (!j.is_array()) throw ConfigError(context + ": expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = as_number(j[i], context);
    return v;
}

std::vector<Eigen::VectorXd> as_points(const json& j, const std::string& context) {
    if (!j.is_array()) throw ConfigError(context + ": expected an array of points");
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& p = j[i];
        if (p.is_number()) {
            Eigen::VectorXd z(1);
            z[0] = p.get<double>();
            out.push_back(z);
        } else {
            out.push_back(as_vector(p, context));
        }
    }
    return out;
}

ModelKind parse_kind(const json& j, const std::string& context) {
    const std::string kind = require_field(j, "kind", context).get<std::string>();
    if (kind == "missing_data") return ModelKind::missing_data();
    if (kind == "covariance") return ModelKind::covariance();
    if (kind == "ate") {
        const double pi = as_number(require_field(j, "propensity", context),
                                    context + ".propensity");
        if (!(pi > 0.0 && pi < 1.0))
            throw ConfigError(context + ".propensity: must lie strictly inside (0,1)");
        return ModelKind::ate([pi](const Eigen::VectorXd&) { return pi; });
    }
    throw ConfigError(context + ".kind: expected missing_data, covariance or ate, got '" + kind +
                      "'");
}

} // namespace

TruthSpec parse_model(const json& j, const std::string& context) {
    require_known_fields(
        j, {"kind", "propensity", "support", "f", "a", "b", "continuous"}, context);
    const ModelKind kind = parse_kind(j, context);
    if (kind.tag != ModelTag::Ate && j.contains("propensity"))
        throw ConfigError(context + ": field 'propensity' is only valid for the ate kind");

    if (j.contains("continuous")) {
        for (const char* banned : {"support", "f", "a", "b"})
            if (j.contains(banned))
                throw ConfigError(context + ": field '" + banned +
                                  "' conflicts with 'continuous'");
        const json& c = j.at("continuous");
        const std::string cx = context + ".continuous";
        require_known_fields(c,
                             {"d", "alpha", "beta", "gamma", "levels", "seed", "a_base", "a_amp",
                              "b_base", "b_amp"},
                             cx);
        SmoothnessSpec spec;
        spec.d = c.contains("d") ? as_int(c.at("d"), cx + ".d") : 1;
        spec.alpha = c.contains("alpha") ? as_number(c.at("alpha"), cx + ".alpha") : 1.0;
        spec.beta = c.contains("beta") ? as_number(c.at("beta"), cx + ".beta") : 1.0;
        spec.gamma = c.contains("gamma") ? as_number(c.at("gamma"), cx + ".gamma") : 1.0;
        const int levels = c.contains("levels") ? as_int(c.at("levels"), cx + ".levels") : 12;
        const auto seed = static_cast<std::uint64_t>(
            c.contains("seed") ? as_int(c.at("seed"), cx + ".seed") : 1);
        const double a_base =
            c.contains("a_base") ? as_number(c.at("a_base"), cx + ".a_base") : 2.0;
        const double a_amp = c.contains("a_amp") ? as_number(c.at("a_amp"), cx + ".a_amp") : 0.6;
        const double b_base =
            c.contains("b_base") ? as_number(c.at("b_base"), cx + ".b_base") : 0.5;
        const double b_amp = c.contains("b_amp") ? as_number(c.at("b_amp"), cx + ".b_amp") : 0.35;
        try {
            return make_continuous_truth(kind, spec, a_base, a_amp, b_base, b_amp, levels, seed);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(cx + ": " + e.what());
        }
    }

    DiscreteModel m;
    m.kind = kind;
    m.support = as_points(require_field(j, "support", context), context + ".support");
    m.f = as_vector(require_field(j, "f", context), context + ".f");
    m.a = as_vector(require_field(j, "a", context), context + ".a");
    m.b = as_vector(require_field(j, "b", context), context + ".b");
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(context + ": " + e.what());
    }
    return m;
}

TruthSpec parse_model_file(const std::string& path) {
    return parse_model(load_json_file(path), "model");
}

FixedFit parse_fixed_fit(const json& j, const std::string& context) {
    require_known_fields(j, {"a_hat", "b_hat", "f_hat"}, context);
    FixedFit fit;
    fit.a_hat = as_vector(require_field(j, "a_hat", context), context + ".a_hat");
    fit.b_hat = as_vector(require_field(j, "b_hat", context), context + ".b_hat");
    if (j.contains("f_hat")) fit.f_hat = as_vector(j.at("f_hat"), context + ".f_hat");
    return fit;
}

FixedFit parse_fixed_fit_file(const std::string& path) {
    return parse_fixed_fit(load_json_file(path), "fit");
}

ExperimentConfig parse_experiment_config_file(const std::string& path) {
    const json j = load_json_file(path);
    const std::string cx = "config";
    require_known_fields(j,
                         {"model", "n_grid", "k", "folds", "replications", "seed", "estimators",
                          "fit", "output", "threads"},
                         cx);

    ExperimentConfig cfg;
    const TruthSpec truth = parse_model(require_field(j, "model", cx), cx + ".model");
    int d = 1;
    double gamma = 1.0;
    if (std::holds_alternative<DiscreteModel>(truth)) {
        cfg.truth = std::get<DiscreteModel>(truth);
        d = std::get<DiscreteModel>(cfg.truth).dim();
    } else {
        cfg.truth = std::get<ContinuousTruth>(truth);
        d = std::get<ContinuousTruth>(cfg.truth).d;
    }

    const json& ngrid = require_field(j, "n_grid", cx);
    if (!ngrid.is_array() || ngrid.empty())
        throw ConfigError(cx + ".n_grid: expected a non-empty array");
    for (std::size_t i = 0; i < ngrid.size(); ++i)
        cfg.n_grid.push_back(as_int(ngrid[i], cx + ".n_grid"));

    if (j.contains("k")) {
        const json& k = j.at("k");
        const std::string kx = cx + ".k";
        require_known_fields(k, {"fixed", "c", "p"}, kx);
        if (k.contains("fixed")) {
            if (k.contains("c") || k.contains("p"))
                throw ConfigError(kx + ": 'fixed' conflicts with the power rule");
            const json& fixed = k.at("fixed");
            if (!fixed.is_array()) throw ConfigError(kx + ".fixed: expected an array");
            for (std::size_t i = 0; i < fixed.size(); ++i)
                cfg.k_schedule.fixed.push_back(as_int(fixed[i], kx + ".fixed"));
            if (cfg.k_schedule.fixed.size() != cfg.n_grid.size())
                throw ConfigError(kx + ".fixed: length must match n_grid");
        } else {
            PowerRule rule;
            rule.c = k.contains("c") ? as_number(k.at("c"), kx + ".c") : 1.0;
            rule.p = k.contains("p") ? as_number(k.at("p"), kx + ".p") : 1.0 / 3.0;
            cfg.k_schedule.power = rule;
        }
    } else {
        // default truncation schedule: k = ceil(n^{2d/(2*gamma+d)}) capped at n/4
        PowerRule rule;
        rule.c = 1.0;
        rule.p = 2.0 * d / (2.0 * gamma + d);
        cfg.k_schedule.power = rule;
        cfg.k_schedule.cap_quarter_n = true;
    }

    cfg.folds = j.contains("folds") ? as_int(j.at("folds"), cx + ".folds") : 2;
    cfg.replications =
        j.contains("replications") ? as_int(j.at("replications"), cx + ".replications") : 1;
    cfg.seed = static_cast<std::uint64_t>(
        j.contains("seed") ? as_int(j.at("seed"), cx + ".seed") : 0);

    const json& est = require_field(j, "estimators", cx);
    if (!est.is_array() || est.empty())
        throw ConfigError(cx + ".estimators: expected a non-empty array");
    for (std::size_t i = 0; i < est.size(); ++i) {
        const std::string name = est[i].get<std::string>();
        const auto id = parse_estimator(name);
        if (!id)
            throw ConfigError(cx + ".estimators: expected plugin, first or second, got '" + name +
                              "'");
        cfg.estimators.push_back(*id);
    }

    if (j.contains("fit")) {
        const json& fit = j.at("fit");
        const std::string fx = cx + ".fit";
        require_known_fields(
            fit,
            {"mode", "a_hat", "b_hat", "f_hat", "eps_clip", "nuisance_cells",
             "projection_weight"},
            fx);
        const std::string mode =
            fit.contains("mode") ? fit.at("mode").get<std::string>() : "split";
        if (mode == "split")
            cfg.fit_mode = FitMode::Split;
        else if (mode == "oracle")
            cfg.fit_mode = FitMode::Oracle;
        else if (mode == "fixed")
            cfg.fit_mode = FitMode::Fixed;
        else
            throw ConfigError(fx + ".mode: expected split, oracle or fixed, got '" + mode + "'");

        if (cfg.fit_mode == FitMode::Fixed) {
            cfg.fixed_fit.a_hat = as_vector(require_field(fit, "a_hat", fx), fx + ".a_hat");
            cfg.fixed_fit.b_hat = as_vector(require_field(fit, "b_hat", fx), fx + ".b_hat");
            if (fit.contains("f_hat"))
                cfg.fixed_fit.f_hat = as_vector(fit.at("f_hat"), fx + ".f_hat");
        } else {
            for (const char* banned : {"a_hat", "b_hat", "f_hat"})
                if (fit.contains(banned))
                    throw ConfigError(fx + ": field '" + std::string(banned) +
                                      "' is only valid in fixed mode");
        }
        if (fit.contains("eps_clip"))
            cfg.eps_clip = as_number(fit.at("eps_clip"), fx + ".eps_clip");
        if (fit.contains("nuisance_cells")) {
            const json& nc = fit.at("nuisance_cells");
            require_known_fields(nc, {"c", "p"}, fx + ".nuisance_cells");
            cfg.nuisance_rule.c =
                nc.contains("c") ? as_number(nc.at("c"), fx + ".nuisance_cells.c") : 1.0;
            cfg.nuisance_rule.p =
                nc.contains("p") ? as_number(nc.at("p"), fx + ".nuisance_cells.p") : 1.0 / 3.0;
        }
        if (fit.contains("projection_weight")) {
            const std::string pw = fit.at("projection_weight").get<std::string>();
            if (pw == "w_hat")
                cfg.projection_weight_from_density = false;
            else if (pw == "density")
                cfg.projection_weight_from_density = true;
            else
                throw ConfigError(fx + ".projection_weight: expected w_hat or density, got '" +
                                  pw + "'");
        }
    }

    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    if (j.contains("threads")) cfg.threads = as_int(j.at("threads"), cx + ".threads");

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(cx + ": " + e.what());
    }
    return cfg;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open file: " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
}

std::string resolve_output_path(const std::string& path, const std::string& out_dir_flag) {
    if (path.empty() || path.front() == '/') return path;
    std::string dir = out_dir_flag;
    if (dir.empty()) {
        const char* env = std::getenv("HOIF_OUT_DIR");
        if (env) dir = env;
    }
    if (dir.empty()) return path;
    if (dir.back() != '/') dir.push_back('/');
    return dir + path;
}

} // namespace hoif::cli
