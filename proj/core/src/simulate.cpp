#include "hoif/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "hoif/rng.hpp"

namespace hoif {

LacunarySeries LacunarySeries::make(int d, double alpha, double base, double amp, int levels,
                                    std::uint64_t seed) {
    if (d < 1 || levels < 0 || alpha <= 0.0)
        throw std::invalid_argument("lacunary series: need d >= 1, levels >= 0, alpha > 0");
    LacunarySeries g;
    g.base = base;
    g.amp = amp;
    g.alpha = alpha;
    g.d = d;
    g.levels = levels;
    Rng rng(seed);
    g.phases.reserve(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l) g.phases.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    g.norm = 0.0;
    for (int m = 1; m <= levels; ++m) g.norm += std::pow(2.0, -alpha * m);
    return g;
}

double LacunarySeries::weight(int l) const {
    if (norm == 0.0) return 0.0;
    return std::pow(2.0, -alpha * l) / norm;
}

double LacunarySeries::operator()(const Eigen::VectorXd& z) const {
    double acc = 0.0;
    for (int l = 1; l <= levels; ++l) {
        const int axis = (l - 1) % d;
        const double freq = std::pow(2.0, l);
        acc += weight(l) *
               std::cos(2.0 * std::numbers::pi * freq * z[axis] +
                        phases[static_cast<std::size_t>(l - 1)]);
    }
    return base + amp * acc;
}

ScalarFn LacunarySeries::fn() const {
    LacunarySeries self = *this;
    return [self](const Eigen::VectorXd& z) { return self(z); };
}

double product_integral(const LacunarySeries& g, const LacunarySeries& h) {
    // integral of cos(2 pi f x + s) cos(2 pi f' x + t) over [0,1] is
    // cos(s - t)/2 when the (axis, frequency) pairs match, 0 otherwise.
    double acc = g.base * h.base;
    const int levels = std::min(g.levels, h.levels);
    for (int l = 1; l <= levels; ++l) {
        if ((l - 1) % g.d != (l - 1) % h.d) continue;
        acc += g.amp * h.amp * g.weight(l) * h.weight(l) * 0.5 *
               std::cos(g.phases[static_cast<std::size_t>(l - 1)] -
                        h.phases[static_cast<std::size_t>(l - 1)]);
    }
    return acc;
}

void ContinuousTruth::validate() const {
    const int probe_level = std::max(1, 14 / d);
    const EvalDomain probe = EvalDomain::dyadic_grid(d, std::min(probe_level, 14));
    for (const auto& z : probe.points) {
        const double av = a(z);
        const double bv = b(z);
        switch (kind.tag) {
            case ModelTag::MissingData:
                if (av < 1.0) throw std::invalid_argument("continuous truth: a >= 1 required");
                if (bv < 0.0 || bv > 1.0)
                    throw std::invalid_argument("continuous truth: b in [0,1] required");
                break;
            case ModelTag::Covariance:
                if (av < 0.0 || av > 1.0 || bv < 0.0 || bv > 1.0)
                    throw std::invalid_argument("continuous truth: a, b in [0,1] required");
                break;
            case ModelTag::Ate: {
                if (std::abs(av) > 1.0 || std::abs(bv) > 1.0)
                    throw std::invalid_argument("continuous truth: effects must lie in [-1,1]");
                const double pi = kind.propensity(z);
                if (!(pi > 0.0 && pi < 1.0))
                    throw std::invalid_argument("continuous truth: propensity outside (0,1)");
                break;
            }
        }
    }
}

ContinuousTruth make_continuous_truth(const ModelKind& kind, const SmoothnessSpec& smoothness,
                                      double a_base, double a_amp, double b_base, double b_amp,
                                      int levels, std::uint64_t seed) {
    ContinuousTruth t;
    t.kind = kind;
    t.d = smoothness.d;
    t.a = LacunarySeries::make(smoothness.d, smoothness.alpha, a_base, a_amp, levels, seed);
    t.b = LacunarySeries::make(smoothness.d, smoothness.beta, b_base, b_amp, levels, seed + 1);
    t.chi = (kind.tag == ModelTag::MissingData) ? t.b.base : product_integral(t.a, t.b);
    t.validate();
    return t;
}

namespace {

Eigen::VectorXd draw_uniform_point(Rng& rng, int d) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z[i] = rng.uniform01();
    return z;
}

Observation draw_outcomes(const ModelKind& kind, double a_val, double b_val, Covariate z,
                          Rng& rng) {
    Observation obs;
    obs.z = std::move(z);
    switch (kind.tag) {
        case ModelTag::MissingData: {
            const double p = 1.0 / a_val;
            if (!(p > 0.0 && p <= 1.0))
                throw std::invalid_argument("generate_dataset: invalid observation probability 1/a");
            const bool a = rng.bernoulli(p);
            const bool y = rng.bernoulli(b_val);
            obs.a = a ? 1.0 : 0.0;
            obs.y1 = (a && y) ? 1.0 : 0.0; // y1 = Y*A
            break;
        }
        case ModelTag::Covariance: {
            if (a_val < 0.0 || a_val > 1.0 || b_val < 0.0 || b_val > 1.0)
                throw std::invalid_argument("generate_dataset: invalid conditional probability");
            obs.a = rng.bernoulli(a_val) ? 1.0 : 0.0;
            obs.y1 = rng.bernoulli(b_val) ? 1.0 : 0.0;
            break;
        }
        case ModelTag::Ate: {
            const double pi = kind.propensity(obs.z.point);
            if (!(pi > 0.0 && pi < 1.0))
                throw std::invalid_argument("generate_dataset: propensity outside (0,1)");
            const bool a = rng.bernoulli(pi);
            const double sign = a ? 1.0 : -1.0;
            obs.a = a ? 1.0 : 0.0;
            obs.y1 = rng.bernoulli((1.0 + a_val * sign) / 2.0) ? 1.0 : 0.0;
            obs.y2 = rng.bernoulli((1.0 + b_val * sign) / 2.0) ? 1.0 : 0.0;
            break;
        }
    }
    return obs;
}

} // namespace

std::vector<Observation> generate_dataset(const DiscreteModel& truth, int n, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("generate_dataset: n >= 0 required");
    truth.validate();
    Rng rng(seed);
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int j = rng.categorical(truth.f);
        out.push_back(draw_outcomes(truth.kind, truth.a[j], truth.b[j],
                                    Covariate::at_atom(truth.support[static_cast<std::size_t>(j)], j),
                                    rng));
    }
    return out;
}

std::vector<Observation> generate_dataset(const ContinuousTruth& truth, int n,
                                          std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("generate_dataset: n >= 0 required");
    Rng rng(seed);
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z = draw_uniform_point(rng, truth.d);
        const double a_val = truth.a(z);
        const double b_val = truth.b(z);
        out.push_back(draw_outcomes(truth.kind, a_val, b_val, Covariate::continuous(std::move(z)),
                                    rng));
    }
    return out;
}

const char* estimator_name(EstimatorId id) {
    switch (id) {
        case EstimatorId::Plugin: return "plugin";
        case EstimatorId::FirstOrder: return "first";
        case EstimatorId::SecondOrder: return "second";
    }
    return "?";
}

std::optional<EstimatorId> parse_estimator(const std::string& name) {
    if (name == "plugin") return EstimatorId::Plugin;
    if (name == "first") return EstimatorId::FirstOrder;
    if (name == "second") return EstimatorId::SecondOrder;
    return std::nullopt;
}

int PowerRule::at(int n) const {
    return std::max(1, static_cast<int>(std::ceil(c * std::pow(static_cast<double>(n), p))));
}

int KSchedule::at(std::size_t n_index, int n) const {
    int k = 1;
    if (!fixed.empty()) {
        if (n_index >= fixed.size())
            throw std::invalid_argument("k schedule: fixed list shorter than the n grid");
        k = fixed[n_index];
    } else if (power) {
        k = power->at(n);
    }
    if (cap_quarter_n) k = std::min(k, std::max(1, n / 4));
    return k;
}

void ExperimentConfig::validate() const {
    if (n_grid.empty()) throw std::invalid_argument("experiment: empty n grid");
    for (int n : n_grid)
        if (n <= 0) throw std::invalid_argument("experiment: n grid entries must be positive");
    if (replications < 1) throw std::invalid_argument("experiment: replications >= 1 required");
    if (folds < 1) throw std::invalid_argument("experiment: folds >= 1 required");
    if (estimators.empty()) throw std::invalid_argument("experiment: no estimators requested");
    if (fit_mode == FitMode::Fixed && !std::holds_alternative<DiscreteModel>(truth))
        throw std::invalid_argument("experiment: fixed fits require a discrete truth");
    if (std::holds_alternative<DiscreteModel>(truth))
        std::get<DiscreteModel>(truth).validate();
    else
        std::get<ContinuousTruth>(truth).validate();
}

namespace {

struct CellSpec {
    std::size_t n_index = 0;
    int n = 0;
    int k = 0;
};

struct TaskResult {
    bool ok = false;
    double plugin = 0.0;
    double first = 0.0;
    double second = 0.0;
};

int dyadic_level_for_cells(int cells_target, int d) {
    int level = 0;
    while (std::pow(2.0, static_cast<double>(level + 1) * d) <= static_cast<double>(cells_target))
        ++level;
    return level;
}

TaskResult run_replication(const ExperimentConfig& config, const CellSpec& cell,
                           std::uint64_t stream_id) {
    // Substream split: even ids feed the data generator, odd ids the fold plan.
    const std::uint64_t data_seed = config.seed ^ ((stream_id * 2 + 1) * 0x9E3779B97F4A7C15ULL);
    const std::uint64_t split_seed = config.seed ^ ((stream_id * 2 + 2) * 0x9E3779B97F4A7C15ULL);

    const bool discrete = std::holds_alternative<DiscreteModel>(config.truth);
    std::vector<Observation> data =
        discrete ? generate_dataset(std::get<DiscreteModel>(config.truth), cell.n, data_seed)
                 : generate_dataset(std::get<ContinuousTruth>(config.truth), cell.n, data_seed);

    bool want_plugin = false;
    bool want_first = false;
    bool want_second = false;
    for (EstimatorId id : config.estimators) {
        want_plugin |= id == EstimatorId::Plugin;
        want_first |= id == EstimatorId::FirstOrder;
        want_second |= id == EstimatorId::SecondOrder;
    }

    TaskResult out;
    switch (config.fit_mode) {
        case FitMode::Split: {
            CrossFitConfig cf;
            cf.folds = config.folds;
            cf.seed = split_seed;
            cf.fit_options.eps_clip = config.eps_clip;
            cf.fit_options.weight_from_density = config.projection_weight_from_density;
            if (discrete) {
                cf.partition = Partition::atoms(std::get<DiscreteModel>(config.truth).support);
            } else {
                const auto& t = std::get<ContinuousTruth>(config.truth);
                cf.partition =
                    Partition::dyadic(t.d, dyadic_level_for_cells(config.nuisance_rule.at(cell.n), t.d));
            }
            cf.k_truncation = cell.k;
            cf.want_second = want_second;
            const EstimateReport rep = cross_fit_estimate(
                discrete ? std::get<DiscreteModel>(config.truth).kind
                         : std::get<ContinuousTruth>(config.truth).kind,
                data, cf);
            out.plugin = rep.chi_plugin;
            out.first = rep.chi_first;
            out.second = rep.chi_second;
            break;
        }
        case FitMode::Oracle: {
            if (discrete) {
                const auto& model = std::get<DiscreteModel>(config.truth);
                const NuisanceFit fit = truth_fit_view(model);
                const FirstOrderEstimate first = estimate_first_order(data, fit, model.kind);
                out.plugin = first.chi_plugin;
                out.first = first.chi_first;
                if (want_second) {
                    const BasisSystem trunc = BasisSystem::tensor_haar_capped(model.dim(), cell.k);
                    if (trunc.size() > 0) {
                        ProjectionKernel pk(trunc,
                                            WeightMeasure::of(fit.w_hat),
                                            EvalDomain::atoms(model.support));
                        out.second = estimate_second_order(data, fit, model.kind, pk).chi_second;
                    } else {
                        out.second = out.first;
                    }
                }
            } else {
                const auto& t = std::get<ContinuousTruth>(config.truth);
                NuisanceFit fit;
                fit.a_hat = t.a.fn();
                fit.b_hat = t.b.fn();
                fit.f_hat = [](const Eigen::VectorXd&) { return 1.0; };
                const ScalarFn a_true = t.a.fn();
                fit.w_hat = (t.kind.tag == ModelTag::MissingData)
                                ? ScalarFn([a_true](const Eigen::VectorXd& z) { return -1.0 / a_true(z); })
                                : ScalarFn([](const Eigen::VectorXd&) { return -1.0; });
                const int quad_level = dyadic_level_for_cells(std::max(cell.k, 256), t.d);
                fit.chi_domain = EvalDomain::dyadic_grid(t.d, quad_level);
                const FirstOrderEstimate first = estimate_first_order(data, fit, t.kind);
                out.plugin = first.chi_plugin;
                out.first = first.chi_first;
                if (want_second) {
                    const BasisSystem trunc = BasisSystem::tensor_haar_capped(t.d, cell.k);
                    if (trunc.size() > 0) {
                        ProjectionKernel pk(trunc, WeightMeasure::of(fit.w_hat),
                                            EvalDomain::dyadic_grid(t.d, quad_level));
                        out.second = estimate_second_order(data, fit, t.kind, pk).chi_second;
                    } else {
                        out.second = out.first;
                    }
                }
            }
            break;
        }
        case FitMode::Fixed: {
            const auto& model = std::get<DiscreteModel>(config.truth);
            const NuisanceFit fit = fixed_fit_view(model, config.fixed_fit);
            const FirstOrderEstimate first = estimate_first_order(data, fit, model.kind);
            out.plugin = first.chi_plugin;
            out.first = first.chi_first;
            if (want_second) {
                const BasisSystem trunc = BasisSystem::tensor_haar_capped(model.dim(), cell.k);
                if (trunc.size() > 0) {
                    ProjectionKernel pk(trunc, WeightMeasure::of(fit.w_hat),
                                        EvalDomain::atoms(model.support));
                    out.second = estimate_second_order(data, fit, model.kind, pk).chi_second;
                } else {
                    out.second = out.first;
                }
            }
            break;
        }
    }
    out.ok = true;
    return out;
}

} // namespace

ResultTable run_experiment(const ExperimentConfig& config) {
    config.validate();

    const double chi_true = std::holds_alternative<DiscreteModel>(config.truth)
                                ? functional_chi(std::get<DiscreteModel>(config.truth))
                                : std::get<ContinuousTruth>(config.truth).chi;

    std::vector<CellSpec> cells;
    for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
        CellSpec c;
        c.n_index = i;
        c.n = config.n_grid[i];
        c.k = config.k_schedule.at(i, c.n);
        cells.push_back(c);
    }

    const std::size_t r = static_cast<std::size_t>(config.replications);
    const std::size_t total_tasks = cells.size() * r;
    std::vector<TaskResult> results(total_tasks);

    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned n_threads =
        (config.threads > 0) ? static_cast<unsigned>(config.threads)
                             : std::min<unsigned>(hw, static_cast<unsigned>(total_tasks));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t t = next.fetch_add(1);
            if (t >= total_tasks) break;
            const std::size_t cell_idx = t / r;
            try {
                results[t] = run_replication(config, cells[cell_idx], t);
            } catch (const std::exception&) {
                results[t].ok = false;
            }
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ResultTable table;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const CellSpec& cell = cells[ci];
        std::size_t failures = 0;
        for (std::size_t rep = 0; rep < r; ++rep)
            if (!results[ci * r + rep].ok) ++failures;
        if (failures * 10 > r)
            throw std::runtime_error("run_experiment: more than 10% of replications failed at n=" +
                                     std::to_string(cell.n));

        for (EstimatorId id : config.estimators) {
            detail::CompensatedSum sum;
            detail::CompensatedSum sumsq_err;
            std::size_t count = 0;
            for (std::size_t rep = 0; rep < r; ++rep) {
                const TaskResult& tr = results[ci * r + rep];
                if (!tr.ok) continue;
                double v = 0.0;
                switch (id) {
                    case EstimatorId::Plugin: v = tr.plugin; break;
                    case EstimatorId::FirstOrder: v = tr.first; break;
                    case EstimatorId::SecondOrder: v = tr.second; break;
                }
                sum.add(v);
                const double e = v - chi_true;
                sumsq_err.add(e * e);
                ++count;
            }
            if (count == 0) continue;
            ResultRow row;
            row.estimator = estimator_name(id);
            row.n = cell.n;
            row.k = cell.k;
            row.replications = static_cast<int>(count);
            row.seed = config.seed;
            row.mean = sum.value() / static_cast<double>(count);
            row.bias = row.mean - chi_true;
            const double mse = sumsq_err.value() / static_cast<double>(count);
            row.variance = std::max(0.0, mse - row.bias * row.bias);
            row.rmse = std::sqrt(mse);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

double rate_slope(const ResultTable& table, EstimatorId estimator) {
    const std::string name = estimator_name(estimator);
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<int> seen_n;
    for (const ResultRow& row : table.rows) {
        if (row.estimator != name) continue;
        if (!(row.rmse > 0.0)) continue;
        xs.push_back(std::log(static_cast<double>(row.n)));
        ys.push_back(std::log(row.rmse));
        if (std::find(seen_n.begin(), seen_n.end(), row.n) == seen_n.end())
            seen_n.push_back(row.n);
    }
    if (seen_n.size() < 3)
        throw std::invalid_argument("rate_slope: need at least 3 distinct n values");
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace hoif
