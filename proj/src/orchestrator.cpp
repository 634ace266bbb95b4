#include "rdlab/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "rdlab/blocks.hpp"
#include "rdlab/cones.hpp"
#include "rdlab/environment.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/limits.hpp"
#include "rdlab/rpf.hpp"
#include "rdlab/systems.hpp"
#include "rdlab/transfer.hpp"
#include "rdlab/util.hpp"

namespace rdlab {

namespace {

struct LabContext {
    Config cfg;
    EnvironmentModel env;
    CircleFamily fam;
    EnvPath path;
    RandomFunction potential, observable;
    Discretization disc;
    std::string out_dir;
    bool write_files = true;

    std::optional<CocycleWindow> plain;
    std::optional<RPFTriplet> trip;
    std::optional<CocycleWindow> norm;
    std::optional<NormalizedPotential> np;
    std::optional<PathGeometry> geo;
    std::optional<std::vector<CoveringTimes>> cover;

    long burn_in = 64;
    double tol = 1e-8;
    double s = 3.0;
};

EnvironmentModel build_environment(const Config& cfg, std::optional<std::uint64_t> seed_override) {
    if (!cfg.has_section("environment")) throw ConfigError("missing section [environment]");
    std::string kind = cfg.get("environment", "kind");
    std::uint64_t seed = seed_override ? *seed_override : cfg.get_seed("environment", "seed");
    if (kind == "iid") {
        auto marg = cfg.get_doubles("environment", "marginal");
        return make_iid(marg, seed);
    }
    if (kind == "markov") {
        auto P = cfg.get_matrix("environment", "transition");
        return make_markov(P, seed);
    }
    throw ConfigError("environment kind must be iid or markov");
}

RandomFunction build_field(const Config& cfg, const std::string& section, int states) {
    if (!cfg.has_section(section)) throw ConfigError("missing section [" + section + "]");
    std::string kind = cfg.get(section, "kind");
    if (kind == "zero") return zero_function();
    if (kind == "neg_log_deriv") return neg_log_deriv_potential();
    if (kind == "cos")
        return cosine_function(cfg.get_double_or(section, "amplitude", 1.0),
                               cfg.get_double_or(section, "freq", 1.0));
    if (kind == "coboundary")
        return coboundary_function(cfg.get_double_or(section, "amplitude", 1.0));
    if (kind == "weierstrass")
        return weierstrass_function(cfg.get_double_or(section, "alpha", 1.0),
                                    int(cfg.get_long_or(section, "levels", 12)),
                                    cfg.get_seed(section, "seed"));
    if (kind == "per_symbol") {
        std::vector<std::vector<double>> vals;
        for (int st = 0; st < states; ++st)
            vals.push_back(cfg.get_doubles(section, "state" + std::to_string(st) + ".values"));
        return per_symbol_function(vals);
    }
    throw ConfigError("unknown field kind '" + kind + "' in [" + section + "]");
}

CircleFamily build_family(const Config& cfg, int states) {
    if (!cfg.has_section("system")) throw ConfigError("missing section [system]");
    std::string family = cfg.get("system", "family");
    double alpha = cfg.get_double_or("system", "alpha", 1.0);
    if (family == "circle") {
        int k = int(cfg.get_long("system", "k_base"));
        std::vector<CircleMapSpec> specs;
        for (int st = 0; st < states; ++st) {
            CircleMapSpec ms;
            std::string pre = "state" + std::to_string(st);
            ms.eps = cfg.get_double_or("system", pre + ".eps", 0.0);
            ms.shape = cfg.get_or("system", pre + ".shape", "none");
            specs.push_back(ms);
        }
        return make_circle_family(k, specs, alpha);
    }
    if (family == "sft") {
        int d = int(cfg.get_long("system", "alphabet"));
        std::vector<int> sizes;
        std::vector<std::vector<std::vector<int>>> mats;
        for (int st = 0; st < states; ++st) {
            sizes.push_back(d);
            auto m = cfg.get_matrix("system", "matrix" + std::to_string(st));
            std::vector<std::vector<int>> mi;
            for (const auto& row : m) {
                std::vector<int> r;
                for (double v : row) r.push_back(int(v));
                mi.push_back(r);
            }
            mats.push_back(mi);
        }
        return make_sft_family(sizes, mats, alpha);
    }
    throw ConfigError("system family must be circle or sft");
}

Discretization build_disc(const Config& cfg) {
    if (!cfg.has_section("discretization")) throw ConfigError("missing section [discretization]");
    Discretization d;
    std::string scheme = cfg.get("discretization", "scheme");
    if (scheme == "ulam") d.scheme = DiscScheme::ulam;
    else if (scheme == "cylinder") d.scheme = DiscScheme::cylinder;
    else throw ConfigError("discretization scheme must be ulam or cylinder");
    d.resolution = int(cfg.get_long("discretization", "resolution"));
    return d;
}

void ensure_triplet(LabContext& ctx) {
    if (ctx.trip) return;
    ctx.plain = build_window(ctx.fam, ctx.path, ctx.potential, ctx.disc, ctx.path.begin(),
                             ctx.path.end());
    ctx.trip = solve_triplet(*ctx.plain, ctx.burn_in, ctx.tol);
    ctx.norm = normalized_window(*ctx.plain, *ctx.trip);
}

void ensure_potential_data(LabContext& ctx) {
    ensure_triplet(ctx);
    if (!ctx.np)
        ctx.np = normalized_potential(*ctx.trip, ctx.fam, ctx.path, ctx.potential, ctx.disc,
                                      ctx.s, std::max(ctx.tol, 1e-6));
    if (!ctx.geo)
        ctx.geo = path_geometry(ctx.fam, ctx.path, ctx.trip->begin, ctx.path.end());
    if (!ctx.cover) {
        double R = ctx.cfg.get_double_or("system", "covering_R", 1.0);
        ctx.cover = covering_times(ctx.fam, ctx.path, R, ctx.trip->begin,
                                   ctx.trip->begin + long(ctx.trip->lambdas.size()));
    }
}

std::vector<std::pair<std::string, Eigen::VectorXd>> decay_tests(const LabContext& ctx) {
    CellGeometry cells = make_cells(ctx.fam.system, ctx.disc);
    std::vector<std::pair<std::string, Eigen::VectorXd>> tests;
    if (ctx.fam.system.family == Family::sft) {
        int d = cells.count;
        Eigen::VectorXd a(d), b(d);
        for (int i = 0; i < d; ++i) {
            a(i) = (i % 2 == 0) ? 1.0 : -1.0;
            b(i) = (i == 0) ? 1.0 : 0.0;
        }
        tests.emplace_back("alternating", a);
        tests.emplace_back("first-symbol", b);
        return tests;
    }
    auto words = ctx.cfg.has("analysis", "decay.tests")
                     ? ctx.cfg.get_words("analysis", "decay.tests")
                     : std::vector<std::string>{"weierstrass", "cos", "generic"};
    int st0 = ctx.path.at(ctx.trip ? ctx.trip->begin : ctx.path.begin());
    // the roughest representable scale is one cell, so the dyadic levels of a
    // test function are capped at log2(resolution) - 1 (top frequency res/4)
    int levels = std::max(3, int(std::log2(double(cells.count))) - 1);
    for (const auto& w : words) {
        RandomFunction f;
        if (w == "weierstrass")
            f = weierstrass_function(ctx.fam.system.holder_alpha, std::min(12, levels), 11);
        else if (w == "cos") f = cosine_function();
        else if (w == "sin") { f = cosine_function(); f.kind = FieldKind::sine; f.label = "sin"; }
        else if (w == "generic")
            f = weierstrass_function(ctx.fam.system.holder_alpha, std::min(12, levels), 271);
        else throw ConfigError("unknown decay test '" + w + "'");
        Eigen::VectorXd v(cells.count);
        for (int i = 0; i < cells.count; ++i) v(i) = f.eval(ctx.fam.system, st0, cells.rep(i));
        tests.emplace_back(w, v);
    }
    return tests;
}

void csv(const LabContext& ctx, const std::string& name, const std::vector<std::string>& header,
         const std::vector<std::vector<double>>& rows) {
    if (!ctx.write_files) return;
    write_csv(ctx.out_dir + "/" + name, header, rows);
}

// --- analyses ---------------------------------------------------------

void analysis_mixing(LabContext& ctx, RunReport& rep) {
    Json out = Json::object();
    MixingProfile prof = mixing_bounds(ctx.env);
    out.set("rho", prof.rho);
    out.set("alpha_prefactor", prof.alpha_prefactor);
    out.set("provenance", prof.provenance);

    std::vector<double> g;
    if (ctx.cfg.has("analysis", "mixing.g")) g = ctx.cfg.get_doubles("analysis", "mixing.g");
    else g.assign(std::size_t(ctx.env.state_count), 0.75);
    int n_max = int(ctx.cfg.get_long_or("analysis", "mixing.n_max", 20));
    int mc = int(ctx.cfg.get_long_or("analysis", "mixing.mc_samples", 20000));
    auto rows = product_decay(ctx.env, g, n_max, mc, ctx.cfg.get_seed("environment", "seed") + 1);

    std::vector<std::vector<double>> table;
    bool within = true;
    double eg = 0.0;
    for (int st = 0; st < ctx.env.state_count; ++st)
        eg += ctx.env.marginal[std::size_t(st)] * g[std::size_t(st)];
    for (const auto& r : rows) {
        table.push_back({double(r.n), r.mc_estimate, r.mc_se, r.lemma_bound});
        if (ctx.env.kind == EnvKind::iid) {
            if (std::abs(r.mc_estimate - std::pow(eg, r.n)) > 3.0 * r.mc_se + 1e-12) within = false;
        } else {
            if (r.mc_estimate > r.lemma_bound + 3.0 * r.mc_se) within = false;
        }
    }
    csv(ctx, "mixing_product_decay.csv", {"n", "mc_estimate", "mc_se", "lemma_bound"}, table);
    out.set("product_rows", long(rows.size()));

    // psi_U smallness required by the exponential product lemma
    double psi_need = 1.0 / eg - 1.0;
    double psi_have = prof.psi_u_bound(8);
    out.set("psi_condition_needed", psi_need);
    out.set("psi_at_8", psi_have);
    if (ctx.cfg.get_long_or("analysis", "assert.mixing_bound", 0) == 1) {
        rep.assertions.push_back({"mixing product within bound", within ? 1.0 : 0.0, 1.0, within, ""});
        rep.assertions.push_back({"psi_U condition", psi_have, psi_need, psi_have < psi_need, ""});
    }
    rep.analyses.set("mixing", std::move(out));
}

void analysis_rpf(LabContext& ctx, RunReport& rep) {
    ensure_triplet(ctx);
    const RPFTriplet& trip = *ctx.trip;
    Json out = Json::object();
    double worst_eig = 0.0, worst_dual = 0.0;
    for (std::size_t i = 0; i < trip.lambdas.size(); ++i) {
        worst_eig = std::max(worst_eig, trip.eigen_residual[i]);
        worst_dual = std::max(worst_dual, trip.dual_residual[i]);
    }
    out.set("lambda_front", trip.lambdas.front());
    out.set("worst_eigen_residual", worst_eig);
    out.set("worst_dual_residual", worst_dual);
    rep.assertions.push_back({"triplet eigen residual", worst_eig, ctx.tol, worst_eig <= ctx.tol, ""});

    if (ctx.cfg.get_long_or("analysis", "assert.lambda_sandwich", 0) == 1) {
        bool ok = true;
        for (std::size_t i = 0; i < trip.lambdas.size(); ++i) {
            long idx = trip.begin + long(i);
            int st = ctx.path.at(idx);
            FieldNorms nm = field_norms(ctx.fam, st, ctx.potential, ctx.fam.system.holder_alpha, 1.0);
            double D = double(ctx.fam.geometry[std::size_t(st)].degree);
            double hi = D * std::exp(nm.sup), lo = 1.0 / hi;
            if (trip.lambdas[i] < lo - 1e-12 || trip.lambdas[i] > hi + 1e-12) ok = false;
        }
        rep.assertions.push_back({"lambda sandwich", ok ? 1.0 : 0.0, 1.0, ok, ""});
    }

    // snapshot of the first reported fiber
    Json snap = Json::object();
    Json hj = Json::array(), nj = Json::array();
    for (int c = 0; c < std::min<int>(8, int(trip.h[0].size())); ++c) {
        hj.push(trip.h[0](c));
        nj.push(trip.nu[0](c));
    }
    snap.set("h_head", std::move(hj));
    snap.set("nu_head", std::move(nj));
    out.set("snapshot", std::move(snap));

    if (ctx.write_files) {
        std::ofstream f(ctx.out_dir + "/triplet.json");
        Json full = Json::object();
        Json lam = Json::array();
        for (double l : trip.lambdas) lam.push(l);
        full.set("begin", trip.begin);
        full.set("lambdas", std::move(lam));
        f << full.dump(1) << "\n";
    }
    rep.analyses.set("rpf", std::move(out));
}

void analysis_decay(LabContext& ctx, RunReport& rep) {
    ensure_triplet(ctx);
    CellGeometry cells = make_cells(ctx.fam.system, ctx.disc);
    int n_max = int(ctx.cfg.get_long_or("analysis", "decay.n_max", 256));
    n_max = int(std::min<long>(n_max, ctx.norm->end() - ctx.norm->begin()));
    DecayReport dr = decay_rate(*ctx.norm, *ctx.trip, decay_tests(ctx), n_max,
                                ctx.fam.system.holder_alpha, cells);
    Json out = Json::object();
    out.set("regime", dr.regime);
    out.set("exp_rate", dr.exp_rate);
    out.set("poly_rate", dr.poly_rate);
    out.set("beta_fit", dr.beta_fit);
    out.set("envelope_R", dr.envelope_R);
    out.set("envelope_stable", dr.envelope_stable);
    out.set("valid_count", long(dr.valid_count));

    std::vector<std::vector<double>> table;
    for (std::size_t i = 0; i < dr.ns.size(); ++i)
        table.push_back({double(dr.ns[i]), dr.decay[i],
                         dr.envelope_R * std::pow(double(dr.ns[i]), -dr.beta_fit),
                         i < dr.corr.size() ? dr.corr[i] : 0.0,
                         i < dr.corr_envelope.size() ? dr.corr_envelope[i] : 0.0});
    csv(ctx, "decay.csv", {"n", "decay", "envelope", "corr", "corr_envelope"}, table);

    if (ctx.cfg.has("analysis", "assert.regime")) {
        std::string want = ctx.cfg.get("analysis", "assert.regime");
        bool ok = want == "not-exponential" ? dr.regime != "exponential" : dr.regime == want;
        rep.assertions.push_back({"decay regime = " + want, ok ? 1.0 : 0.0, 1.0, ok, dr.regime});
    }
    if (ctx.cfg.has("analysis", "assert.exp_rate")) {
        double target = ctx.cfg.get_double("analysis", "assert.exp_rate");
        double rel = ctx.cfg.get_double_or("analysis", "assert.exp_rate_rel_tol", 0.15);
        bool ok = std::abs(dr.exp_rate - target) <= rel * std::abs(target);
        rep.assertions.push_back({"decay exponential rate", dr.exp_rate, target, ok, ""});
    }
    rep.analyses.set("decay", std::move(out));
}

void analysis_cones(LabContext& ctx, RunReport& rep) {
    ensure_potential_data(ctx);
    LedgerOptions opt;
    opt.M0 = int(ctx.cfg.get_long_or("analysis", "cones.M0", -1));
    opt.J0 = int(ctx.cfg.get_long_or("analysis", "cones.J0", -1));
    opt.D0 = ctx.cfg.get_double_or("analysis", "cones.D0", -1.0);
    ContractionLedger led = contraction_ledger(ctx.fam, ctx.path, *ctx.norm, *ctx.trip, *ctx.np,
                                               *ctx.cover, *ctx.geo, opt);
    Json out = Json::object();
    out.set("M0", long(led.M0));
    out.set("J0", long(led.J0));
    out.set("D0", led.D0);
    out.set("c", led.c);
    out.set("U", led.U);
    out.set("prob_A", led.prob_A);
    out.set("prob_A0", led.prob_A0);
    out.set("measured_diam", led.measured_diam);
    out.set("measured_contraction", led.measured_contraction);
    out.set("tanh_D0", led.tanh_D0);
    out.set("tanh_quarter", led.tanh_quarter);

    std::vector<std::vector<double>> table;
    for (std::size_t i = 0; i < led.in_A.size(); ++i)
        table.push_back({double(led.begin + long(i)), double(led.in_A[i]), led.d_values[i],
                         i < led.cumulative.size() ? double(led.cumulative[i]) : 0.0,
                         i < led.envelope.size() ? led.envelope[i] : led.U});
    csv(ctx, "ledger.csv", {"index", "in_A", "d_value", "cumulative_count", "envelope"}, table);

    rep.assertions.push_back({"P(A0) >= 1/4", led.prob_A0, 0.25, led.prob_A0 >= 0.25, ""});
    rep.assertions.push_back({"measured image diameter <= D0", led.measured_diam, led.D0,
                              led.measured_diam <= led.D0, ""});
    rep.assertions.push_back({"measured contraction <= tanh(D0)", led.measured_contraction,
                              led.tanh_D0, led.measured_contraction <= led.tanh_D0 + 1e-9, ""});
    rep.analyses.set("cones", std::move(out));
}

void analysis_blocks(LabContext& ctx, RunReport& rep) {
    ensure_potential_data(ctx);
    CellGeometry cells = make_cells(ctx.fam.system, ctx.disc);

    double C1 = ctx.cfg.get_double_or("analysis", "blocks.C1", 4.0);
    double beta = ctx.cfg.get_double_or("analysis", "blocks.beta", 2.0);
    double epsb = ctx.cfg.get_double_or("analysis", "blocks.eps", 0.5 * beta);
    double eps0 = ctx.cfg.get_double_or("analysis", "blocks.eps0", 0.1);
    long j_max = ctx.cfg.get_long_or("analysis", "blocks.j_max", 6);
    BlockSchedule sched = build_schedule(C1, beta, epsb, eps0, j_max);

    Json out = Json::object();
    out.set("sandwich_ok", sched.sandwich_ok);
    out.set("A1", sched.A1);
    out.set("A2", sched.A2);
    std::vector<std::vector<double>> stab;
    for (std::size_t j = 0; j < sched.n_sizes.size(); ++j)
        stab.push_back({double(j + 1), double(sched.n_sizes[j]), double(sched.cum[j])});
    csv(ctx, "schedule.csv", {"j", "n_j", "N_j"}, stab);
    rep.assertions.push_back({"schedule sandwich", sched.sandwich_ok ? 1.0 : 0.0, 1.0,
                              sched.sandwich_ok, ""});

    // visits to the good set; for uniformly expanding demos every index hits
    std::vector<char> level(std::size_t(ctx.env.state_count), 1);
    if (ctx.cfg.has("analysis", "blocks.level_states")) {
        level.assign(std::size_t(ctx.env.state_count), 0);
        for (long v : ctx.cfg.get_longs("analysis", "blocks.level_states"))
            level[std::size_t(v)] = 1;
    }
    EnvPath rel;  // visits relative to the normalized window start
    rel.offset = 0;
    for (long i = ctx.norm->begin(); i < ctx.norm->end(); ++i)
        rel.states.push_back(ctx.path.at(i));
    VisitRecord visits = visiting_times(rel, level, "blocks");

    InducedBlocks blocks = induce(*ctx.norm, *ctx.trip, visits, sched, cells,
                                  ctx.fam.system.holder_alpha);
    out.set("block_count", long(blocks.block_ops.size()));
    out.set("max_L_gap", long(blocks.max_L_gap));
    out.set("worst_block_eps", blocks.worst_block_eps);
    out.set("worst_power_ratio", blocks.worst_power_ratio);
    rep.assertions.push_back({"L gaps <= 2", double(blocks.max_L_gap), 2.0,
                              blocks.max_L_gap <= 2, ""});
    rep.assertions.push_back({"block eps0 contraction", blocks.worst_power_ratio, 1.0,
                              blocks.worst_power_ratio <= 1.0, ""});

    int J = int(ctx.cfg.get_long_or("analysis", "blocks.J", 2));
    if (J >= int(blocks.block_ops.size())) J = int(blocks.block_ops.size()) - 1;
    if (J >= 1) {
        BlockTriplet bt = block_triplet(ctx.fam, ctx.path, ctx.potential, ctx.observable,
                                        ctx.disc, *ctx.trip, blocks, J, {},
                                        ctx.cfg.get_double_or("analysis", "blocks.radius_lead", 0.1));
        out.set("delta_J", bt.delta_J);
        out.set("E5", bt.E5);
        out.set("E9", bt.E9);
        out.set("z0_lambda_dev", bt.z0_lambda_dev);
        out.set("z0_h_dev", bt.z0_h_dev);
        out.set("z0_nu_dev", bt.z0_nu_dev);
        double res = 0.0;
        for (double r : bt.res_nu_one) res = std::max(res, r);
        for (double r : bt.res_nu_h) res = std::max(res, r);
        out.set("normalization_residual", res);
        out.set("decay_ratio", bt.decay_ratio);
        out.set("R0_fit", bt.R0_fit);
        rep.assertions.push_back({"block triplet z=0 reduction",
                                  std::max({bt.z0_lambda_dev, bt.z0_h_dev, bt.z0_nu_dev}), 1e-8,
                                  std::max({bt.z0_lambda_dev, bt.z0_h_dev, bt.z0_nu_dev}) <= 1e-8,
                                  ""});
        rep.assertions.push_back({"block triplet normalizations", res, 1e-8, res <= 1e-8, ""});
        rep.assertions.push_back({"block rank-one decay ratio", bt.decay_ratio, 2.0 * eps0,
                                  bt.decay_ratio <= 2.0 * eps0, ""});
    }
    rep.analyses.set("blocks", std::move(out));
}

void analysis_var(LabContext& ctx, RunReport& rep) {
    ensure_triplet(ctx);
    std::vector<long> grid = ctx.cfg.has("analysis", "var.n_grid")
                                 ? ctx.cfg.get_longs("analysis", "var.n_grid")
                                 : std::vector<long>{16, 64, 256};
    int k_max = int(ctx.cfg.get_long_or("analysis", "var.k_max", 32));
    VarianceReport vr = variance(ctx.fam, ctx.path, ctx.potential, ctx.observable, ctx.disc,
                                 *ctx.trip, grid, k_max);
    Json out = Json::object();
    out.set("sigma2_series", vr.sigma2_series);
    out.set("mean_f2", vr.mean_f2);
    out.set("tail_bound", vr.tail_bound);
    out.set("convergence_slope", vr.convergence_slope);
    out.set("below_noise", vr.below_noise);

    std::vector<std::vector<double>> table;
    for (std::size_t g = 0; g < vr.ns.size(); ++g)
        table.push_back({double(vr.ns[g]), vr.sigma2_over_n[g]});
    csv(ctx, "variance.csv", {"n", "sigma2_over_n"}, table);
    std::vector<std::vector<double>> btab;
    for (std::size_t k = 0; k < vr.b_k.size(); ++k)
        btab.push_back({double(k + 1), vr.b_k[k]});
    csv(ctx, "correlations.csv", {"k", "b_k"}, btab);

    if (ctx.cfg.has("analysis", "assert.sigma2")) {
        double target = ctx.cfg.get_double("analysis", "assert.sigma2");
        double tol = ctx.cfg.get_double_or("analysis", "assert.sigma2_tol", 0.01);
        bool ok = std::abs(vr.sigma2_series - target) <= tol;
        rep.assertions.push_back({"sigma2 series", vr.sigma2_series, target, ok, ""});
    }
    if (ctx.cfg.has("analysis", "assert.var_slope_max")) {
        double smax = ctx.cfg.get_double("analysis", "assert.var_slope_max");
        bool ok = vr.below_noise || vr.convergence_slope <= smax;
        rep.assertions.push_back({"variance convergence slope", vr.convergence_slope, smax, ok,
                                  vr.below_noise ? "below rounding noise" : ""});
    }
    rep.analyses.set("var", std::move(out));
}

void analysis_clt(LabContext& ctx, RunReport& rep) {
    ensure_triplet(ctx);
    std::vector<long> grid = ctx.cfg.has("analysis", "clt.n_grid")
                                 ? ctx.cfg.get_longs("analysis", "clt.n_grid")
                                 : std::vector<long>{256, 512, 1024};
    long mc = ctx.cfg.get_long_or("analysis", "clt.mc_samples", 20000);
    double c = ctx.cfg.get_double_or("analysis", "clt.esseen_c", 1.0);
    SigmaMode mode = ctx.cfg.get_or("analysis", "clt.sigma_mode", "operators") == "sample"
                         ? SigmaMode::sample
                         : SigmaMode::operators;
    std::uint64_t seed = ctx.cfg.get_seed("analysis", "clt.seed");
    CLTReport cr = clt_report(ctx.fam, ctx.path, ctx.potential, ctx.observable, ctx.disc,
                              *ctx.trip, grid, mc, c, mode, seed,
                              int(ctx.cfg.get_long_or("analysis", "clt.quad_intervals", 128)));
    Json out = Json::object();
    out.set("be_slope", cr.be_slope);
    out.set("be_r2", cr.be_r2);

    std::vector<std::vector<double>> table;
    bool dominated = true;
    for (const auto& r : cr.rows) {
        table.push_back({double(r.n), r.ks, r.esseen, r.sigma_n, r.T});
        if (r.esseen < r.ks) dominated = false;
    }
    csv(ctx, "ks_table.csv", {"n", "ks", "esseen_bound", "sigma_n", "T"}, table);
    std::vector<std::vector<double>> cf;
    for (std::size_t i = 0; i < cr.char_ts.size(); ++i)
        cf.push_back({cr.char_ts[i], cr.char_values[i].real(), cr.char_values[i].imag()});
    csv(ctx, "char_fn.csv", {"t", "re", "im"}, cf);

    if (ctx.cfg.get_long_or("analysis", "assert.esseen_dominates", 0) == 1)
        rep.assertions.push_back({"esseen bound dominates KS", dominated ? 1.0 : 0.0, 1.0,
                                  dominated, ""});
    if (ctx.cfg.has("analysis", "assert.be_slope_max")) {
        double smax = ctx.cfg.get_double("analysis", "assert.be_slope_max");
        rep.assertions.push_back({"BE slope", cr.be_slope, smax, cr.be_slope <= smax, ""});
    }
    if (ctx.cfg.has("analysis", "assert.ks_max")) {
        double kmax = ctx.cfg.get_double("analysis", "assert.ks_max");
        double worst = 0.0;
        for (const auto& r : cr.rows) worst = std::max(worst, r.ks);
        rep.assertions.push_back({"KS below threshold", worst, kmax, worst <= kmax, ""});
    }
    rep.analyses.set("clt", std::move(out));
}

void analysis_mdp(LabContext& ctx, RunReport& rep) {
    ensure_triplet(ctx);
    std::vector<long> grid = ctx.cfg.has("analysis", "mdp.n_grid")
                                 ? ctx.cfg.get_longs("analysis", "mdp.n_grid")
                                 : std::vector<long>{256, 1024, 4096};
    double a_expo = ctx.cfg.get_double_or("analysis", "mdp.a_expo", 0.1);
    std::vector<double> tg = ctx.cfg.has("analysis", "mdp.t_grid")
                                 ? ctx.cfg.get_doubles("analysis", "mdp.t_grid")
                                 : std::vector<double>{-0.5, -0.25, 0.25, 0.5};
    std::vector<std::pair<double, double>> gammas;
    if (ctx.cfg.has("analysis", "mdp.gamma")) {
        auto g = ctx.cfg.get_doubles("analysis", "mdp.gamma");
        for (std::size_t i = 0; i + 1 < g.size(); i += 2) gammas.emplace_back(g[i], g[i + 1]);
    } else {
        gammas.emplace_back(0.5, 1e9);
    }
    long mc = ctx.cfg.get_long_or("analysis", "mdp.mc_samples", 20000);
    std::uint64_t seed = ctx.cfg.get_seed("analysis", "mdp.seed");

    // sigma from the exact series
    VarianceReport vr = variance(ctx.fam, ctx.path, ctx.potential, ctx.observable, ctx.disc,
                                 *ctx.trip, grid, int(ctx.cfg.get_long_or("analysis", "var.k_max", 16)));
    if (vr.sigma2_series <= 1e-10)
        throw PreconditionError("degenerate variance in the MDP analysis");
    double sigma = std::sqrt(vr.sigma2_series);

    MDPReport mr = mdp_report(ctx.fam, ctx.path, ctx.potential, ctx.observable, ctx.disc,
                              *ctx.trip, sigma, a_expo, tg, gammas, grid, mc,
                              ctx.cfg.get_double_or("analysis", "mdp.domain_radius", 0.0), seed);
    Json out = Json::object();
    out.set("sigma", sigma);
    out.set("convexity_ok", mr.convexity_ok);
    out.set("clipped", mr.clipped);
    std::vector<std::vector<double>> ct;
    for (const auto& r : mr.cumulants)
        ct.push_back({r.t, double(r.n), r.scaled_cumulant, r.limit_error});
    csv(ctx, "mdp_cumulants.csv", {"t", "n", "scaled_cumulant", "limit_error"}, ct);
    std::vector<std::vector<double>> st;
    for (std::size_t g = 0; g < gammas.size(); ++g)
        st.push_back({gammas[g].first, gammas[g].second, mr.set_rate_mc[g], mr.set_rate_slope[g],
                      mr.set_rate_closure[g], mr.set_rate_interior[g]});
    csv(ctx, "mdp_set_rates.csv",
        {"gamma_lo", "gamma_hi", "rate_mc", "rate_slope", "rate_closure", "rate_interior"}, st);

    long n_top = *std::max_element(grid.begin(), grid.end());
    if (ctx.cfg.has("analysis", "assert.cumulant_rel_tol")) {
        double rel = ctx.cfg.get_double("analysis", "assert.cumulant_rel_tol");
        bool ok = true;
        double worst = 0.0;
        for (const auto& r : mr.cumulants)
            if (r.n == n_top && r.t != 0.0) {
                double target = 0.5 * r.t * r.t;
                worst = std::max(worst, r.limit_error / target);
                if (r.limit_error > rel * target) ok = false;
            }
        rep.assertions.push_back({"MDP cumulant limit", worst, rel, ok, ""});
    }
    if (ctx.cfg.has("analysis", "assert.set_rate_rel_tol")) {
        double rel = ctx.cfg.get_double("analysis", "assert.set_rate_rel_tol");
        bool ok = true;
        double worst = 0.0;
        for (std::size_t g = 0; g < gammas.size(); ++g) {
            double dev = std::abs(mr.set_rate_mc[g] - mr.set_rate_closure[g]) /
                         std::abs(mr.set_rate_closure[g]);
            worst = std::max(worst, dev);
            if (dev > rel) ok = false;
        }
        rep.assertions.push_back({"MDP interval rate", worst, rel, ok, ""});
    }
    rep.assertions.push_back({"MDP cumulant convexity", mr.convexity_ok ? 1.0 : 0.0, 1.0,
                              mr.convexity_ok, ""});
    rep.analyses.set("mdp", std::move(out));
}

}  // namespace

RunReport run_experiment(const Config& cfg, const RunOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    if (opt.threads > 0) thread_override() = opt.threads;

    LabContext ctx;
    ctx.cfg = cfg;
    ctx.write_files = opt.write_files;

    // validate everything before any output is produced
    ctx.env = build_environment(cfg, opt.seed_override);
    ctx.fam = build_family(cfg, ctx.env.state_count);
    ctx.potential = build_field(cfg, "potential", ctx.env.state_count);
    ctx.observable = build_field(cfg, "observable", ctx.env.state_count);
    ctx.disc = build_disc(cfg);
    make_cells(ctx.fam.system, ctx.disc);
    if (!cfg.has_section("path")) throw ConfigError("missing section [path]");
    long plen = cfg.get_long("path", "length");
    long poff = cfg.get_long_or("path", "offset", 0);
    std::uint64_t pseed = cfg.get_seed("path", "seed");
    if (!cfg.has_section("analysis")) throw ConfigError("missing section [analysis]");
    std::string runs = cfg.get_or("analysis", "run", "");
    std::vector<std::string> enabled;
    {
        std::istringstream in(runs);
        std::string w;
        while (in >> w) enabled.push_back(w);
        for (const auto& w : enabled)
            if (w != "rpf" && w != "decay" && w != "cones" && w != "blocks" && w != "clt" &&
                w != "mdp" && w != "var" && w != "mixing")
                throw ConfigError("unknown analysis keyword '" + w + "'");
    }
    ctx.burn_in = cfg.get_long_or("analysis", "burn_in", 64);
    ctx.tol = cfg.get_double_or("analysis", "tol", 1e-8);
    ctx.s = cfg.get_double_or("analysis", "s", 3.0);
    ctx.out_dir = opt.out_dir_override.empty() ? cfg.get_or("output", "dir", "out/run")
                                               : opt.out_dir_override;

    ctx.path = sample_path(ctx.env, poff, plen, pseed);

    RunReport rep;
    rep.config_text = cfg.raw_text;
    {
        std::string hashed = cfg.raw_text;
        if (opt.seed_override) hashed += "\n#seed-override=" + std::to_string(*opt.seed_override);
        rep.config_hash = fnv1a(hashed);
    }

    if (ctx.write_files) std::filesystem::create_directories(ctx.out_dir);

    for (const auto& w : enabled) {
        if (w == "mixing") analysis_mixing(ctx, rep);
        else if (w == "rpf") analysis_rpf(ctx, rep);
        else if (w == "decay") analysis_decay(ctx, rep);
        else if (w == "cones") analysis_cones(ctx, rep);
        else if (w == "blocks") analysis_blocks(ctx, rep);
        else if (w == "var") analysis_var(ctx, rep);
        else if (w == "clt") analysis_clt(ctx, rep);
        else if (w == "mdp") analysis_mdp(ctx, rep);
    }

    rep.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    if (ctx.write_files) {
        std::ofstream f(ctx.out_dir + "/report.json");
        f << rep.to_json().dump(1) << "\n";
    }
    return rep;
}

}  // namespace rdlab
