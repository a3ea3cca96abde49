#include "hypolab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <random>

#include "hypolab/config.hpp"
#include "hypolab/errors.hpp"
#include "hypolab/expr.hpp"
#include "hypolab/green.hpp"
#include "hypolab/harnack.hpp"
#include "hypolab/io.hpp"
#include "hypolab/parallel.hpp"
#include "hypolab/propagation.hpp"

namespace hypolab {

namespace {

namespace fs = std::filesystem;

struct RunContext {
    ExperimentConfig cfg;
    fs::path out;
    std::vector<std::string> formats;
    json report;
    std::vector<std::string> figures;

    bool wants(const std::string& fmt) const {
        for (const auto& f : formats)
            if (f == fmt) return true;
        return false;
    }
    void figure(const fs::path& p) { figures.push_back(p.filename().string()); }
};

Field field_from_expr(MaskPtr mask, const std::string& text) {
    Expr e = Expr::parse(text, mask->grid.dim);
    return make_field(mask, [e](const Eigen::VectorXd& x) {
        return e.eval(std::span<const double>(x.data(), static_cast<size_t>(x.size())));
    });
}

json point_json(const Eigen::VectorXd& x) {
    json arr = json::array();
    for (long d = 0; d < x.size(); ++d) arr.push_back(x[d]);
    return arr;
}

Eigen::VectorXd shape_anchor(const ShapeInfo& s) {
    switch (s.kind) {
        case ShapeInfo::Kind::Lens: return s.x0;
        case ShapeInfo::Kind::Ball: return s.center;
        case ShapeInfo::Kind::Box: return 0.5 * (s.box_lo + s.box_hi);
        default: throw PreconditionViolated("custom shape has no anchor");
    }
}

// Seeded nonnegative boundary draws for the randomized suites.
Eigen::VectorXd random_boundary_data(long n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v[i] = uni(rng);
    return v;
}

void cmd_solve(RunContext& ctx) {
    OperatorSpec spec = ctx.cfg.make_operator();
    Grid grid = ctx.cfg.make_grid();
    auto mask = std::make_shared<DomainMask>(ctx.cfg.make_mask(grid));
    auto sys = std::make_shared<StencilSystem>(assemble(spec, mask));
    Field f = field_from_expr(mask, ctx.cfg.run().value("f", "0"));
    Field phi = field_from_expr(mask, ctx.cfg.run().value("phi", "0"));
    Field u = solve(sys, f, phi);

    json payload;
    payload["n_interior"] = mask->n_interior();
    payload["n_boundary"] = mask->n_boundary();
    payload["diag_a"] = sys->diag_a;
    payload["mmatrix"] = sys->mmatrix;
    payload["sup_norm"] = u.sup_norm();
    payload["interior_max"] = u.interior_max();
    payload["boundary_max"] = u.boundary_max();
    payload["min_value"] = u.min_value();
    ctx.report["payload"] = payload;

    if (ctx.wants("csv")) {
        write_field_csv(ctx.out / "u.csv", u);
        ctx.figure(ctx.out / "u.csv");
    }
    if (ctx.wants("svg")) {
        write_field_svg(ctx.out / "u.svg", u, Slice::middle(grid), "solve: u",
                        ctx.cfg.config_hash());
        ctx.figure(ctx.out / "u.svg");
    }
    if (ctx.wants("pgm")) {
        write_field_pgm(ctx.out / "u.pgm", u, Slice::middle(grid));
        ctx.figure(ctx.out / "u.pgm");
    }
    if (ctx.wants("mm")) {
        write_system(ctx.out / "system", *sys);
        ctx.figure(ctx.out / "system.mtx");
        ctx.figure(ctx.out / "system.boundary.mtx");
        ctx.figure(ctx.out / "system.json");
    }
}

void cmd_green(RunContext& ctx) {
    OperatorSpec spec = ctx.cfg.make_operator();
    Grid grid = ctx.cfg.make_grid();
    auto mask = std::make_shared<DomainMask>(ctx.cfg.make_mask(grid));
    auto sys = std::make_shared<StencilSystem>(assemble(spec, mask));
    GreenMatrix gm = green_matrix(sys);

    Eigen::VectorXd source = ctx.cfg.run().contains("source")
                                 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                       ctx.cfg.run()["source"].get<std::vector<double>>().data(),
                                       grid.dim))
                                 : shape_anchor(mask->shape);
    long src_node = grid.nearest_node(source);
    long src_row = mask->interior_index[src_node];
    if (src_row < 0) throw PreconditionViolated("source point is not interior");

    json payload;
    payload["n_interior"] = mask->n_interior();
    payload["epsilon"] = sys->epsilon;
    payload["max_relative_asymmetry"] = gm.max_relative_asymmetry();
    payload["min_entry"] = gm.min_entry();
    Eigen::VectorXd masses = gm.row_masses();
    payload["row_mass_max"] = masses.maxCoeff();
    payload["total_mass"] = gm.total_mass();
    payload["w_symmetry_defect"] = sys->w_symmetry_defect();
    ctx.report["payload"] = payload;

    write_green_binary(ctx.out / "green", gm);
    ctx.figure(ctx.out / "green.gk");
    ctx.figure(ctx.out / "green.json");
    if (ctx.wants("svg")) {
        Field kx;
        kx.mask = mask;
        kx.interior = gm.k.col(src_row);
        kx.boundary = Eigen::VectorXd::Zero(mask->n_boundary());
        write_field_svg(ctx.out / "green_column.svg", kx, Slice::middle(grid),
                        "green kernel column", ctx.cfg.config_hash());
        ctx.figure(ctx.out / "green_column.svg");
    }
    if (ctx.wants("mm")) {
        write_system(ctx.out / "system", *sys);
        ctx.figure(ctx.out / "system.mtx");
        ctx.figure(ctx.out / "system.boundary.mtx");
        ctx.figure(ctx.out / "system.json");
    }
}

void cmd_harnack(RunContext& ctx) {
    OperatorSpec spec = ctx.cfg.make_operator();
    Grid grid = ctx.cfg.make_grid();
    auto mask = std::make_shared<DomainMask>(ctx.cfg.make_mask(grid));
    auto sys = std::make_shared<StencilSystem>(assemble(spec, mask));
    PoissonKernel pk = poisson_kernel(sys);

    const json& run = ctx.cfg.run();
    if (!run.contains("compact") || run["compact"].value("type", "") != "ball")
        throw ConfigError("harnack requires run.compact = { type = \"ball\", center, radius }");
    Eigen::VectorXd center(grid.dim);
    {
        auto c = run["compact"].at("center").get<std::vector<double>>();
        for (int d = 0; d < grid.dim; ++d) center[d] = c[static_cast<size_t>(d)];
    }
    double radius = run["compact"].at("radius").get<double>();
    std::vector<long> K = ball_compact(*mask, center, radius);
    if (K.empty()) throw PreconditionViolated("compact set contains no interior nodes");

    Eigen::VectorXd y0 = center;
    if (run.contains("y0")) {
        auto y = run["y0"].get<std::vector<double>>();
        for (int d = 0; d < grid.dim; ++d) y0[d] = y[static_cast<size_t>(d)];
    }
    long y0_node = grid.nearest_node(y0);

    WeakConstant weak = weak_constant(pk, K, y0_node);
    StrongConstant strong = strong_constant(pk, K);

    json payload;
    payload["schema_version"] = 1;
    payload["compact"] = {{"type", "ball"}, {"center", point_json(center)}, {"radius", radius},
                          {"nodes", K.size()}};
    payload["y0_node"] = y0_node;
    payload["weak_c"] = weak.c;
    payload["strong_m"] = strong.m;
    payload["witness"] = {{"weak_z", weak.witness_z},
                          {"weak_x", weak.witness_x},
                          {"strong_z", strong.witness_z},
                          {"strong_x1", strong.witness_x1},
                          {"strong_x2", strong.witness_x2}};
    payload["row_sum_max_dev"] =
        (pk.row_sums() - Eigen::VectorXd::Ones(pk.p.rows())).cwiseAbs().maxCoeff();
    payload["min_entry"] = pk.min_entry();

    if (run.contains("m")) {
        DerivativeTable table = derivative_constant(pk, K, y0_node, run["m"].get<int>());
        payload["derivative"] = {{"m", table.m},
                                 {"constant", table.constant},
                                 {"per_order", table.per_order},
                                 {"witness_z", table.witness_z}};
    }

    double delta = run.value("delta", 8.0 * grid.max_spacing());
    try {
        ChainReport chain = chain_of_balls(pk, K, delta);
        payload["chain"] = {{"p", chain.p},
                           {"bound", chain.bound},
                           {"dominates", strong.m <= chain.bound},
                           {"centers", chain.centers}};
    } catch (const ChainFailure& e) {
        payload["chain"] = {{"error", e.what()}};
    }

    // Seeded cone-membership draws: every nonnegative combination of Poisson
    // columns must respect both constants.
    long draws = run.value("draws", 20L);
    std::mt19937_64 rng(ctx.cfg.seed);
    const DomainMask& m = *mask;
    long y0_row = m.interior_index[y0_node];
    double worst_weak = 0.0, worst_strong = 0.0;
    for (long d = 0; d < draws; ++d) {
        Eigen::VectorXd data = random_boundary_data(m.n_boundary(), rng);
        Eigen::VectorXd u = pk.superpose(data);
        double sup = -std::numeric_limits<double>::infinity();
        double inf = std::numeric_limits<double>::infinity();
        for (long node : K) {
            double v = u[m.interior_index[node]];
            sup = std::max(sup, v);
            inf = std::min(inf, v);
        }
        worst_weak = std::max(worst_weak, sup / (weak.c * u[y0_row]));
        worst_strong = std::max(worst_strong, sup / (strong.m * inf));
    }
    payload["cone_check"] = {{"draws", draws},
                             {"max_weak_ratio", worst_weak},
                             {"max_strong_ratio", worst_strong},
                             {"pass", worst_weak <= 1.0 + 1e-9 && worst_strong <= 1.0 + 1e-9}};
    ctx.report["payload"] = payload;

    if (ctx.wants("svg")) {
        Field ratio;
        ratio.mask = mask;
        ratio.interior = pk.p.col(weak.witness_z);
        ratio.boundary = Eigen::VectorXd::Zero(m.n_boundary());
        write_field_svg(ctx.out / "poisson_witness.svg", ratio, Slice::middle(grid),
                        "poisson column at the weak witness", ctx.cfg.config_hash());
        ctx.figure(ctx.out / "poisson_witness.svg");
    }
}

void cmd_smp(RunContext& ctx) {
    OperatorSpec spec = ctx.cfg.make_operator();
    Grid grid = ctx.cfg.make_grid();
    auto mask = std::make_shared<DomainMask>(ctx.cfg.make_mask(grid));
    auto sys = std::make_shared<StencilSystem>(assemble(spec, mask));
    DirichletSolver solver(sys);
    Field zero = constant_field(mask, 0.0);

    long draws = ctx.cfg.run().value("draws", 20L);
    std::mt19937_64 rng(ctx.cfg.seed);
    json results = json::array();
    long interior_max_cases = 0, failures = 0;
    for (long d = 0; d < draws; ++d) {
        Field phi = zero;
        phi.boundary = random_boundary_data(mask->n_boundary(), rng);
        Field u = solver.solve(zero, phi);
        SmpReport rep = smp_test(u, spec, mask);
        if (rep.interior_max_attained) ++interior_max_cases;
        if (!rep.pass) ++failures;
        results.push_back({{"interior_max_attained", rep.interior_max_attained},
                           {"pass", rep.pass},
                           {"interior_max", rep.interior_max},
                           {"boundary_max", rep.boundary_max}});
    }
    json payload;
    payload["draws"] = draws;
    payload["interior_max_cases"] = interior_max_cases;
    payload["failures"] = failures;
    payload["results"] = results;

    // Constant data: with c = 0 and eps = 0 constants are harmonic, the
    // interior max is attained and must propagate everywhere.
    if (spec.epsilon == 0.0) {
        Field phi5 = constant_field(mask, 5.0);
        Field u = solver.solve(zero, phi5);
        SmpReport rep = smp_test(u, spec, mask);
        payload["constant_case"] = {{"interior_max_attained", rep.interior_max_attained},
                                    {"pass", rep.pass},
                                    {"reached", rep.reached_count},
                                    {"deviation", rep.deviation}};
    }
    ctx.report["payload"] = payload;
}

void cmd_hopf(RunContext& ctx) {
    OperatorSpec spec = ctx.cfg.make_operator();
    Grid grid = ctx.cfg.make_grid();
    auto mask = std::make_shared<DomainMask>(ctx.cfg.make_mask(grid));
    long samples = ctx.cfg.run().value("samples", 50L);
    std::mt19937_64 rng(ctx.cfg.seed);
    std::uniform_int_distribution<long> pick(0, mask->n_boundary() - 1);

    long no_ball = 0, characteristic = 0, positive = 0;
    double min_lw = std::numeric_limits<double>::infinity();
    double min_order = std::numeric_limits<double>::infinity();
    json entries = json::array();
    const double h = grid.max_spacing();
    for (long s = 0; s < samples; ++s) {
        long node = mask->boundary[pick(rng)];
        auto ball = exterior_ball(*mask, node);
        if (!ball) {
            ++no_ball;
            continue;
        }
        CharReport cr = characteristic_test(spec, ball->y, ball->nu);
        if (cr.characteristic) {
            ++characteristic;
            entries.push_back({{"node", node}, {"characteristic", true}, {"quad", cr.value}});
            continue;
        }
        HopfCertificate cert = hopf_certificate(spec, ball->y, ball->nu);
        double d1 = std::abs(hopf_discrete_crosscheck(spec, cert, h) - cert.lw_at_y);
        double d2 = std::abs(hopf_discrete_crosscheck(spec, cert, h / 2.0) - cert.lw_at_y);
        double order = (d1 > 0 && d2 > 0) ? std::log2(d1 / d2) : 2.0;
        if (cert.lw_at_y > 0.0) ++positive;
        min_lw = std::min(min_lw, cert.lw_at_y);
        min_order = std::min(min_order, order);
        if (entries.size() < 16)
            entries.push_back({{"node", node},
                               {"characteristic", false},
                               {"lambda", cert.lambda},
                               {"lw", cert.lw_at_y},
                               {"order", order}});
    }
    json payload;
    payload["samples"] = samples;
    payload["no_exterior_ball"] = no_ball;
    payload["characteristic"] = characteristic;
    payload["positive_lw"] = positive;
    payload["min_lw"] = std::isfinite(min_lw) ? min_lw : 0.0;
    payload["min_order"] = std::isfinite(min_order) ? min_order : 0.0;
    payload["entries"] = entries;
    ctx.report["payload"] = payload;
}

void cmd_paths(RunContext& ctx) {
    OperatorSpec spec = ctx.cfg.make_operator();
    Grid grid = ctx.cfg.make_grid();
    auto mask = std::make_shared<DomainMask>(ctx.cfg.make_mask(grid));
    Eigen::VectorXd start = shape_anchor(mask->shape);
    if (ctx.cfg.run().contains("start")) {
        auto s = ctx.cfg.run()["start"].get<std::vector<double>>();
        for (int d = 0; d < grid.dim; ++d) start[d] = s[static_cast<size_t>(d)];
    }
    long budget = ctx.cfg.run().value("step_budget", 1'000'000L);
    ReachReport reach = reachable_set(spec, start, mask, budget);

    json payload;
    payload["interior_cells"] = mask->n_interior();
    payload["reached"] = reach.reached_count;
    payload["complete"] = reach.complete;
    payload["budget_exhausted"] = reach.budget_exhausted;
    ctx.report["payload"] = payload;

    // Export a handful of spanning-tree paths to the most distant cells.
    long want = ctx.cfg.run().value("export_paths", 4L);
    std::vector<ControlPath> paths;
    const Eigen::VectorXd origin = grid.coords(mask->interior[reach.start_row]);
    std::vector<std::pair<double, long>> far;
    for (long r = 0; r < mask->n_interior(); ++r)
        if (reach.reached[r] && r != reach.start_row)
            far.push_back({(grid.coords(mask->interior[r]) - origin).norm(), r});
    std::sort(far.begin(), far.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (long i = 0; i < std::min<long>(want, static_cast<long>(far.size())); ++i)
        paths.push_back(reach.path_to(spec, far[static_cast<size_t>(i)].second));

    if (ctx.wants("csv")) {
        write_paths_csv(ctx.out / "paths.csv", paths);
        ctx.figure(ctx.out / "paths.csv");
    }
    if (ctx.wants("svg")) {
        write_paths_svg(ctx.out / "paths.svg", *mask, paths, Slice::middle(grid),
                        "control paths", ctx.cfg.config_hash());
        ctx.figure(ctx.out / "paths.svg");
    }
}

void cmd_refine(RunContext& ctx) {
    const json& run = ctx.cfg.run();
    std::string target = run.value("target", "green_decay");
    if (!run.contains("resolutions")) throw ConfigError("refine requires run.resolutions");
    std::vector<long> resolutions = run["resolutions"].get<std::vector<long>>();

    OperatorSpec spec = ctx.cfg.make_operator();
    ShapeInfo shp = ctx.cfg.shape();
    const json& gj = ctx.cfg.raw.at("grid");
    std::vector<std::array<double, 2>> bounds;
    for (const auto& b : gj.at("bounds")) bounds.push_back({b[0].get<double>(), b[1].get<double>()});

    json payload;
    payload["target"] = target;
    payload["resolutions"] = resolutions;
    if (target == "green_decay") {
        Eigen::VectorXd x = shape_anchor(shp);
        if (run.contains("source")) {
            auto s = run["source"].get<std::vector<double>>();
            for (size_t d = 0; d < s.size(); ++d) x[static_cast<long>(d)] = s[d];
        }
        DecayProfile profile = verify_boundary_decay(spec, shp, bounds, resolutions, x);
        payload["collar_max"] = profile.collar_max;
        payload["strictly_decreasing"] = profile.strictly_decreasing;
    } else if (target == "harnack") {
        if (!run.contains("compact")) throw ConfigError("refine harnack needs run.compact");
        auto cvec = run["compact"].at("center").get<std::vector<double>>();
        double radius = run["compact"].at("radius").get<double>();
        json history = json::array();
        for (long res : resolutions) {
            Grid grid = build_grid(bounds, std::vector<long>(bounds.size(), res));
            auto mask = std::make_shared<DomainMask>(build_mask(shp, grid));
            auto sys = std::make_shared<StencilSystem>(assemble(spec, mask));
            PoissonKernel pk = poisson_kernel(sys);
            Eigen::VectorXd center(grid.dim);
            for (int d = 0; d < grid.dim; ++d) center[d] = cvec[static_cast<size_t>(d)];
            std::vector<long> K = ball_compact(*mask, center, radius);
            WeakConstant weak = weak_constant(pk, K, grid.nearest_node(center));
            StrongConstant strong = strong_constant(pk, K);
            history.push_back({{"resolution", res}, {"weak_c", weak.c}, {"strong_m", strong.m}});
        }
        payload["history"] = history;
    } else {
        throw ConfigError("refine target must be green_decay or harnack");
    }
    ctx.report["payload"] = payload;
}

void cmd_gallery_list(RunContext& ctx) {
    json payload = json::array();
    for (const auto& name : gallery_names()) {
        OperatorSpec spec = gallery(name);
        payload.push_back({{"name", name},
                           {"dim", spec.dim},
                           {"hypoelliptic", "certified"},
                           {"params", name == "laplace"          ? json::array({"dim"})
                                      : name == "grushin_fedii" ? json::array({"a"})
                                                                 : json::array()}});
    }
    ctx.report["payload"] = payload;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"numerical laboratory for degenerate divergence-form operators"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> overrides, format_flags;
    long seed_flag = -1;
    int threads = 0;

    std::vector<CLI::App*> subs;
    for (const char* name : {"solve", "green", "harnack", "smp", "hopf", "paths", "refine",
                             "gallery-list"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config (.toml or .json)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--set", overrides, "dotted-path override key=value")
            ->take_all();
        sub->add_option("--seed", seed_flag, "override run.seed");
        sub->add_option("--threads", threads, "OpenMP thread count (0 = default)");
        sub->add_option("--format", format_flags, "output formats")->take_all();
        subs.push_back(sub);
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::endl;
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "{\"error\":{\"code\":\"UsageError\",\"message\":\"" << e.what()
                  << "\"}}" << std::endl;
        return 2;
    }

    std::string command;
    for (auto* sub : subs)
        if (sub->parsed()) command = sub->get_name();

    auto started = std::chrono::steady_clock::now();
    RunContext ctx;
    try {
        json config;
        if (!config_path.empty()) {
            config = load_config_file(config_path);
        } else if (command == "gallery-list") {
            config = json{{"schema", 1}};
        } else {
            throw ConfigError("--config is required for " + command);
        }
        for (const auto& o : overrides) {
            auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value");
            apply_override(config, o.substr(0, eq), o.substr(eq + 1));
        }
        if (seed_flag >= 0) config["run"]["seed"] = seed_flag;
        ctx.cfg = ExperimentConfig::validate(std::move(config), command);
        if (threads > 0) set_thread_count(threads);

        ctx.out = ctx.cfg.out_dir(out_dir);
        ctx.formats = format_flags.empty() ? ctx.cfg.formats() : format_flags;
        std::filesystem::create_directories(ctx.out);

        ctx.report["schema_version"] = 1;
        ctx.report["command"] = command;
        ctx.report["config"] = ctx.cfg.raw;
        ctx.report["config_hash"] = ctx.cfg.config_hash();
        ctx.report["seed"] = ctx.cfg.seed;
        ctx.report["versions"] = {{"hypolab", HYPOLAB_VERSION},
                                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                std::to_string(EIGEN_MINOR_VERSION)}};
    } catch (const ConfigError& e) {
        std::cerr << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 2;
    }

    int exit_code = 0;
    try {
        if (command == "solve") cmd_solve(ctx);
        else if (command == "green") cmd_green(ctx);
        else if (command == "harnack") cmd_harnack(ctx);
        else if (command == "smp") cmd_smp(ctx);
        else if (command == "hopf") cmd_hopf(ctx);
        else if (command == "paths") cmd_paths(ctx);
        else if (command == "refine") cmd_refine(ctx);
        else if (command == "gallery-list") cmd_gallery_list(ctx);
    } catch (const ConfigError& e) {
        std::cerr << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump()
                  << std::endl;
        return 2;
    } catch (const Error& e) {
        ctx.report["error"] = {{"code", e.code()}, {"message", e.what()}};
        std::cerr << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump()
                  << std::endl;
        exit_code = 3;
    }

    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             started)
                       .count();
    ctx.report["figures"] = ctx.figures;
    ctx.report["timing"] = {{"elapsed_ms", elapsed},
                            {"threads", thread_count()},
                            {"written_at", static_cast<long>(std::time(nullptr))}};
    std::ofstream out(ctx.out / "report.json");
    out << ctx.report.dump(2) << "\n";
    return exit_code;
}

}  // namespace hypolab
