#include "runner/commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "parabolica/amplifier.hpp"
#include "parabolica/conjugacy.hpp"
#include "parabolica/construct.hpp"
#include "parabolica/invariants.hpp"
#include "parabolica/serialize.hpp"
#include "parabolica/surgery.hpp"
#include "runner/csv.hpp"

namespace fs = std::filesystem;

namespace parabolica::runner {

namespace {

constexpr const char* kVersion = "parabolica 0.1.0";

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::string precision = "f64";
    long grid = 0; // 0: per-command default
    long seed = 0;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config: expected a JSON object");
    return cfg;
}

std::size_t get_size(const json& j, const char* key, std::size_t fallback) {
    return j.contains(key) ? j[key].get<std::size_t>() : fallback;
}
long get_long(const json& j, const char* key, long fallback) {
    return j.contains(key) ? j[key].get<long>() : fallback;
}
double get_double(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j[key].get<double>() : fallback;
}
std::string get_string(const json& j, const char* key, const std::string& fallback) {
    return j.contains(key) ? j[key].get<std::string>() : fallback;
}
bool get_bool(const json& j, const char* key, bool fallback) {
    return j.contains(key) ? j[key].get<bool>() : fallback;
}
std::vector<long> get_longs(const json& j, const char* key, std::vector<long> fallback) {
    if (!j.contains(key)) return fallback;
    std::vector<long> out;
    for (const auto& v : j[key]) out.push_back(v.get<long>());
    return out;
}
std::vector<double> get_doubles(const json& j, const char* key, std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    std::vector<double> out;
    for (const auto& v : j[key]) out.push_back(v.get<double>());
    return out;
}
double as_double(const json& v) { return v.get<double>(); }

template <class R>
struct Ctx {
    json cfg;
    fs::path out;
    CliOptions opts;
    fs::path config_dir;

    std::size_t grid_or(std::size_t fallback) const {
        return opts.grid > 0 ? static_cast<std::size_t>(opts.grid) : fallback;
    }

    Diffeo<R> tree(const char* key = "tree") const { return tree_from(cfg, key); }

    Diffeo<R> tree_from(const json& j, const char* key) const {
        std::string file_key = std::string(key) + "_file";
        bool inline_tree = j.contains(key);
        bool file_tree = j.contains(file_key);
        if (inline_tree == file_tree)
            throw ConfigError("config: provide exactly one of '" + std::string(key) + "' or '" +
                              file_key + "'");
        if (inline_tree) return parse_diffeo<R>(j[key], key);
        fs::path p = fs::path(get_string(j, file_key.c_str(), ""));
        if (p.is_relative()) p = config_dir / p;
        return parse_diffeo<R>(load_config(p.string()), key);
    }

    double num(const json& j, const char* key, double fallback) const {
        return get_double(j, key, fallback);
    }
    long integer(const json& j, const char* key, long fallback) const {
        return get_long(j, key, fallback);
    }
};

void write_manifest(const fs::path& out, const std::string& command, const json& cfg,
                    const CliOptions& opts) {
    json manifest;
    manifest["tool"] = kVersion;
    manifest["command"] = command;
    manifest["config"] = cfg;
    manifest["precision"] = opts.precision;
    manifest["grid_flag"] = opts.grid;
    manifest["seed"] = opts.seed;
    std::ofstream f(out / "manifest.json");
    f << manifest.dump(2) << "\n";
}

template <class R>
void write_tree(const fs::path& path, const Diffeo<R>& f) {
    std::ofstream out(path);
    out << serialize(f).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

template <class R>
void cmd_eval(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "grid", "lo", "hi"}, "config");
    auto f = ctx.tree();
    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 128) : ctx.grid_or(128);
    double lo = ctx.num(ctx.cfg, "lo", 0.0);
    double hi = ctx.num(ctx.cfg, "hi", 1.0);
    if (lo < 0.0 || hi > 1.0 || !(lo < hi))
        throw ConfigError("config.lo/hi: evaluation domain must be inside [0,1]");
    auto grid = uniform_grid<R>(R(lo), R(hi), n);
    bool with_d2 = true;
    std::vector<Jet2<R>> jets;
    jets.reserve(grid.size());
    for (const R& x : grid) {
        jets.push_back(f.jet(x));
        with_d2 = with_d2 && jets.back().has_d2;
    }
    std::vector<std::string> cols = {"x", "f", "Df"};
    if (with_d2) cols.push_back("D2f");
    CsvWriter csv(ctx.out / "eval.csv", cols);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        csv.num(dbl(grid[i])).num(dbl(jets[i].v)).num(dbl(jets[i].d1));
        if (with_d2) csv.num(dbl(jets[i].d2));
        csv.end_row();
    }
}

template <class R>
void cmd_fixed_points(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "tol"}, "config");
    auto f = ctx.tree();
    R tol = R(ctx.num(ctx.cfg, "tol", 1e-12));
    auto rep = fixed_points(f, tol);
    CsvWriter csv(ctx.out / "fixed_points.csv", {"location", "type", "Df", "D2f"});
    for (const auto& p : rep.points) {
        const char* type = p.type == Tangency::transversal
                               ? "transversal"
                               : (p.type == Tangency::one_sided ? "one_sided" : "endpoint");
        csv.num(dbl(p.location)).text(type).num(dbl(p.df)).num(p.d2f ? dbl(*p.d2f) : 0.0);
        csv.end_row();
    }
    CsvWriter sum(ctx.out / "summary.csv",
                  {"identity_on_interval", "points", "unresolved", "tolerance", "grid_size",
                   "precision"});
    sum.integer(rep.identity_on_interval ? 1 : 0)
        .integer(static_cast<long>(rep.points.size()))
        .integer(static_cast<long>(rep.unresolved.size()))
        .num(dbl(rep.tolerance))
        .integer(static_cast<long>(rep.grid_size))
        .text(real_traits<R>::name());
    sum.end_row();
    if (!rep.unresolved.empty()) {
        CsvWriter un(ctx.out / "unresolved.csv", {"lo", "hi"});
        for (const auto& seg : rep.unresolved) {
            un.num(dbl(seg.first)).num(dbl(seg.second));
            un.end_row();
        }
    }
}

template <class R>
void cmd_variation(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "lo", "hi", "grid"}, "config");
    auto f = ctx.tree();
    double lo = ctx.num(ctx.cfg, "lo", 0.0);
    double hi = ctx.num(ctx.cfg, "hi", 1.0);
    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 256) : ctx.grid_or(256);
    R v = variation(f, R(lo), R(hi), n);
    CsvWriter csv(ctx.out / "variation.csv", {"lo", "hi", "V", "grid", "precision"});
    csv.num(lo).num(hi).num(dbl(v)).integer(static_cast<long>(n)).text(real_traits<R>::name());
    csv.end_row();
}

template <class R>
void write_series(const fs::path& path, const VariationSeries<R>& series) {
    CsvWriter csv(path, {"n", "V", "V_over_n"});
    for (const auto& row : series.rows) {
        csv.integer(static_cast<long>(dbl(row[0]))).num(dbl(row[1])).num(dbl(row[2]));
        csv.end_row();
    }
}

template <class R>
void cmd_asym_variation(const Ctx<R>& ctx) {
    check_keys(ctx.cfg,
               {"tree", "tree_file", "N", "subdiv", "control", "control_file", "vanish_threshold"},
               "config");
    auto f = ctx.tree();
    long N = ctx.integer(ctx.cfg, "N", 64);
    std::size_t subdiv = static_cast<std::size_t>(ctx.integer(ctx.cfg, "subdiv", 24));
    auto av = asymptotic_variation(f, N, R(0), R(1), R(0.5), subdiv);

    // calibration noise from the matched flow-generated control: explicit
    // control tree, else the base of a surgered/amplified input, else the
    // map itself
    R control_noise = av.tail_inf;
    if (ctx.cfg.contains("control") || ctx.cfg.contains("control_file")) {
        auto control = ctx.tree_from(ctx.cfg, "control");
        control_noise = asymptotic_variation(control, N, R(0), R(1), R(0.5), subdiv).tail_inf;
    } else {
        Diffeo<R> control;
        std::string kind = f.node().kind();
        if (kind == "mather_surgery")
            control = static_cast<const detail::MatherSurgeryNode<R>&>(f.node()).base();
        else if (kind == "amplifier")
            control = static_cast<const detail::AmplifierNode<R>&>(f.node()).base();
        if (control.valid())
            control_noise = asymptotic_variation(control, N, R(0), R(1), R(0.5), subdiv).tail_inf;
    }
    R vanish = R(ctx.num(ctx.cfg, "vanish_threshold", 1e-2));
    auto verdict = variation_verdict(av, control_noise, vanish);

    write_series(ctx.out / "series.csv", av.series);
    CsvWriter sum(ctx.out / "summary.csv", {"N", "est", "last", "tail_slope", "tail_inf",
                                            "control_noise", "verdict", "subdiv", "precision"});
    sum.integer(N)
        .num(dbl(av.est))
        .num(dbl(av.last))
        .num(dbl(av.tail_slope))
        .num(dbl(av.tail_inf))
        .num(dbl(control_noise))
        .text(to_string(verdict))
        .integer(static_cast<long>(subdiv))
        .text(real_traits<R>::name());
    sum.end_row();
}

template <class R>
void cmd_fatou_diagnostics(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "side", "p", "points", "tol", "depth_cap"},
               "config");
    auto f = ctx.tree();
    std::string side_s = get_string(ctx.cfg, "side", "lower");
    if (side_s != "lower" && side_s != "upper")
        throw ConfigError("config.side: expected lower or upper");
    ChartSide side = side_s == "lower" ? ChartSide::lower : ChartSide::upper;
    ChartOptions<R> opt;
    opt.tol = R(ctx.num(ctx.cfg, "tol", dbl(opt.tol)));
    opt.depth_cap = ctx.integer(ctx.cfg, "depth_cap", opt.depth_cap);
    R p = R(ctx.num(ctx.cfg, "p", 0.5));
    FatouChart<R> chart(f, R(0), R(1), side, p, opt);

    std::vector<double> points = get_doubles(ctx.cfg, "points", {0.25, 0.75});

    CsvWriter sum(ctx.out / "summary.csv",
                  {"x", "A", "converged", "depth", "last_delta", "monotone_tail"});
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<ChartDiagRow<R>> rows;
        auto ev = chart.eval(R(points[i]), &rows);
        CsvWriter csv(ctx.out / ("fatou_" + std::to_string(i) + ".csv"),
                      {"n", "estimate", "delta"});
        for (const auto& row : rows) {
            csv.integer(row.depth).num(dbl(row.estimate)).num(dbl(row.delta));
            csv.end_row();
        }
        sum.num(points[i])
            .num(dbl(ev.a))
            .integer(ev.converged ? 1 : 0)
            .integer(ev.depth)
            .num(dbl(ev.last_delta))
            .integer(ev.monotone_tail ? 1 : 0);
        sum.end_row();
        if (!ev.converged)
            throw ConvergenceError("fatou diagnostics: chart did not converge at x = " +
                                   std::to_string(points[i]));
    }
}

template <class R>
void cmd_flow_time(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "side", "t", "p", "grid"}, "config");
    auto f = ctx.tree();
    std::string side_s = get_string(ctx.cfg, "side", "lower");
    ChartSide side = side_s == "lower" ? ChartSide::lower : ChartSide::upper;
    R t = R(ctx.num(ctx.cfg, "t", 0.5));
    R p = R(ctx.num(ctx.cfg, "p", 0.5));
    auto ft = flow_time(f, R(0), R(1), side, p, t);
    write_tree(ctx.out / "tree.json", ft);
    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 128) : ctx.grid_or(128);
    CsvWriter csv(ctx.out / "eval.csv", {"x", "f_t"});
    for (const R& x : uniform_grid<R>(R(0.01), R(0.99), n)) {
        csv.num(dbl(x)).num(dbl(ft(x)));
        csv.end_row();
    }
}

template <class R>
void cmd_root_defect(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "k", "ks", "lo", "hi", "grid"}, "config");
    auto f = ctx.tree();
    std::vector<long> ks = get_longs(ctx.cfg, "ks", {ctx.integer(ctx.cfg, "k", 2)});
    double lo = ctx.num(ctx.cfg, "lo", 0.05), hi = ctx.num(ctx.cfg, "hi", 0.95);
    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 64) : ctx.grid_or(64);
    auto grid = uniform_grid<R>(R(lo), R(hi), n);
    CsvWriter csv(ctx.out / "defects.csv", {"k", "defect", "grid", "precision"});
    for (long k : ks) {
        csv.integer(k)
            .num(dbl(root_defect(f, k, grid)))
            .integer(static_cast<long>(n))
            .text(real_traits<R>::name());
        csv.end_row();
    }
}

template <class R>
void cmd_mather(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "p", "q", "grid", "ks"}, "config");
    auto f = ctx.tree();
    R p = R(ctx.num(ctx.cfg, "p", 0.5));
    R q = R(ctx.num(ctx.cfg, "q", dbl(p)));
    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 256) : ctx.grid_or(256);
    auto M = mather(f, p, q, n);
    CsvWriter csv(ctx.out / "mather.csv", {"t", "M_t"});
    for (std::size_t i = 0; i < M.grid_size(); ++i) {
        csv.num(dbl(M.grid_point(i))).num(dbl(M.values()[i]));
        csv.end_row();
    }
    CsvWriter sum(ctx.out / "defect.csv",
                  {"triviality_defect", "seam_defect", "grid", "precision"});
    sum.num(dbl(M.triviality_defect()))
        .num(dbl(M.seam_defect()))
        .integer(static_cast<long>(n))
        .text(real_traits<R>::name());
    sum.end_row();
    std::vector<long> ks = get_longs(ctx.cfg, "ks", {1, 2, 3});
    CsvWriter com(ctx.out / "commutation.csv", {"k", "defect"});
    for (long k : ks) {
        com.integer(k).num(dbl(M.translation_commutation_defect(k)));
        com.end_row();
    }
}

template <class R>
std::vector<std::pair<SupportedCircleDiffeo<R>, R>> parse_piece_list(const json& arr,
                                                                     const std::string& path) {
    std::vector<std::pair<SupportedCircleDiffeo<R>, R>> list;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        std::string pp = path + "[" + std::to_string(i) + "]";
        check_keys(arr[i], {"alpha", "phi"}, pp);
        list.emplace_back(piece_from_spec(parse_phi<R>(need(arr[i], "phi", pp), pp + ".phi")),
                          real_traits<R>::from_double(as_double(need(arr[i], "alpha", pp))));
    }
    return list;
}

template <class R>
void cmd_surgery(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "p", "pieces", "grid"}, "config");
    auto f = ctx.tree();
    R p = R(ctx.num(ctx.cfg, "p", 0.5));
    auto list = parse_piece_list<R>(need(ctx.cfg, "pieces", "config"), "config.pieces");
    auto g = multi_surgery(f, list, p);
    write_tree(ctx.out / "tree.json", g);

    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 256) : ctx.grid_or(256);
    auto Mf = mather(f, p, p, n);
    auto Mg = mather(g, p, p, n);
    CsvWriter sum(ctx.out / "summary.csv",
                  {"defect_before", "defect_after", "pieces", "grid", "precision"});
    sum.num(dbl(Mf.triviality_defect()))
        .num(dbl(Mg.triviality_defect()))
        .integer(static_cast<long>(list.size()))
        .integer(static_cast<long>(n))
        .text(real_traits<R>::name());
    sum.end_row();

    const auto& node = static_cast<const detail::MatherSurgeryNode<R>&>(g.node());
    CsvWriter placed(ctx.out / "placements.csv", {"i", "alpha", "x_lo", "x_hi"});
    for (std::size_t i = 0; i < node.pieces().size(); ++i) {
        const auto& piece = node.pieces()[i];
        placed.integer(static_cast<long>(i))
            .num(dbl(piece.alpha))
            .num(dbl(piece.x_lo))
            .num(dbl(piece.x_hi));
        placed.end_row();
    }
}

template <class R>
void cmd_trivialize(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "p", "eps_target", "grid", "two_piece"}, "config");
    auto f = ctx.tree();
    R p = R(ctx.num(ctx.cfg, "p", 0.5));
    R eps = R(ctx.num(ctx.cfg, "eps_target", 0.1));
    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 256) : ctx.grid_or(256);
    bool two_piece = get_bool(ctx.cfg, "two_piece", false);
    auto rep = trivialize_mather(f, p, eps, n, two_piece);
    write_tree(ctx.out / "tree.json", rep.result);
    double c0 = 0;
    for (const R& x : uniform_grid<R>(R(0.01), R(0.99), 200))
        c0 = std::max(c0, std::fabs(dbl(rep.result(x)) - dbl(f(x))));
    CsvWriter sum(ctx.out / "summary.csv", {"defect_before", "defect_after", "beta", "pieces",
                                            "eps_target", "c0_distance", "precision"});
    sum.num(dbl(rep.defect_before))
        .num(dbl(rep.defect_after))
        .num(dbl(rep.beta))
        .integer(static_cast<long>(rep.pieces))
        .num(dbl(eps))
        .num(c0)
        .text(real_traits<R>::name());
    sum.end_row();
}

template <class R>
void cmd_fragment(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"phi", "eps_target", "two_piece", "grid"}, "config");
    auto piece = piece_from_spec(parse_phi<R>(need(ctx.cfg, "phi", "config"), "config.phi"));
    R eps = R(ctx.num(ctx.cfg, "eps_target", 0.1));
    bool two_piece = get_bool(ctx.cfg, "two_piece", false);
    auto pieces = fragment(piece.lift, eps, two_piece);

    json out_pieces = json::array();
    double max_size = 0;
    for (const auto& frag : pieces) {
        out_pieces.push_back(serialize_phi(frag.spec));
        max_size = std::max(max_size, dbl(frag.c1_size));
    }
    std::ofstream pj(ctx.out / "pieces.json");
    pj << out_pieces.dump(2) << "\n";

    std::size_t n = ctx.cfg.contains("grid") ? get_size(ctx.cfg, "grid", 512) : ctx.grid_or(512);
    double recomposition = 0;
    for (std::size_t i = 0; i < n; ++i) {
        R t = R(static_cast<long>(i)) / R(static_cast<long>(n));
        R y = t;
        for (const auto& frag : pieces) y = frag.lift(y);
        recomposition = std::max(recomposition, std::fabs(dbl(y) - dbl(piece.lift(t))));
    }
    CsvWriter sum(ctx.out / "summary.csv",
                  {"pieces", "max_c1_size", "recomposition_error", "eps_target"});
    sum.integer(static_cast<long>(pieces.size())).num(max_size).num(recomposition).num(dbl(eps));
    sum.end_row();
}

template <class R>
AmplifierSpec<R> parse_amplifier_spec(const json& s, const std::string& path) {
    check_keys(s, {"delta", "j1", "j2", "mu1", "mu2", "dh_p2", "dh_p4", "eps", "depth"}, path);
    auto real = [](const json& v) { return real_traits<R>::from_double(as_double(v)); };
    AmplifierSpec<R> spec;
    spec.delta_lo = real(need(s, "delta", path)[0]);
    spec.delta_hi = real(s["delta"][1]);
    spec.j1_lo = real(need(s, "j1", path)[0]);
    spec.j1_hi = real(s["j1"][1]);
    spec.j2_lo = real(need(s, "j2", path)[0]);
    spec.j2_hi = real(s["j2"][1]);
    spec.mu1 = real(need(s, "mu1", path));
    spec.mu2 = real(need(s, "mu2", path));
    spec.dh_p2 = real(need(s, "dh_p2", path));
    spec.dh_p4 = real(need(s, "dh_p4", path));
    spec.eps = real(need(s, "eps", path));
    spec.depth = get_long(s, "depth", spec.depth);
    return spec;
}

template <class R>
void cmd_amplifier(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "spec", "depths", "x1", "x2"}, "config");
    auto f = ctx.tree();
    auto spec = parse_amplifier_spec<R>(need(ctx.cfg, "spec", "config"), "config.spec");
    auto build = make_amplifier(f, spec);
    R x1 = R(ctx.num(ctx.cfg, "x1", dbl((spec.j1_lo + spec.j1_hi) / R(2))));
    R x2 = R(ctx.num(ctx.cfg, "x2", dbl((spec.j2_lo + spec.j2_hi) / R(2))));

    std::vector<long> depths = get_longs(ctx.cfg, "depths", {0, 5, 10, 20, 40});
    double log_ratio = std::log(dbl(spec.mu2) / dbl(spec.mu1));
    double log_c = std::log(dbl(build.distortion_constant));

    CsvWriter csv(ctx.out / "gaps.csv", {"n", "gap", "floor_bound"});
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (long n : depths) {
        auto fn = distortion_amplifier(f, build, n);
        double gap = dbl(distortion_gap(fn, n + build.spec.m, x1, x2));
        csv.integer(n).num(gap).num(n * log_ratio - 2 * log_c);
        csv.end_row();
        sx += n;
        sy += gap;
        sxx += double(n) * n;
        sxy += n * gap;
        cnt += 1;
    }
    double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    CsvWriter sum(ctx.out / "summary.csv", {"m", "C", "sup_log_dh", "variation_U", "slope",
                                            "expected_slope", "precision"});
    sum.integer(build.spec.m)
        .num(dbl(build.distortion_constant))
        .num(dbl(build.sup_log_dh))
        .num(dbl(build.variation_U))
        .num(slope)
        .num(std::log(dbl(build.spec.dh_p4) / dbl(build.spec.dh_p2)))
        .text(real_traits<R>::name());
    sum.end_row();
}

template <class R>
void conjugate_power_report(const Ctx<R>& ctx, const json& cfg) {
    auto f = ctx.tree_from(cfg, "tree");
    long k = get_long(cfg, "k", 2);
    R p = R(get_double(cfg, "p", 0.5));
    double guard = get_double(cfg, "guard", 0.05);
    std::size_t n = cfg.contains("grid") ? get_size(cfg, "grid", 128) : ctx.grid_or(128);

    auto h = conjugacy_from_flows(f, k, p);
    auto fk = int_power(f, k);
    double residual = 0;
    for (const R& x : uniform_grid<R>(R(guard), R(1.0 - guard), n))
        residual = std::max(residual, std::fabs(dbl(h(f(h.inverse(x)))) - dbl(fk(x))));
    double multiplier = dbl(h.deriv(p));
    write_tree(ctx.out / "conjugacy.json", h);
    CsvWriter sum(ctx.out / "summary.csv",
                  {"k", "residual", "multiplier", "multiplier_error", "guard", "grid",
                   "precision"});
    sum.integer(k)
        .num(residual)
        .num(multiplier)
        .num(std::fabs(multiplier - double(k)))
        .num(guard)
        .integer(static_cast<long>(n))
        .text(real_traits<R>::name());
    sum.end_row();
}

template <class R>
void cmd_conjugate_power(const Ctx<R>& ctx) {
    check_keys(ctx.cfg, {"tree", "tree_file", "k", "p", "guard", "grid"}, "config");
    conjugate_power_report(ctx, ctx.cfg);
}

// --------------------------- experiments ----------------------------------

template <class R>
void experiment_surgery_law(const Ctx<R>& ctx, const json& cfg) {
    check_keys(cfg, {"name", "tree", "tree_file", "amplitudes", "width", "center", "p", "grid"},
               "config");
    auto f = ctx.tree_from(cfg, "tree");
    R p = R(get_double(cfg, "p", 0.5));
    std::size_t n = cfg.contains("grid") ? get_size(cfg, "grid", 128) : ctx.grid_or(128);
    double width = get_double(cfg, "width", 0.45);
    double center = get_double(cfg, "center", 0.5);
    std::vector<double> amplitudes = get_doubles(cfg, "amplitudes", {0.05, 0.1, 0.2});

    auto Mf = mather(f, p, p, n);
    auto B = chart_for(f, R(0), R(1), ChartSide::upper, p);
    CsvWriter csv(ctx.out / "law.csv", {"amplitude", "tau", "aligned_distance"});
    for (double amp : amplitudes) {
        auto piece = bump_piece(R(amp), R(center), R(width));
        R alpha = snap_alpha(piece, R(-1));
        auto g = mather_surgery(f, piece, alpha, p);
        auto Mg = mather(g, p, p, n);
        R q = B->inverse(alpha);
        R tau = surgery_shift(f, g, q, p);
        auto predicted = [&](R t) { return piece.lift(Mf.lift()(t)); };
        auto got = [&](R t) { return Mg.lift()(t); };
        R dist = aligned_sup_distance<R>(got, predicted, n, tau);
        csv.num(amp).num(dbl(tau)).num(dbl(dist));
        csv.end_row();
    }
}

template <class R>
void experiment_theorem_a(const Ctx<R>& ctx, const json& cfg) {
    check_keys(cfg,
               {"name", "tree", "tree_file", "eps_germ", "smooth_degree", "smooth_eps",
                "eps_target", "k", "grid", "guard", "flowable_tol"},
               "config");
    auto f0 = ctx.tree_from(cfg, "tree");
    R eps_germ = R(get_double(cfg, "eps_germ", 0.05));
    long degree = get_long(cfg, "smooth_degree", 0);
    R smooth_eps = R(get_double(cfg, "smooth_eps", 0.08));
    R eps_target = R(get_double(cfg, "eps_target", 0.15));
    long k = get_long(cfg, "k", 2);
    std::size_t n = cfg.contains("grid") ? get_size(cfg, "grid", 128) : ctx.grid_or(128);
    double guard = get_double(cfg, "guard", 0.05);
    double flowable_tol = get_double(cfg, "flowable_tol", 1e-3);

    auto grid = uniform_grid<R>(R(0.01), R(0.99), 200);
    CsvWriter stages(ctx.out / "stages.csv", {"stage", "c1_distance_to_input", "mather_defect"});
    auto log_stage = [&](const char* name, const Diffeo<R>& g) {
        R d = c1_distance(f0, g, grid);
        R defect = mather(g, R(0.5), R(0.5), n).triviality_defect();
        stages.text(name).num(dbl(d)).num(dbl(defect));
        stages.end_row();
        return defect;
    };

    // germ replacement at every fixed point (C1 menu, C2-smooth seams)
    Diffeo<R> f1 = germ_replace(f0, eps_germ, GermReplaceMode::c1, BumpOrder::C2);
    log_stage("germ_replace", f1);

    Diffeo<R> f2 = f1;
    if (degree > 0) {
        f2 = bernstein_smooth(f1, smooth_eps, static_cast<std::size_t>(degree), BumpOrder::C2);
        log_stage("bernstein_smooth", f2);
    }

    auto triv = trivialize_mather(f2, R(0.5), eps_target, n);
    log_stage("trivialize", triv.result);
    write_tree(ctx.out / "tree.json", triv.result);

    auto h = conjugacy_from_flows(triv.result, k, R(0.5), R(flowable_tol));
    auto fk = int_power(triv.result, k);
    double residual = 0;
    for (const R& x : uniform_grid<R>(R(guard), R(1.0 - guard), n))
        residual = std::max(residual, std::fabs(dbl(h(triv.result(h.inverse(x)))) - dbl(fk(x))));
    CsvWriter sum(ctx.out / "residual.csv", {"k", "residual", "multiplier", "defect_after"});
    sum.integer(k).num(residual).num(dbl(h.deriv(R(0.5)))).num(dbl(triv.defect_after));
    sum.end_row();
}

template <class R>
void experiment_theorem_d(const Ctx<R>& ctx, const json& cfg) {
    check_keys(cfg,
               {"name", "tree", "tree_file", "eps_germ", "eps_target", "ks", "grid", "guard",
                "flowable_tol"},
               "config");
    auto f0 = ctx.tree_from(cfg, "tree");
    R eps_germ = R(get_double(cfg, "eps_germ", 0.05));
    R eps_target = R(get_double(cfg, "eps_target", 0.3));
    std::size_t n = cfg.contains("grid") ? get_size(cfg, "grid", 128) : ctx.grid_or(128);
    double guard = get_double(cfg, "guard", 0.05);
    double flowable_tol = get_double(cfg, "flowable_tol", 1e-3);
    std::vector<long> ks = get_longs(cfg, "ks", {2, 3});

    // second-order germ menu with the C2 bump bounds, then the two-piece
    // fragmentation of the Mather inverse
    Diffeo<R> f2 = germ_replace(f0, eps_germ, GermReplaceMode::c2, BumpOrder::C2);
    auto triv = trivialize_mather(f2, R(0.5), eps_target, n, /*two_piece=*/true);
    write_tree(ctx.out / "tree.json", triv.result);

    auto grid200 = uniform_grid<R>(R(0.01), R(0.99), 200);
    CsvWriter stages(ctx.out / "stages.csv",
                     {"stage", "c1_distance_to_input", "mather_defect"});
    stages.text("germ_replace")
        .num(dbl(c1_distance(f0, f2, grid200)))
        .num(dbl(triv.defect_before));
    stages.end_row();
    stages.text("trivialize")
        .num(dbl(c1_distance(f0, triv.result, grid200)))
        .num(dbl(triv.defect_after));
    stages.end_row();

    CsvWriter sum(ctx.out / "residual.csv", {"k", "residual", "multiplier"});
    for (long k : ks) {
        auto h = conjugacy_from_flows(triv.result, k, R(0.5), R(flowable_tol));
        auto fk = int_power(triv.result, k);
        double residual = 0;
        for (const R& x : uniform_grid<R>(R(guard), R(1.0 - guard), n))
            residual =
                std::max(residual, std::fabs(dbl(h(triv.result(h.inverse(x)))) - dbl(fk(x))));
        sum.integer(k).num(residual).num(dbl(h.deriv(R(0.5))));
        sum.end_row();
    }
}

template <class R>
void cmd_experiment(const Ctx<R>& ctx) {
    std::string name = get_string(ctx.cfg, "name", "");
    if (name.empty()) throw ConfigError("config.name: missing field");
    if (name == "conjugate-power") {
        check_keys(ctx.cfg, {"name", "tree", "tree_file", "k", "p", "guard", "grid"}, "config");
        conjugate_power_report(ctx, ctx.cfg);
    } else if (name == "surgery-law") {
        experiment_surgery_law(ctx, ctx.cfg);
    } else if (name == "amplifier") {
        json sub = ctx.cfg;
        sub.erase("name");
        Ctx<R> inner{sub, ctx.out, ctx.opts, ctx.config_dir};
        cmd_amplifier(inner);
    } else if (name == "theoremA-pipeline") {
        experiment_theorem_a(ctx, ctx.cfg);
    } else if (name == "theoremD-pipeline") {
        experiment_theorem_d(ctx, ctx.cfg);
    } else {
        throw ConfigError("config.name: unknown experiment '" + name + "'");
    }
}

template <class R>
int dispatch(const std::string& command, const CliOptions& opts) {
    Ctx<R> ctx;
    ctx.cfg = load_config(opts.config_path);
    ctx.opts = opts;
    ctx.out = fs::path(opts.out_dir);
    ctx.config_dir = fs::path(opts.config_path).parent_path();
    fs::create_directories(ctx.out);
    write_manifest(ctx.out, command, ctx.cfg, opts);

    static const std::map<std::string, std::function<void(const Ctx<R>&)>> table = {
        {"eval", cmd_eval<R>},
        {"fixed-points", cmd_fixed_points<R>},
        {"variation", cmd_variation<R>},
        {"asym-variation", cmd_asym_variation<R>},
        {"fatou-diagnostics", cmd_fatou_diagnostics<R>},
        {"flow-time", cmd_flow_time<R>},
        {"root-defect", cmd_root_defect<R>},
        {"mather", cmd_mather<R>},
        {"surgery", cmd_surgery<R>},
        {"trivialize", cmd_trivialize<R>},
        {"fragment", cmd_fragment<R>},
        {"amplifier", cmd_amplifier<R>},
        {"conjugate-power", cmd_conjugate_power<R>},
        {"experiment", cmd_experiment<R>},
    };
    auto it = table.find(command);
    if (it == table.end()) throw ConfigError("unknown command: " + command);
    it->second(ctx);
    return 0;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"numerical machinery for interval diffeomorphisms with parabolic fixed points"};
    app.set_version_flag("--version", kVersion);

    CliOptions opts;
    std::string command;
    app.add_option("command", command, "one of: eval, fixed-points, variation, asym-variation, "
                                       "fatou-diagnostics, flow-time, root-defect, mather, "
                                       "surgery, trivialize, fragment, amplifier, "
                                       "conjugate-power, experiment")
        ->required();
    app.add_option("--config", opts.config_path, "JSON config file")->required();
    app.add_option("--out", opts.out_dir, "output directory");
    app.add_option("--precision", opts.precision, "f64 or bits:N");
    app.add_option("--grid", opts.grid, "default grid size override");
    app.add_option("--seed", opts.seed, "seed for randomized profiles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (opts.precision == "f64") {
            return dispatch<double>(command, opts);
        }
        if (opts.precision.rfind("bits:", 0) == 0) {
            long bits = std::strtol(opts.precision.c_str() + 5, nullptr, 10);
            if (bits < 24 || bits > 16384)
                throw ConfigError("--precision bits:N requires 24 <= N <= 16384");
            BigFloat::set_default_precision(bits);
            return dispatch<BigFloat>(command, opts);
        }
        throw ConfigError("--precision: expected f64 or bits:N");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ConvergenceError& e) {
        std::fprintf(stderr, "numeric non-convergence: %s\n", e.what());
        return 3;
    } catch (const InvalidTreeError& e) {
        std::fprintf(stderr, "invalid tree: %s\n", e.what());
        return 4;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "invalid tree/domain: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

} // namespace parabolica::runner
