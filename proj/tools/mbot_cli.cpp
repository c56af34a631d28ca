// mbot command line: loss estimates, lifted plans, particle flows, color
// transfer, and the statistical experiment battery, all emitting CSV with
// seed-reproducible, worker-count-independent bytes.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <mbot/mbot.hpp>

using nlohmann::json;

namespace {

std::uint64_t parse_u64_token(const std::string& tok, const char* what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw mbot::ValidationError(std::string("bad ") + what + ": '" + tok + "'");
    return v;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& s, const char* what) {
    std::vector<std::uint64_t> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t pos = s.find(',', start);
        if (pos == std::string::npos) pos = s.size();
        std::string tok = s.substr(start, pos - start);
        const std::size_t b = tok.find_first_not_of(" \t");
        const std::size_t e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) throw mbot::ValidationError(std::string("empty ") + what);
        out.push_back(parse_u64_token(tok.substr(b, e - b + 1), what));
        start = pos + 1;
    }
    if (out.empty()) throw mbot::ValidationError(std::string("empty ") + what);
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    for (std::uint64_t v : parse_u64_list(s, what)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

std::uint64_t default_seed() {
    const char* env = std::getenv("MBOT_SEED");
    if (!env || !*env) return 42;
    return parse_u64_token(env, "MBOT_SEED");
}

mbot::Law parse_law(const std::string& s) {
    if (s == "without") return mbot::Law::WithoutReplacement;
    if (s == "with") return mbot::Law::WithReplacement;
    throw mbot::ValidationError("law must be 'without' or 'with', got '" + s + "'");
}

mbot::Reweight parse_reweight(const std::string& s) {
    if (s == "uniform") return mbot::Reweight::Uniform;
    if (s == "normalized") return mbot::Reweight::Normalized;
    throw mbot::ValidationError("reweight must be 'uniform' or 'normalized', got '" + s + "'");
}

void resolve_kernel(const std::string& token, double p_flag, mbot::MinibatchSpec& s) {
    if (token == "w1") {
        s.kernel = mbot::Kernel::Wasserstein;
        s.p = 1.0;
    } else if (token == "w2") {
        s.kernel = mbot::Kernel::Wasserstein;
        s.p = 2.0;
    } else if (token == "w2sq") {
        s.kernel = mbot::Kernel::WassersteinPow;
        s.p = 2.0;
    } else if (token == "wp") {
        s.kernel = mbot::Kernel::Wasserstein;
        s.p = p_flag;
    } else if (token == "wp_pow") {
        s.kernel = mbot::Kernel::WassersteinPow;
        s.p = p_flag;
    } else if (token == "entropic") {
        s.kernel = mbot::Kernel::Entropic;
        s.p = p_flag;
    } else if (token == "sinkhorn") {
        s.kernel = mbot::Kernel::SinkhornDiv;
        s.p = p_flag;
    } else if (token == "gw") {
        s.kernel = mbot::Kernel::GromovWasserstein;
        s.p = p_flag;
    } else {
        throw mbot::ValidationError(
            "kernel must be one of w1|w2|w2sq|wp|wp_pow|entropic|sinkhorn|gw, got '" + token +
            "'");
    }
}

// config precedence: explicit flag > config file > built-in default
template <class T>
void ov(const json& cfg, const char* key, const CLI::Option* opt, T& var) {
    if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
}

void ov_list(const json& cfg, const char* key, const CLI::Option* opt, std::string& var) {
    if (opt->count() > 0 || !cfg.contains(key)) return;
    const json& v = cfg.at(key);
    if (v.is_string()) {
        var = v.get<std::string>();
        return;
    }
    if (!v.is_array())
        throw mbot::ValidationError(std::string("config key '") + key +
                                    "' must be a string or an array");
    std::string joined;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) joined += ',';
        joined += v[i].dump();
    }
    var = joined;
}

// Flags shared by every command that evaluates a minibatch loss.
struct SpecFlags {
    std::string kernel = "w2sq", law = "without", reweight = "uniform";
    std::uint64_t m = 64, k = 100, seed = 42;
    double p = 2.0, eps = 0.05;
    unsigned workers = 1;
    CLI::Option *o_kernel{}, *o_law{}, *o_rw{}, *o_m{}, *o_k{}, *o_p{}, *o_eps{}, *o_seed{},
        *o_workers{};

    void attach(CLI::App* sub) {
        seed = default_seed();
        o_kernel = sub->add_option("--kernel", kernel,
                                   "kernel: w1|w2|w2sq|wp|wp_pow|entropic|sinkhorn|gw");
        o_law = sub->add_option("--law", law, "batch index law: without|with");
        o_rw = sub->add_option("--reweight", reweight, "batch reweighting: uniform|normalized");
        o_m = sub->add_option("-m,--m", m, "batch size");
        o_k = sub->add_option("-k,--k", k, "number of batch pairs");
        o_p = sub->add_option("--p", p, "ground cost exponent (wp, wp_pow, entropic, sinkhorn, gw)");
        o_eps = sub->add_option("--eps", eps, "entropic regularization strength");
        o_seed = sub->add_option("--seed", seed, "rng seed (default: MBOT_SEED env or 42)");
        o_workers = sub->add_option("--workers", workers, "worker threads, 0 = all cores");
    }

    void apply_config(const json& cfg) {
        ov(cfg, "kernel", o_kernel, kernel);
        ov(cfg, "law", o_law, law);
        ov(cfg, "reweight", o_rw, reweight);
        ov(cfg, "m", o_m, m);
        ov(cfg, "k", o_k, k);
        ov(cfg, "p", o_p, p);
        ov(cfg, "eps", o_eps, eps);
        ov(cfg, "seed", o_seed, seed);
        ov(cfg, "workers", o_workers, workers);
    }

    mbot::MinibatchSpec spec() const {
        mbot::MinibatchSpec s;
        resolve_kernel(kernel, p, s);
        s.eps = eps;
        s.law = parse_law(law);
        s.reweight = parse_reweight(reweight);
        s.m = static_cast<std::size_t>(m);
        s.k = k;
        s.seed = seed;
        return s;
    }
};

mbot::CsvWriter make_writer(const std::string& out) {
    if (out == "-") return mbot::CsvWriter(std::cout);
    return mbot::CsvWriter(out);
}

using mbot::fmt_num;

// ---- estimate ------------------------------------------------------------------

struct EstimateCmd {
    SpecFlags flags;
    std::string source, target, out = "-", estimator = "incomplete";
    bool debias = false;
    CLI::Option *o_est{}, *o_debias{};

    void attach(CLI::App* sub) {
        sub->add_option("--source", source, "source point cloud csv")->required();
        sub->add_option("--target", target, "target point cloud csv")->required();
        sub->add_option("-o,--out", out, "output csv path, '-' for stdout");
        o_est = sub->add_option("--estimator", estimator, "complete|incomplete");
        o_debias = sub->add_flag("--debias", debias, "subtract the two self losses");
        flags.attach(sub);
    }

    void run(const json& cfg) {
        flags.apply_config(cfg);
        ov(cfg, "estimator", o_est, estimator);
        ov(cfg, "debias", o_debias, debias);
        mbot::Vec a, b;
        const mbot::PointCloud X = mbot::load_cloud_csv(source, a);
        const mbot::PointCloud Y = mbot::load_cloud_csv(target, b);
        const mbot::MinibatchSpec s = flags.spec();
        double value = 0.0, se = 0.0;
        std::uint64_t batches = 0;
        if (estimator == "complete") {
            value = debias
                        ? mbot::debiased_loss(s, a, b, X, Y, mbot::Estimator::Complete,
                                              flags.workers)
                        : mbot::complete_loss(s, a, b, X, Y, flags.workers);
            batches = static_cast<std::uint64_t>(
                mbot::canonical_batch_count(s.law, X.n, s.m) *
                mbot::canonical_batch_count(s.law, Y.n, s.m));
        } else if (estimator == "incomplete") {
            if (debias) {
                value = mbot::debiased_loss(s, a, b, X, Y, mbot::Estimator::Incomplete,
                                            flags.workers);
                batches = s.k;
            } else {
                const mbot::EstimatorStats st =
                    mbot::incomplete_loss_stats(s, a, b, X, Y, flags.workers);
                value = st.mean;
                se = st.std_error;
                batches = st.batches;
            }
        } else {
            throw mbot::ValidationError("estimator must be 'complete' or 'incomplete'");
        }
        mbot::CsvWriter w = make_writer(out);
        w.row({"kernel", "law", "reweight", "estimator", "debias", "m", "k", "p", "eps", "seed",
               "value", "std_error", "batches"});
        w.row({flags.kernel, flags.law, flags.reweight, estimator, debias ? "1" : "0",
               fmt_num(flags.m), fmt_num(flags.k), fmt_num(s.p), fmt_num(s.eps),
               fmt_num(flags.seed), fmt_num(value), fmt_num(se), fmt_num(batches)});
        w.close();
    }
};

// ---- plan ----------------------------------------------------------------------

struct PlanCmd {
    SpecFlags flags;
    std::string source, target, out = "-", audit_out, mode = "incomplete";
    CLI::Option* o_mode{};

    void attach(CLI::App* sub) {
        sub->add_option("--source", source, "source point cloud csv")->required();
        sub->add_option("--target", target, "target point cloud csv")->required();
        sub->add_option("-o,--out", out, "plan csv path (i,j,mass), '-' for stdout");
        sub->add_option("--audit-out", audit_out, "optional marginal/sparsity audit csv");
        o_mode = sub->add_option("--mode", mode, "averaged (enumerated) | incomplete");
        flags.attach(sub);
    }

    void run(const json& cfg) {
        flags.apply_config(cfg);
        ov(cfg, "mode", o_mode, mode);
        mbot::Vec a, b;
        const mbot::PointCloud X = mbot::load_cloud_csv(source, a);
        const mbot::PointCloud Y = mbot::load_cloud_csv(target, b);
        const mbot::MinibatchSpec s = flags.spec();
        mbot::LiftedPlan plan;
        if (mode == "averaged")
            plan = mbot::averaged_plan(s, a, b, X, Y);
        else if (mode == "incomplete")
            plan = mbot::incomplete_plan(s, a, b, X, Y, flags.workers);
        else
            throw mbot::ValidationError("mode must be 'averaged' or 'incomplete'");
        mbot::CsvWriter w = make_writer(out);
        w.row({"i", "j", "mass"});
        for (const mbot::PlanEntry& e : plan.entries)
            w.row({fmt_num(std::uint64_t(e.i)), fmt_num(std::uint64_t(e.j)), fmt_num(e.mass)});
        w.close();
        if (!audit_out.empty()) {
            const mbot::MarginalErrorReport me = mbot::marginal_error(plan, a, b);
            const mbot::SparsityReport sp = mbot::sparsity_audit(plan, s.m, plan.batch_count);
            mbot::CsvWriter aw(audit_out);
            aw.row({"n_rows", "n_cols", "batch_count", "total_mass", "nnz", "nnz_bound",
                    "share", "row_l1", "col_l1", "max_row_dev"});
            aw.row({fmt_num(plan.n_rows), fmt_num(plan.n_cols), fmt_num(plan.batch_count),
                    fmt_num(plan.total_mass()), fmt_num(sp.nnz), fmt_num(sp.bound),
                    fmt_num(sp.share), fmt_num(me.row_l1), fmt_num(me.col_l1),
                    fmt_num(me.max_row_dev)});
            aw.close();
        }
    }
};

// ---- flow ----------------------------------------------------------------------

struct FlowCmd {
    SpecFlags flags;
    std::string source, target, out = "-", snapshots_out, final_out, loss_kind = "raw";
    double eta = 0.05;
    std::uint64_t iterations = 100, stride = 0;
    CLI::Option *o_eta{}, *o_iters{}, *o_stride{}, *o_loss{};

    void attach(CLI::App* sub) {
        sub->add_option("--source", source, "moving point cloud csv")->required();
        sub->add_option("--target", target, "fixed target cloud csv")->required();
        sub->add_option("-o,--out", out, "loss trace csv (step,loss), '-' for stdout");
        sub->add_option("--snapshots-out", snapshots_out, "optional snapshot csv");
        sub->add_option("--final-out", final_out, "optional final cloud csv");
        o_eta = sub->add_option("--eta", eta, "step size");
        o_iters = sub->add_option("--iterations", iterations, "descent steps");
        o_stride = sub->add_option("--snapshot-stride", stride, "0: first and last only");
        o_loss = sub->add_option("--flow-loss", loss_kind, "raw|debiased");
        flags.attach(sub);
    }

    void run(const json& cfg) {
        flags.apply_config(cfg);
        ov(cfg, "eta", o_eta, eta);
        ov(cfg, "iterations", o_iters, iterations);
        ov(cfg, "snapshot_stride", o_stride, stride);
        ov(cfg, "flow_loss", o_loss, loss_kind);
        const mbot::PointCloud X0 = mbot::load_cloud_csv(source);
        const mbot::PointCloud T = mbot::load_cloud_csv(target);
        mbot::FlowConfig fc;
        fc.spec = flags.spec();
        fc.eta = eta;
        fc.iterations = static_cast<std::size_t>(iterations);
        fc.snapshot_stride = static_cast<std::size_t>(stride);
        fc.workers = flags.workers;
        if (loss_kind == "raw")
            fc.loss = mbot::FlowLoss::Raw;
        else if (loss_kind == "debiased")
            fc.loss = mbot::FlowLoss::Debiased;
        else
            throw mbot::ValidationError("flow-loss must be 'raw' or 'debiased'");
        const mbot::FlowResult res = mbot::gradient_flow(X0, T, fc);
        mbot::CsvWriter w = make_writer(out);
        w.row({"step", "loss"});
        for (std::size_t t = 0; t < res.loss_trace.size(); ++t)
            w.row({fmt_num(std::uint64_t(t)), fmt_num(res.loss_trace[t])});
        w.close();
        if (!snapshots_out.empty()) {
            mbot::CsvWriter sw(snapshots_out);
            std::vector<std::string> head = {"snapshot", "step", "point"};
            for (std::size_t c = 0; c < X0.d; ++c) head.push_back("x" + std::to_string(c));
            sw.row(head);
            for (std::size_t si = 0; si < res.snapshots.size(); ++si)
                for (std::size_t i = 0; i < res.snapshots[si].n; ++i) {
                    std::vector<std::string> cells = {fmt_num(std::uint64_t(si)),
                                                      fmt_num(std::uint64_t(res.snapshot_steps[si])),
                                                      fmt_num(std::uint64_t(i))};
                    for (std::size_t c = 0; c < X0.d; ++c)
                        cells.push_back(fmt_num(res.snapshots[si].coords[i * X0.d + c]));
                    sw.row(cells);
                }
            sw.close();
        }
        if (!final_out.empty()) mbot::save_cloud_csv(final_out, res.snapshots.back());
    }
};

// ---- color ---------------------------------------------------------------------

struct ColorCmd {
    SpecFlags flags;
    std::string source, target, out, stats_out;

    void attach(CLI::App* sub) {
        sub->add_option("--source", source, "image to recolor (png or ppm)")->required();
        sub->add_option("--target", target, "palette image (png or ppm)")->required();
        sub->add_option("-o,--out", out, "output image path (.png or .ppm)")->required();
        sub->add_option("--stats-out", stats_out, "optional coverage/diversity csv");
        flags.attach(sub);
    }

    void run(const json& cfg) {
        flags.apply_config(cfg);
        if (flags.o_kernel->count() > 0 && flags.kernel != "w2sq")
            throw mbot::ValidationError("color transfer supports only the w2sq kernel");
        flags.kernel = "w2sq";
        const mbot::ImageCloud src = mbot::load_image(source);
        const mbot::ImageCloud pal = mbot::load_image(target);
        const mbot::MinibatchSpec s = flags.spec();
        const mbot::TransferResult res = mbot::color_transfer(src, pal, s, flags.workers);
        mbot::save_image(out, res.output);
        if (!stats_out.empty()) {
            mbot::CsvWriter w(stats_out);
            w.row({"width", "height", "m", "k", "seed", "coverage", "visited",
                   "source_diversity", "palette_diversity", "output_diversity"});
            w.row({fmt_num(src.width), fmt_num(src.height), fmt_num(flags.m), fmt_num(flags.k),
                   fmt_num(flags.seed), fmt_num(res.coverage), fmt_num(res.visited),
                   fmt_num(mbot::palette_diversity(src)), fmt_num(mbot::palette_diversity(pal)),
                   fmt_num(mbot::palette_diversity(res.output))});
            w.close();
        }
    }
};

// ---- experiments -----------------------------------------------------------------

std::string join_path(const std::string& dir, const char* file) {
    if (dir.empty() || dir == ".") return file;
    return dir.back() == '/' ? dir + file : dir + "/" + file;
}

struct MarginalsExp {
    std::uint64_t n = 1000, reps = 500, seed = 42;
    std::string m_grid = "10,100", k_grid = "10,100,1000,10000", law = "without", out_dir = ".";
    double delta = 0.05;
    CLI::Option *o_n{}, *o_m{}, *o_k{}, *o_reps{}, *o_delta{}, *o_law{}, *o_seed{};

    void attach(CLI::App* sub) {
        seed = default_seed();
        o_n = sub->add_option("--n", n, "support size");
        o_m = sub->add_option("--m-grid", m_grid, "comma list of batch sizes");
        o_k = sub->add_option("--k-grid", k_grid, "comma list of batch counts");
        o_reps = sub->add_option("--reps", reps, "repetitions per cell");
        o_delta = sub->add_option("--delta", delta, "confidence parameter");
        o_law = sub->add_option("--law", law, "without|with");
        o_seed = sub->add_option("--seed", seed, "rng seed");
        sub->add_option("--out-dir", out_dir, "output directory");
    }

    void run(const json& cfg) {
        ov(cfg, "n", o_n, n);
        ov_list(cfg, "m_grid", o_m, m_grid);
        ov_list(cfg, "k_grid", o_k, k_grid);
        ov(cfg, "reps", o_reps, reps);
        ov(cfg, "delta", o_delta, delta);
        ov(cfg, "law", o_law, law);
        ov(cfg, "seed", o_seed, seed);
        const auto ms = parse_size_list(m_grid, "m-grid");
        const auto ks = parse_u64_list(k_grid, "k-grid");
        const mbot::MarginalReport rep = mbot::marginal_experiment(
            static_cast<std::size_t>(n), ms, ks, static_cast<std::size_t>(reps), delta,
            parse_law(law), seed);
        mbot::CsvWriter w(join_path(out_dir, "marginals_cells.csv"));
        w.row({"n", "m", "k", "mean_row_l1", "mean_col_l1", "bound", "coverage"});
        for (const mbot::MarginalCell& c : rep.cells)
            w.row({fmt_num(c.n), fmt_num(c.m), fmt_num(c.k), fmt_num(c.mean_row_l1),
                   fmt_num(c.mean_col_l1), fmt_num(c.bound), fmt_num(c.coverage)});
        w.close();
        mbot::CsvWriter sw(join_path(out_dir, "marginals_slopes.csv"));
        sw.row({"m", "slope"});
        for (std::size_t i = 0; i < ms.size(); ++i)
            sw.row({fmt_num(ms[i]), fmt_num(rep.slopes[i])});
        sw.close();
    }
};

struct DeviationExp {
    SpecFlags flags;
    std::string dist = "uniform", n_grid = "64,128,256", k_grid = "10,100", out_dir = ".";
    std::uint64_t d = 2, reps = 200, ref_factor = 100, ref_repeats = 16;
    double delta = 0.05;
    CLI::Option *o_dist{}, *o_d{}, *o_n{}, *o_kg{}, *o_reps{}, *o_delta{}, *o_rf{}, *o_rr{};

    void attach(CLI::App* sub) {
        o_dist = sub->add_option("--dist", dist, "uniform|gaussian");
        o_d = sub->add_option("-d,--dim", d, "data dimension");
        o_n = sub->add_option("--n-grid", n_grid, "comma list of support sizes");
        o_kg = sub->add_option("--k-grid", k_grid, "comma list of batch counts");
        o_reps = sub->add_option("--reps", reps, "repetitions per cell");
        o_delta = sub->add_option("--delta", delta, "confidence parameter");
        o_rf = sub->add_option("--ref-factor", ref_factor, "reference k multiplier");
        o_rr = sub->add_option("--ref-repeats", ref_repeats, "reference data redraws");
        sub->add_option("--out-dir", out_dir, "output directory");
        flags.m = 8;
        flags.attach(sub);
    }

    void run(const json& cfg) {
        flags.apply_config(cfg);
        ov(cfg, "dist", o_dist, dist);
        ov(cfg, "dim", o_d, d);
        ov_list(cfg, "n_grid", o_n, n_grid);
        ov_list(cfg, "k_grid", o_kg, k_grid);
        ov(cfg, "reps", o_reps, reps);
        ov(cfg, "delta", o_delta, delta);
        ov(cfg, "ref_factor", o_rf, ref_factor);
        ov(cfg, "ref_repeats", o_rr, ref_repeats);
        mbot::DeviationParams prm;
        if (dist == "uniform")
            prm.dist = mbot::DataDistribution::UniformCube;
        else if (dist == "gaussian")
            prm.dist = mbot::DataDistribution::Gaussian;
        else
            throw mbot::ValidationError("dist must be 'uniform' or 'gaussian'");
        prm.d = static_cast<std::size_t>(d);
        prm.n_grid = parse_size_list(n_grid, "n-grid");
        prm.k_grid = parse_u64_list(k_grid, "k-grid");
        prm.repetitions = static_cast<std::size_t>(reps);
        prm.delta = delta;
        prm.seed = flags.seed;
        prm.k_ref_factor = ref_factor;
        prm.ref_repeats = static_cast<std::size_t>(ref_repeats);
        const mbot::MinibatchSpec s = flags.spec();
        const mbot::DeviationReport rep = mbot::deviation_experiment(s, prm, flags.workers);
        mbot::CsvWriter w(join_path(out_dir, "deviation_cells.csv"));
        w.row({"n", "k", "mean_dev", "quantile_dev", "max_dev", "bound", "coverage",
               "reference", "reference_se", "cost_sup"});
        for (const mbot::DeviationCell& c : rep.cells)
            w.row({fmt_num(c.n), fmt_num(c.k), fmt_num(c.mean_dev), fmt_num(c.quantile_dev),
                   fmt_num(c.max_dev), fmt_num(c.bound), fmt_num(c.coverage),
                   fmt_num(c.reference), fmt_num(c.reference_se), fmt_num(c.cost_sup)});
        w.close();
        mbot::CsvWriter sw(join_path(out_dir, "deviation_summary.csv"));
        sw.row({"slope_n", "slope_k", "delta", "bounded"});
        sw.row({fmt_num(rep.slope_n), fmt_num(rep.slope_k), fmt_num(rep.delta),
                rep.bounded ? "1" : "0"});
        sw.close();
    }
};

struct ComplexityExp {
    SpecFlags flags;
    std::string d_grid = "2,7,10", n_grid = "256,512,1024,2048,4096,8192", out_dir = ".";
    CLI::Option *o_d{}, *o_n{};

    void attach(CLI::App* sub) {
        o_d = sub->add_option("--d-grid", d_grid, "comma list of dimensions");
        o_n = sub->add_option("--n-grid", n_grid, "comma list of support sizes");
        sub->add_option("--out-dir", out_dir, "output directory");
        flags.m = 128;
        flags.k = 0;  // 0 = batch budget tracks n
        flags.attach(sub);
    }

    void run(const json& cfg) {
        flags.apply_config(cfg);
        ov_list(cfg, "d_grid", o_d, d_grid);
        ov_list(cfg, "n_grid", o_n, n_grid);
        const mbot::MinibatchSpec s = flags.spec();
        const mbot::ComplexityReport rep = mbot::sample_complexity_experiment(
            s, parse_size_list(d_grid, "d-grid"), parse_size_list(n_grid, "n-grid"),
            flags.seed, flags.workers);
        mbot::CsvWriter w(join_path(out_dir, "complexity_cells.csv"));
        w.row({"d", "n", "k", "lambda"});
        for (const mbot::ComplexityCell& c : rep.cells)
            w.row({fmt_num(c.d), fmt_num(c.n), fmt_num(c.k), fmt_num(c.lambda)});
        w.close();
        const auto ds = parse_size_list(d_grid, "d-grid");
        mbot::CsvWriter sw(join_path(out_dir, "complexity_slopes.csv"));
        sw.row({"d", "slope"});
        for (std::size_t i = 0; i < ds.size(); ++i)
            sw.row({fmt_num(ds[i]), fmt_num(rep.slopes[i])});
        sw.close();
    }
};

struct PositivityExp {
    std::uint64_t n = 8, m = 2, grid = 64;
    std::string law = "without", w2_kernel = "w2", out_dir = ".";
    CLI::Option *o_n{}, *o_m{}, *o_grid{}, *o_law{}, *o_w2{};

    void attach(CLI::App* sub) {
        o_n = sub->add_option("--n", n, "circle point count");
        o_m = sub->add_option("--m", m, "batch size");
        o_grid = sub->add_option("--grid", grid, "rotation angles in [0, pi]");
        o_law = sub->add_option("--law", law, "without|with");
        o_w2 = sub->add_option("--w2-kernel", w2_kernel, "second column kernel: w2|w2sq");
        sub->add_option("--out-dir", out_dir, "output directory");
    }

    void run(const json& cfg) {
        ov(cfg, "n", o_n, n);
        ov(cfg, "m", o_m, m);
        ov(cfg, "grid", o_grid, grid);
        ov(cfg, "law", o_law, law);
        ov(cfg, "w2_kernel", o_w2, w2_kernel);
        mbot::Kernel k2;
        if (w2_kernel == "w2")
            k2 = mbot::Kernel::Wasserstein;
        else if (w2_kernel == "w2sq")
            k2 = mbot::Kernel::WassersteinPow;
        else
            throw mbot::ValidationError("w2-kernel must be 'w2' or 'w2sq'");
        const auto rows = mbot::positivity_sweep(static_cast<std::size_t>(n),
                                                 static_cast<std::size_t>(m),
                                                 static_cast<std::size_t>(grid),
                                                 parse_law(law), k2);
        mbot::CsvWriter w(join_path(out_dir, "positivity.csv"));
        w.row({"theta", "lambda_w1", "lambda_w2"});
        for (const mbot::PositivityRow& r : rows)
            w.row({fmt_num(r.theta), fmt_num(r.lambda_w1), fmt_num(r.lambda_w2)});
        w.close();
    }
};

struct GwInvarianceExp {
    std::uint64_t n = 300, m = 32, k = 32, angles = 16, seed = 42;
    unsigned workers = 1;
    std::string out_dir = ".";
    CLI::Option *o_n{}, *o_m{}, *o_k{}, *o_a{}, *o_seed{}, *o_w{};

    void attach(CLI::App* sub) {
        seed = default_seed();
        o_n = sub->add_option("--n", n, "spiral point count");
        o_m = sub->add_option("--m", m, "batch size");
        o_k = sub->add_option("--k", k, "batch pairs");
        o_a = sub->add_option("--angles", angles, "rotation count");
        o_seed = sub->add_option("--seed", seed, "rng seed");
        o_w = sub->add_option("--workers", workers, "worker threads");
        sub->add_option("--out-dir", out_dir, "output directory");
    }

    void run(const json& cfg) {
        ov(cfg, "n", o_n, n);
        ov(cfg, "m", o_m, m);
        ov(cfg, "k", o_k, k);
        ov(cfg, "angles", o_a, angles);
        ov(cfg, "seed", o_seed, seed);
        ov(cfg, "workers", o_w, workers);
        const mbot::GwInvarianceReport rep = mbot::gw_invariance_experiment(
            static_cast<std::size_t>(n), static_cast<std::size_t>(m), k,
            static_cast<std::size_t>(angles), seed, workers);
        mbot::CsvWriter w(join_path(out_dir, "gw_invariance.csv"));
        w.row({"theta", "value"});
        for (std::size_t i = 0; i < rep.angles.size(); ++i)
            w.row({fmt_num(rep.angles[i]), fmt_num(rep.values[i])});
        w.close();
        mbot::CsvWriter sw(join_path(out_dir, "gw_invariance_summary.csv"));
        sw.row({"rel_std", "translation_delta"});
        sw.row({fmt_num(rep.rel_std), fmt_num(rep.translation_delta)});
        sw.close();
    }
};

struct SparsityExp {
    std::uint64_t n = 1000, budget = 7000, seed = 42;
    unsigned workers = 1;
    std::string m_grid = "50,100,200,350,500", out_dir = ".";
    CLI::Option *o_n{}, *o_m{}, *o_b{}, *o_seed{}, *o_w{};

    void attach(CLI::App* sub) {
        seed = default_seed();
        o_n = sub->add_option("--n", n, "support size");
        o_m = sub->add_option("--m-grid", m_grid, "comma list of batch sizes");
        o_b = sub->add_option("--budget", budget, "total batch budget k*m");
        o_seed = sub->add_option("--seed", seed, "rng seed");
        o_w = sub->add_option("--workers", workers, "worker threads");
        sub->add_option("--out-dir", out_dir, "output directory");
    }

    void run(const json& cfg) {
        ov(cfg, "n", o_n, n);
        ov_list(cfg, "m_grid", o_m, m_grid);
        ov(cfg, "budget", o_b, budget);
        ov(cfg, "seed", o_seed, seed);
        ov(cfg, "workers", o_w, workers);
        const auto cells = mbot::sparsity_experiment(
            static_cast<std::size_t>(n), parse_size_list(m_grid, "m-grid"), budget, seed,
            workers);
        mbot::CsvWriter w(join_path(out_dir, "sparsity.csv"));
        w.row({"n", "m", "k", "nnz", "nnz_bound", "share"});
        for (const mbot::SparsityCell& c : cells)
            w.row({fmt_num(c.n), fmt_num(c.m), fmt_num(c.k), fmt_num(c.nnz), fmt_num(c.bound),
                   fmt_num(c.share)});
        w.close();
    }
};

// ---- oracle --------------------------------------------------------------------

struct Plan1dCmd {
    std::uint64_t n = 6, m = 3;
    bool with_replacement = false;
    std::string out = "-";

    void attach(CLI::App* sub) {
        sub->add_option("--n", n, "support size");
        sub->add_option("--m", m, "batch size");
        sub->add_flag("--with-replacement", with_replacement, "use the multiset law");
        sub->add_option("-o,--out", out, "output csv, '-' for stdout");
    }

    void run(const json&) {
        const mbot::Matrix P =
            with_replacement
                ? mbot::mb_plan_1d_with_replacement(static_cast<std::size_t>(n),
                                                    static_cast<std::size_t>(m))
                : mbot::mb_plan_1d(static_cast<std::size_t>(n), static_cast<std::size_t>(m));
        mbot::CsvWriter w = make_writer(out);
        w.row({"i", "j", "mass"});
        for (std::size_t i = 0; i < P.rows(); ++i)
            for (std::size_t j = 0; j < P.cols(); ++j)
                w.row({fmt_num(i), fmt_num(j), fmt_num(P(i, j))});
        w.close();
    }
};

struct ReweightCmd {
    std::string law = "without", reweight = "normalized", weights;
    std::uint64_t m = 2;
    std::string out = "-";

    void attach(CLI::App* sub) {
        sub->add_option("--law", law, "without|with");
        sub->add_option("--reweight", reweight, "uniform|normalized");
        sub->add_option("--weights", weights, "comma list of nonnegative weights")->required();
        sub->add_option("--m", m, "batch size");
        sub->add_option("-o,--out", out, "output csv, '-' for stdout");
    }

    void run(const json&) {
        mbot::Vec a;
        std::size_t start = 0;
        while (start <= weights.size()) {
            std::size_t pos = weights.find(',', start);
            if (pos == std::string::npos) pos = weights.size();
            a.push_back(mbot::detail::parse_double(weights.substr(start, pos - start),
                                                   "--weights"));
            start = pos + 1;
        }
        double total = 0.0;
        for (double v : a) total += v;
        if (!(total > 0.0)) throw mbot::ValidationError("weights must have positive sum");
        for (double& v : a) v /= total;
        std::size_t top = 0;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += a[i];
            if (a[i] > a[top]) top = i;
        }
        a[top] += 1.0 - s;
        const mbot::Vec ew = mbot::expected_reweight(parse_law(law), parse_reweight(reweight),
                                                     a, static_cast<std::size_t>(m));
        mbot::CsvWriter w = make_writer(out);
        w.row({"i", "value"});
        for (std::size_t i = 0; i < ew.size(); ++i) w.row({fmt_num(i), fmt_num(ew[i])});
        w.close();
    }
};

int run(int argc, char** argv) {
    CLI::App app{"minibatch optimal transport toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "json config file (flags take precedence)");

    EstimateCmd estimate;
    PlanCmd plan;
    FlowCmd flow;
    ColorCmd color;
    Plan1dCmd plan1d;
    ReweightCmd reweight;
    MarginalsExp marginals;
    DeviationExp deviation;
    ComplexityExp complexity;
    PositivityExp positivity;
    GwInvarianceExp gwinv;
    SparsityExp sparsity;

    CLI::App* sub_estimate = app.add_subcommand("estimate", "minibatch loss estimate");
    estimate.attach(sub_estimate);
    CLI::App* sub_plan = app.add_subcommand("plan", "lifted transport plan");
    plan.attach(sub_plan);
    CLI::App* sub_flow = app.add_subcommand("flow", "particle descent on a minibatch loss");
    flow.attach(sub_flow);
    CLI::App* sub_color = app.add_subcommand("color", "minibatch barycentric color transfer");
    color.attach(sub_color);

    CLI::App* sub_exp = app.add_subcommand("experiment", "statistical experiment battery");
    sub_exp->require_subcommand(1);
    CLI::App* e_marg = sub_exp->add_subcommand("marginals", "marginal concentration study");
    marginals.attach(e_marg);
    CLI::App* e_dev = sub_exp->add_subcommand("deviation", "estimator concentration study");
    deviation.attach(e_dev);
    CLI::App* e_cmpx =
        sub_exp->add_subcommand("sample-complexity",
                                "debiased loss decay across n and d (-k 0 tracks n)");
    complexity.attach(e_cmpx);
    CLI::App* e_pos = sub_exp->add_subcommand("positivity", "debiased loss sign sweep");
    positivity.attach(e_pos);
    CLI::App* e_gw = sub_exp->add_subcommand("gw-invariance", "rigid motion invariance check");
    gwinv.attach(e_gw);
    CLI::App* e_sp = sub_exp->add_subcommand("sparsity", "lifted plan sparsity audit");
    sparsity.attach(e_sp);

    CLI::App* sub_oracle = app.add_subcommand("oracle", "closed-form reference values");
    sub_oracle->require_subcommand(1);
    CLI::App* o_plan1d =
        sub_oracle->add_subcommand("plan1d", "exact 1d uniform averaged plan matrix");
    plan1d.attach(o_plan1d);
    CLI::App* o_rw =
        sub_oracle->add_subcommand("reweight", "exact expected reweighting by enumeration");
    reweight.attach(o_rw);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    }

    json cfg = json::object();
    if (!config_path.empty()) {
        std::ifstream is(config_path, std::ios::binary);
        if (!is) throw mbot::IOError("cannot open config: " + config_path);
        try {
            cfg = json::parse(is);
        } catch (const json::parse_error& e) {
            throw mbot::ValidationError(std::string("config parse error: ") + e.what());
        }
        if (!cfg.is_object())
            throw mbot::ValidationError("config must be a json object");
    }

    if (sub_estimate->parsed()) estimate.run(cfg);
    if (sub_plan->parsed()) plan.run(cfg);
    if (sub_flow->parsed()) flow.run(cfg);
    if (sub_color->parsed()) color.run(cfg);
    if (sub_exp->parsed()) {
        if (e_marg->parsed()) marginals.run(cfg);
        if (e_dev->parsed()) deviation.run(cfg);
        if (e_cmpx->parsed()) complexity.run(cfg);
        if (e_pos->parsed()) positivity.run(cfg);
        if (e_gw->parsed()) gwinv.run(cfg);
        if (e_sp->parsed()) sparsity.run(cfg);
    }
    if (sub_oracle->parsed()) {
        if (o_plan1d->parsed()) plan1d.run(cfg);
        if (o_rw->parsed()) reweight.run(cfg);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mbot::IOError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const mbot::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const mbot::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
