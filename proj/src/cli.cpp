#include "vfm/cli.hpp"

#include "vfm/checkpoint.hpp"
#include "vfm/designopt.hpp"
#include "vfm/errors.hpp"
#include "vfm/evaluation.hpp"
#include "vfm/synthwells.hpp"
#include "vfm/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace vfm {

namespace {

namespace fs = std::filesystem;

struct Context {
    std::uint64_t seed = 42;
    std::string config_path;
    std::string out_dir = ".";
    KeyValueMap overrides;
    std::vector<std::string> args;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void set(const KeyValueMap& kv) {
        for (const auto& [k, v] : kv) config_[k] = v;
    }
    void set(const std::string& k, const std::string& v) { config_[k] = v; }
    void artifact(const std::string& path) { artifacts_.push_back(path); }

    /// Writes manifest_<command>.json into the output directory and returns its path.
    std::string write(const Context& ctx) const {
        nlohmann::ordered_json j;
        j["command"] = command_;
        j["seed"] = ctx.seed;
        j["config_hash"] = hex64(fnv1a64(to_key_value_text(config_)));
        j["config"] = config_;
        j["artifacts"] = artifacts_;
        j["arguments"] = ctx.args;
        const std::string p = ctx.path("manifest_" + command_ + ".json");
        write_file(p, j.dump(2) + "\n");
        return p;
    }

private:
    std::string command_;
    KeyValueMap config_;
    std::vector<std::string> artifacts_;
};

ModelConfig model_config(const Context& ctx) {
    ModelConfig c;
    c.seed = ctx.seed;
    return ModelConfig::from_key_values(ctx.overrides, c);
}

TrainConfig train_config(const Context& ctx) {
    TrainConfig c;
    c.seed = ctx.seed;
    return TrainConfig::from_key_values(ctx.overrides, c);
}

int int_override(const KeyValueMap& kv, const std::string& key, int fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : static_cast<int>(parse_int(it->second));
}

double real_override(const KeyValueMap& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_double(it->second);
}

OracleConstants oracle_constants(const KeyValueMap& kv) {
    OracleConstants c;
    c.drawdown_dT = real_override(kv, "drawdown_dT", c.drawdown_dT);
    c.bubbly_max_vsg = real_override(kv, "bubbly_max_vsg", c.bubbly_max_vsg);
    c.annular_min_vsg = real_override(kv, "annular_min_vsg", c.annular_min_vsg);
    c.annular_min_ratio = real_override(kv, "annular_min_ratio", c.annular_min_ratio);
    return c;
}

KeyValueMap oracle_key_values(const OracleConstants& c) {
    return {{"drawdown_dT", format_double(c.drawdown_dT)},
            {"bubbly_max_vsg", format_double(c.bubbly_max_vsg)},
            {"annular_min_vsg", format_double(c.annular_min_vsg)},
            {"annular_min_ratio", format_double(c.annular_min_ratio)}};
}

SplitFractions split_fractions(const KeyValueMap& kv) {
    SplitFractions f;
    f.train = real_override(kv, "split_train", f.train);
    f.val = real_override(kv, "split_val", f.val);
    f.test = real_override(kv, "split_test", f.test);
    return f;
}

KeyValueMap split_key_values(const SplitFractions& f, int bins, std::uint64_t seed) {
    return {{"split_train", format_double(f.train)},
            {"split_val", format_double(f.val)},
            {"split_test", format_double(f.test)},
            {"strata_bins", std::to_string(bins)},
            {"split_seed", std::to_string(seed)}};
}

struct SplitData {
    std::vector<WellRecord> train, val, test;

    const std::vector<WellRecord>& get(Split s) const {
        return s == Split::train ? train : s == Split::val ? val : test;
    }
};

SplitData split_records(const std::vector<WellRecord>& records, const KeyValueMap& kv) {
    auto it = kv.find("split_seed");
    if (it == kv.end()) throw ConfigError("checkpoint metadata has no split_seed");
    const SplitAssignment a = stratified_split(records, split_fractions(kv), int_override(kv, "strata_bins", 5),
                                               parse_seed(it->second));
    return {select_split(records, a, Split::train), select_split(records, a, Split::val),
            select_split(records, a, Split::test)};
}

std::vector<std::string> parse_id_list(const std::string& spec) {
    std::string text = spec;
    if (fs::is_regular_file(spec)) text = read_file(spec);
    std::replace(text.begin(), text.end(), '\n', ',');
    std::vector<std::string> ids;
    for (const auto& tok : split_csv_line(text)) {
        const std::string id = trim(tok);
        if (!id.empty() && id[0] != '#') ids.push_back(id);
    }
    return ids;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::size_t wells = 80;
    std::size_t steps = 64;
};

int run_gen_data(const Context& ctx, const GenDataArgs& a) {
    const DesignBounds bounds = DesignBounds::defaults();
    const OracleConstants oc = oracle_constants(ctx.overrides);
    *ctx.out << "generating " << a.wells << " wells x " << a.steps << " steps\n";
    const Portfolio p = generate_portfolio(a.wells, a.steps, bounds, ctx.seed, oc);
    for (const auto& f : p.failures) *ctx.err << "skipped " << f.well_id << ": " << f.message << "\n";
    const std::string csv = ctx.path("portfolio.csv");
    const std::string side = ctx.path("bounds.txt");
    write_portfolio_csv(csv, p.records);
    write_file(side, bounds_sidecar_text(bounds, ctx.seed, a.wells, a.steps));
    Manifest m("gen-data");
    m.set(oracle_key_values(oc));
    m.set("wells", std::to_string(a.wells));
    m.set("steps", std::to_string(a.steps));
    m.set("generated_wells", std::to_string(p.records.size()));
    m.artifact(csv);
    m.artifact(side);
    m.write(ctx);
    *ctx.out << "wrote " << csv << " (" << p.records.size() << " wells)\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string variant;
    std::string use_physics;
    std::string use_regime;
    int d = 0;
    int epochs = -1;
    std::string out;
    bool force = false;
};

int run_train(const Context& ctx, const TrainArgs& a) {
    const std::string out = a.out.empty() ? ctx.path("model.ckpt") : a.out;
    if (fs::exists(out) && !a.force) throw ConfigError("refusing to overwrite " + out + " (pass --force)");

    KeyValueMap kv = ctx.overrides;
    if (!a.variant.empty()) kv["variant"] = a.variant;
    if (!a.use_physics.empty()) kv["use_physics"] = a.use_physics;
    if (!a.use_regime.empty()) kv["use_regime"] = a.use_regime;
    if (a.d > 0) kv["embed_dim"] = std::to_string(a.d);
    if (a.epochs >= 0) kv["max_epochs"] = std::to_string(a.epochs);
    Context c = ctx;
    c.overrides = kv;
    ModelConfig mc = model_config(c);
    mc.validate();
    TrainConfig tc = train_config(c);
    LossWeights w = LossWeights::from_key_values(kv);
    if (!mc.use_physics) w.delta = 0.0;
    tc.validate();
    w.validate();

    const auto records = read_portfolio_csv(a.data);
    const SplitFractions fr = split_fractions(kv);
    const int bins = int_override(kv, "strata_bins", 5);
    const KeyValueMap split_kv = split_key_values(fr, bins, ctx.seed);
    const SplitData sd = split_records(records, split_kv);
    const NormStats stats = fit_norm_stats(sd.train);
    check_no_leakage(stats, sd.train, sd.val);

    Model model(mc);
    *ctx.out << "training " << to_string(mc.variant) << " (" << model.parameter_count() << " parameters) on "
             << sd.train.size() << " wells, validating on " << sd.val.size() << "\n";
    const TrainHistory h = fit(model, sd.train, sd.val, stats, tc, w, ctx.out);

    KeyValueMap meta = split_kv;
    for (const auto& [k, v] : tc.to_key_values()) meta[k] = v;
    for (const auto& [k, v] : w.to_key_values()) meta[k] = v;
    meta["best_epoch"] = std::to_string(h.best_epoch);
    meta["epochs_run"] = std::to_string(h.epochs.size());
    meta["stop_reason"] = h.stop_reason;
    meta["data_hash"] = hex64(fnv1a64(read_file(a.data)));
    if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
    save_checkpoint(out, model, stats, meta);

    std::string log;
    for (const auto& e : h.epochs) log += format_epoch_line(e) + "\n";
    const std::string log_path = ctx.path("train_log.txt");
    write_file(log_path, log);

    Manifest m("train");
    m.set(mc.to_key_values());
    m.set(meta);
    m.set("data", a.data);
    m.artifact(out);
    m.artifact(log_path);
    m.write(ctx);
    *ctx.out << "stop_reason=" << h.stop_reason << " best_epoch=" << h.best_epoch << "\nwrote " << out << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
};

int run_eval(const Context& ctx, const EvalArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    const auto records = read_portfolio_csv(a.data);
    const SplitData sd = split_records(records, ck.metadata);
    const auto& set = sd.get(parse_split(a.split));
    const double floor = real_override(ctx.overrides, "mape_floor", 0.1);
    const Metrics mt = evaluate_model(ck.model, set, ck.stats, floor);
    const std::string metrics_path = ctx.path("metrics.csv");
    const std::string scatter_path = ctx.path("scatter.csv");
    write_file(metrics_path, metrics_csv(mt));
    write_file(scatter_path, scatter_csv(ck.model, set, ck.stats));
    Manifest m("eval");
    m.set(ck.model.config().to_key_values());
    m.set("checkpoint", a.checkpoint);
    m.set("data", a.data);
    m.set("split", a.split);
    m.set("mape_floor", format_double(floor));
    m.artifact(metrics_path);
    m.artifact(scatter_path);
    m.write(ctx);
    *ctx.out << "evaluated " << set.size() << " wells: WTOT RMSE " << format_sig(mt.rmse_wtot, 4) << "\nwrote "
             << metrics_path << "\n";
    return 0;
}

struct AblateArgs {
    int experiment = 1;
    std::string data;
    std::size_t wells = 80;
    std::size_t steps = 64;
    int epochs = -1;
};

int run_ablate(const Context& ctx, const AblateArgs& a) {
    AblationSettings s;
    s.experiment = a.experiment;
    s.seed = ctx.seed;
    KeyValueMap kv = ctx.overrides;
    if (a.epochs >= 0) kv["max_epochs"] = std::to_string(a.epochs);
    Context c = ctx;
    c.overrides = kv;
    s.model = model_config(c);
    s.train = train_config(c);
    s.weights = LossWeights::from_key_values(kv);
    s.fractions = split_fractions(kv);
    s.strata_bins = int_override(kv, "strata_bins", 5);
    s.mape_floor = real_override(kv, "mape_floor", 0.1);
    s.model.validate();
    s.train.validate();
    s.weights.validate();
    const auto cells = experiment_cells(a.experiment);

    std::vector<WellRecord> records;
    Manifest m("ablate");
    if (!a.data.empty()) {
        records = read_portfolio_csv(a.data);
        m.set("data", a.data);
    } else {
        const OracleConstants oc = oracle_constants(kv);
        *ctx.out << "generating " << a.wells << " wells x " << a.steps << " steps\n";
        Portfolio p = generate_portfolio(a.wells, a.steps, DesignBounds::defaults(), ctx.seed, oc);
        for (const auto& f : p.failures) *ctx.err << "skipped " << f.well_id << ": " << f.message << "\n";
        records = std::move(p.records);
        m.set(oracle_key_values(oc));
        m.set("wells", std::to_string(a.wells));
        m.set("steps", std::to_string(a.steps));
    }
    const AblationReport rep = run_ablation(records, cells, s, ctx.out);
    const std::string path = ctx.path("ablation_exp" + std::to_string(a.experiment) + ".csv");
    write_file(path, ablation_csv(rep));
    m.set(s.model.to_key_values());
    m.set(s.train.to_key_values());
    m.set(s.weights.to_key_values());
    m.set(split_key_values(s.fractions, s.strata_bins, s.seed));
    m.set("experiment", std::to_string(a.experiment));
    m.set("mape_floor", format_double(s.mape_floor));
    m.artifact(path);
    m.write(ctx);
    for (const auto& r : rep.rows) {
        *ctx.out << r.cell.name << ": " << (r.ok ? "WTOT RMSE " + format_sig(r.metrics.rmse_wtot, 4) : "failed: " + r.error)
                 << "\n";
    }
    *ctx.out << "wrote " << path << "\n";
    return std::all_of(rep.rows.begin(), rep.rows.end(), [](const AblationRow& r) { return r.ok; }) ? 0 : 2;
}

struct DesignArgs {
    std::string checkpoint;
    std::string data;
    std::string scenarios;
};

struct DesignSetup {
    Checkpoint ck;
    SplitData split;
    DesignBounds bounds;
    std::vector<Scenario> scenarios;
};

DesignSetup design_setup(const DesignArgs& a) {
    DesignSetup s{load_checkpoint(a.checkpoint), {}, {}, {}};
    const auto records = read_portfolio_csv(a.data);
    s.split = split_records(records, s.ck.metadata);
    s.bounds = population_bounds(s.split.train);
    s.scenarios = a.scenarios.empty() ? representative_scenarios(s.split.test, 5)
                                      : scenarios_from_records(records, parse_id_list(a.scenarios));
    return s;
}

void describe_design_setup(Manifest& m, const DesignArgs& a, const DesignSetup& s) {
    m.set(s.ck.model.config().to_key_values());
    m.set("checkpoint", a.checkpoint);
    m.set("data", a.data);
    std::string ids;
    for (const auto& sc : s.scenarios) ids += (ids.empty() ? "" : ";") + sc.well_id;
    m.set("scenarios", ids);
}

struct OptimizeArgs {
    DesignArgs design;
    int objectives = 2;
    int generations = 30;
    std::string out;
};

int run_optimize(const Context& ctx, const OptimizeArgs& a) {
    DesignSetup s = design_setup(a.design);
    OptimizationOptions opt;
    const KeyValueMap& kv = ctx.overrides;
    opt.n_weights = int_override(kv, "n_weights", opt.n_weights);
    opt.simplex_step = real_override(kv, "simplex_step", opt.simplex_step);
    opt.presample = static_cast<std::size_t>(int_override(kv, "presample", static_cast<int>(opt.presample)));
    opt.de.pop_size = int_override(kv, "pop_size", opt.de.pop_size);
    opt.de.F = real_override(kv, "de_F", opt.de.F);
    opt.de.CR = real_override(kv, "de_CR", opt.de.CR);
    opt.de.generations = a.generations;
    opt.de.seed = ctx.seed;

    ModelSurrogate sur(s.ck.model, s.ck.stats, s.scenarios, s.bounds);
    const bool tri = a.objectives == 3;
    *ctx.out << "optimizing " << a.objectives << " objectives over " << s.scenarios.size() << " scenarios\n";
    const OptimizationResult r = tri ? optimize_triobjective(sur, s.bounds, opt) : optimize_biobjective(sur, s.bounds, opt);
    const std::string front = a.out.empty() ? ctx.path("front.csv") : a.out;
    write_file(front, front_csv(r.front, tri));

    const BaselineDesigns base = baseline_designs(s.split.train);
    std::ostringstream bl;
    bl << "baseline";
    for (std::size_t i = 0; i < kNumDesignNumeric; ++i) bl << ',' << column_name(design_field_at(i));
    bl << ",CHOKE_PROFILE,W_OIL,P_slug,C\n";
    for (const auto& [name, d0] : {std::pair{"p95", base.p95}, std::pair{"mean", base.mean}}) {
        const WellDesign d = clamp_to_bounds(d0, s.bounds);
        const ObjectiveValues o = sur.evaluate(d);
        bl << name;
        for (double v : d.numeric()) bl << ',' << format_double(v);
        bl << ',' << to_string(d.choke_profile) << ',' << format_double(o.mean_oil) << ',' << format_double(o.mean_slug)
           << ',' << format_double(complexity(d, s.bounds)) << '\n';
    }
    const std::string baseline_path = ctx.path("baselines.csv");
    write_file(baseline_path, bl.str());

    Manifest m("optimize");
    describe_design_setup(m, a.design, s);
    m.set("objectives", std::to_string(a.objectives));
    m.set("generations", std::to_string(a.generations));
    m.set("n_weights", std::to_string(opt.n_weights));
    m.set("simplex_step", format_double(opt.simplex_step));
    m.set("presample", std::to_string(opt.presample));
    m.set("pop_size", std::to_string(opt.de.pop_size));
    m.set("de_F", format_double(opt.de.F));
    m.set("de_CR", format_double(opt.de.CR));
    m.set("oil_range", format_double(r.range.oil_min) + ";" + format_double(r.range.oil_max));
    m.set("slug_range", format_double(r.range.slug_min) + ";" + format_double(r.range.slug_max));
    m.artifact(front);
    m.artifact(baseline_path);
    m.write(ctx);
    *ctx.out << "front has " << r.front.size() << " designs from an archive of " << r.archive_size << " ("
             << r.distinct_evaluations << " distinct evaluations)\nwrote " << front << "\n";
    return 0;
}

struct SensitivityArgs {
    DesignArgs design;
    std::string field;
    int n_points = 21;
    std::string base = "mean";
};

int run_sensitivity(const Context& ctx, const SensitivityArgs& a) {
    if (a.n_points < 1) throw ConfigError("--n-points must be >= 1");
    const DesignField field = parse_design_field(a.field);
    DesignSetup s = design_setup(a.design);
    const BaselineDesigns b = baseline_designs(s.split.train);
    const WellDesign base = clamp_to_bounds(a.base == "p95" ? b.p95 : b.mean, s.bounds);
    ModelSurrogate sur(s.ck.model, s.ck.stats, s.scenarios, s.bounds);
    const auto curve = sensitivity_sweep(sur, base, field, static_cast<std::size_t>(a.n_points), s.bounds);
    const std::string path = ctx.path("sensitivity_" + std::string(column_name(field)) + ".csv");
    write_file(path, sensitivity_csv(field, curve));
    Manifest m("sensitivity");
    describe_design_setup(m, a.design, s);
    m.set("field", std::string(column_name(field)));
    m.set("n_points", std::to_string(a.n_points));
    m.set("base", a.base);
    m.artifact(path);
    m.write(ctx);
    *ctx.out << "wrote " << path << "\n";
    return 0;
}

struct IntegrityArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
};

int run_integrity(const Context& ctx, const IntegrityArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    const auto records = read_portfolio_csv(a.data);
    std::vector<WellRecord> set;
    if (a.split == "all") {
        set = records;
    } else {
        set = split_records(records, ck.metadata).get(parse_split(a.split));
    }
    const auto entries = integrity_map(set, model_slug_probability(ck.model, ck.stats));
    const std::string path = ctx.path("integrity.csv");
    write_file(path, integrity_csv(entries));
    std::array<int, 3> counts{};
    for (const auto& e : entries) ++counts[static_cast<std::size_t>(e.category)];
    Manifest m("integrity");
    m.set(ck.model.config().to_key_values());
    m.set("checkpoint", a.checkpoint);
    m.set("data", a.data);
    m.set("split", a.split);
    m.artifact(path);
    m.write(ctx);
    *ctx.out << "low=" << counts[0] << " moderate=" << counts[1] << " high=" << counts[2] << "\nwrote " << path << "\n";
    return 0;
}

struct ReportArgs {
    std::vector<std::string> inputs;
};

int run_report(const Context& ctx, const ReportArgs& a) {
    std::vector<std::string> inputs = a.inputs;
    if (inputs.empty()) {
        for (const char* name : {"ablation_exp1.csv", "ablation_exp2.csv"}) {
            if (fs::exists(ctx.path(name))) inputs.push_back(ctx.path(name));
        }
    }
    if (inputs.empty()) throw ConfigError("report: no ablation CSVs given or found in " + ctx.out_dir);
    static const std::vector<std::string> shown = {"cell", "status", "WTOT", "WOIL", "WWAT", "WGAS", "PBH", "TBH",
                                                   "RegBH", "RegWH", "WTOT_MAPE", "neg_flow", "mass_residual"};
    std::ostringstream md;
    for (const auto& in : inputs) {
        std::istringstream text(read_file(in));
        std::string line;
        if (!std::getline(text, line)) throw DataError(in + ": empty file");
        const auto header = split_csv_line(line);
        std::vector<std::size_t> idx;
        for (const auto& col : shown) {
            auto it = std::find(header.begin(), header.end(), col);
            if (it == header.end()) throw DataError(in + ": missing column " + col);
            idx.push_back(static_cast<std::size_t>(it - header.begin()));
        }
        md << "## " << fs::path(in).filename().string() << "\n\n|";
        for (const auto& col : shown) md << ' ' << col << " |";
        md << "\n|";
        for (std::size_t i = 0; i < shown.size(); ++i) md << " --- |";
        md << '\n';
        while (std::getline(text, line)) {
            if (trim(line).empty()) continue;
            const auto cells = split_csv_line(line);
            md << '|';
            for (std::size_t i : idx) {
                const std::string& v = i < cells.size() ? cells[i] : std::string();
                std::string shownv = v;
                if (!v.empty() && v != "NA") {
                    try {
                        shownv = format_sig(parse_double(v), 4);
                    } catch (const std::exception&) {
                        shownv = v;
                    }
                }
                md << ' ' << shownv << " |";
            }
            md << '\n';
        }
        md << '\n';
    }
    const std::string path = ctx.path("report.md");
    write_file(path, md.str());
    Manifest m("report");
    std::string joined;
    for (const auto& in : inputs) joined += (joined.empty() ? "" : ";") + in;
    m.set("inputs", joined);
    m.artifact(path);
    m.write(ctx);
    *ctx.out << md.str() << "wrote " << path << "\n";
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Virtual flow metering surrogate: data generation, training, evaluation and design search"};
    app.require_subcommand(1);
    app.fallthrough();

    Context ctx;
    ctx.args = args;
    ctx.out = &out;
    ctx.err = &err;
    std::string seed_text = "42";
    app.add_option("--seed", seed_text, "Run seed")->capture_default_str();
    app.add_option("--config", ctx.config_path, "key=value overrides file");
    app.add_option("--out-dir", ctx.out_dir, "Directory for artifacts and the manifest")->capture_default_str();

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic well portfolio");
    gen_cmd->add_option("--wells", gen.wells)->capture_default_str();
    gen_cmd->add_option("--steps", gen.steps)->capture_default_str();

    const std::vector<std::string> on_off = {"on", "off"};
    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model and save a checkpoint");
    train_cmd->add_option("--data", tr.data)->required();
    train_cmd->add_option("--variant", tr.variant)->check(CLI::IsMember({"no_config", "concat_config", "film_crossattn"}));
    train_cmd->add_option("--use-physics", tr.use_physics)->check(CLI::IsMember(on_off));
    train_cmd->add_option("--use-regime", tr.use_regime)->check(CLI::IsMember(on_off));
    train_cmd->add_option("--d", tr.d, "Embedding width")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", tr.epochs)->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--out", tr.out, "Checkpoint path");
    train_cmd->add_flag("--force", tr.force, "Overwrite an existing checkpoint");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
    eval_cmd->add_option("--data", ev.data)->required();
    eval_cmd->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();

    AblateArgs ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation experiment");
    ablate_cmd->add_option("--experiment", ab.experiment)->check(CLI::IsMember({1, 2}))->capture_default_str();
    ablate_cmd->add_option("--data", ab.data, "Portfolio CSV; generated when omitted");
    ablate_cmd->add_option("--wells", ab.wells)->capture_default_str();
    ablate_cmd->add_option("--steps", ab.steps)->capture_default_str();
    ablate_cmd->add_option("--epochs", ab.epochs)->check(CLI::NonNegativeNumber);

    auto add_design_options = [](CLI::App* cmd, DesignArgs& d) {
        cmd->add_option("--checkpoint", d.checkpoint)->required();
        cmd->add_option("--data", d.data, "Portfolio the checkpoint was trained on")->required();
        cmd->add_option("--scenarios", d.scenarios, "Comma-separated well ids or a file of ids");
    };

    OptimizeArgs op;
    auto* opt_cmd = app.add_subcommand("optimize", "Search well designs on the trained surrogate");
    add_design_options(opt_cmd, op.design);
    opt_cmd->add_option("--objectives", op.objectives)->check(CLI::IsMember({2, 3}))->capture_default_str();
    opt_cmd->add_option("--generations", op.generations)->check(CLI::NonNegativeNumber)->capture_default_str();
    opt_cmd->add_option("--out", op.out, "Front CSV path");

    SensitivityArgs se;
    auto* sens_cmd = app.add_subcommand("sensitivity", "Sweep one design field");
    add_design_options(sens_cmd, se.design);
    sens_cmd->add_option("--field", se.field)->required();
    sens_cmd->add_option("--n-points", se.n_points)->capture_default_str();
    sens_cmd->add_option("--base", se.base)->check(CLI::IsMember({"p95", "mean"}))->capture_default_str();

    IntegrityArgs ig;
    auto* integ_cmd = app.add_subcommand("integrity", "Per-well slug risk categories");
    integ_cmd->add_option("--checkpoint", ig.checkpoint)->required();
    integ_cmd->add_option("--data", ig.data)->required();
    integ_cmd->add_option("--split", ig.split)->check(CLI::IsMember({"train", "val", "test", "all"}))->capture_default_str();

    ReportArgs rp;
    auto* report_cmd = app.add_subcommand("report", "Summarise ablation CSVs as markdown");
    report_cmd->add_option("--input", rp.inputs, "Ablation CSV (repeatable)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        ctx.seed = parse_seed(seed_text);
        if (!ctx.config_path.empty()) ctx.overrides = read_key_value_file(ctx.config_path);
        fs::create_directories(ctx.out_dir);
        if (gen_cmd->parsed()) return run_gen_data(ctx, gen);
        if (train_cmd->parsed()) return run_train(ctx, tr);
        if (eval_cmd->parsed()) return run_eval(ctx, ev);
        if (ablate_cmd->parsed()) return run_ablate(ctx, ab);
        if (opt_cmd->parsed()) return run_optimize(ctx, op);
        if (sens_cmd->parsed()) return run_sensitivity(ctx, se);
        if (integ_cmd->parsed()) return run_integrity(ctx, ig);
        if (report_cmd->parsed()) return run_report(ctx, rp);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << app.help();
    return 1;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

} // namespace vfm
