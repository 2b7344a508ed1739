#include "prescriptor/cli.hpp"

#include "prescriptor/bench.hpp"
#include "prescriptor/exact.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

namespace prescriptor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t config_hash(const json& config) {
  json c = config;
  c.erase("threads");
  c.erase("config");
  c.erase("out"); // where results go does not change them
  c.erase("log");
  return fnv1a(c.dump());
}

std::string metadata_header(const json& config, std::uint64_t seed) {
  std::ostringstream os;
  os << "# tool " << kToolName << ' ' << kVersion << '\n';
  os << "# seed " << seed << '\n';
  os << "# config_hash " << std::hex << std::setw(16) << std::setfill('0') << config_hash(config) << '\n';
  return os.str();
}

namespace {

/// A usage or validation problem detected by the front end itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every option value lives here; subcommands bind the subset they use.
struct Options {
  std::string config;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool timing = false;

  std::string problem = "inventory";
  std::size_t n = 100;
  std::size_t horizon = 11;
  std::string out;

  std::string instance;
  std::string training;
  std::string test;
  std::string weights;
  std::size_t k = 0;
  std::size_t trees = 100;
  double lambda = 0.2;
  double pi = 1.0;
  std::size_t subsample = 0;
  std::string honesty = "ignore-response";

  std::string solver = "sddp";
  std::size_t M = 20;
  double alpha = 0.05;
  double epsilon = 1e-4;
  std::size_t max_iter = 100;
  std::string cuts = "auto";
  bool sample_root = false;
  std::string log;
  std::string cuts_in;

  std::string mode = "resolve";
  std::size_t grid_points = 21;
  std::uint64_t price_seed = 0;

  std::string methods = "saa,knn,rf";
  std::string n_grid = "25,50,100,200";
  std::size_t replications = 25;
  std::size_t test_paths = 1000;
  std::size_t rf_min_leaf = 3;
  std::size_t sddp_iterations = 40;
  std::size_t sddp_m = 20;
  bool full = false;
  bool lotsizing_sddp = false;
};

/// Binds options to CLI11 and to the keys of a JSON config file.
class Binder {
public:
  template <class T>
  void option(CLI::App* app, const std::string& name, T& var, const std::string& help) {
    app->add_option("--" + name, var, help);
    remember<T>(name, var);
  }

  void flag(CLI::App* app, const std::string& name, bool& var, const std::string& help) {
    app->add_flag("--" + name, var, help);
    remember<bool>(name, var);
  }

  void load(const json& file, CLI::App* sub) {
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      auto it = loaders_.find(key);
      if (it == loaders_.end()) throw UsageError("config file: unknown key '" + key + "'");
      if (!owned_by(sub, key)) continue;
      try {
        it->second(value);
      } catch (const json::exception&) {
        throw UsageError("config file: key '" + key + "' has the wrong type");
      }
    }
  }

  /// The effective configuration of subcommand `sub`.
  json dump(CLI::App* sub) const {
    json j = json::object();
    for (const auto& [key, dumper] : dumpers_)
      if (owned_by(sub, key)) dumper(j);
    j["subcommand"] = sub->get_name();
    return j;
  }

private:
  template <class T>
  void remember(const std::string& name, T& var) {
    loaders_[name] = [&var](const json& v) { var = v.get<T>(); };
    dumpers_[name] = [&var, name](json& j) { j[name] = var; };
  }

  static bool owned_by(CLI::App* sub, const std::string& key) {
    try {
      sub->get_option("--" + key);
      return true;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  }

  std::map<std::string, std::function<void(const json&)>> loaders_;
  std::map<std::string, std::function<void(json&)>> dumpers_;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split(s)) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("expected a comma-separated list of counts, got '" + s + "'");
    }
  }
  return out;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing --" + what);
  if (!fs::is_regular_file(path)) throw UsageError(what + " file not found: " + path);
}

json read_json(const std::string& path, const std::string& what) {
  require_file(path, what);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(what + " file " + path + " is not valid JSON: " + e.what());
  }
}

TrainingSet read_training(const std::string& path, const std::string& what, std::ostream& err) {
  require_file(path, what);
  std::ifstream in(path);
  std::vector<std::string> warnings;
  auto data = read_training_csv(in, &warnings);
  for (const auto& w : warnings) err << "warning: " << path << ": " << w << '\n';
  return data;
}

/// Writes to `path`, or to `fallback` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
  if (!f) throw UsageError("failed writing " + path);
}

json meta_json(const json& config, std::uint64_t seed) {
  std::ostringstream h;
  h << std::hex << std::setw(16) << std::setfill('0') << config_hash(config);
  return {{"tool", kToolName}, {"version", kVersion}, {"seed", seed}, {"config_hash", h.str()}};
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

Problem parse_problem(const std::string& s) {
  try {
    return problem_from_string(s);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
}

WeightSpec weight_spec(const Options& o) {
  WeightSpec s;
  s.method = weight_method_from_string(o.weights);
  s.k = o.k;
  s.n_trees = o.trees;
  s.lambda = o.lambda;
  s.pi = o.pi;
  s.subsample = o.subsample;
  if (o.honesty == "ignore-response") s.honesty = Honesty::IgnoreResponse;
  else if (o.honesty == "half-split") s.honesty = Honesty::HalfSplit;
  else throw UsageError("--honesty must be ignore-response or half-split");
  return s;
}

/// Instance from --instance, with --training and --weights overriding its own.
ProblemInstance load_instance(const Options& o, std::ostream& err) {
  const json j = read_json(o.instance, "instance");
  std::vector<std::string> warnings;
  ProblemInstance inst = instance_from_json(j, &warnings);
  for (const auto& w : warnings) err << "warning: " << o.instance << ": " << w << '\n';
  if (!o.training.empty()) inst.training = read_training(o.training, "training", err);
  if (!o.weights.empty()) inst.weight_specs = {weight_spec(o)};
  require_valid(inst);
  return inst;
}

std::vector<WeightModel> fit_models(const ProblemInstance& inst, const Options& o) {
  if (inst.horizon() == 0) return {};
  auto specs = inst.weight_specs;
  if (specs.empty()) specs = {WeightSpec{}};
  return fit_stage_models(*inst.training, specs, derive_seed(o.seed, 21), o.threads);
}

SddpConfig sddp_config(const Options& o) {
  SddpConfig c;
  c.M = o.M;
  c.alpha = o.alpha;
  c.epsilon = o.epsilon;
  c.max_iter = o.max_iter;
  c.cuts = cut_mode_from_string(o.cuts);
  c.seed = derive_seed(o.seed, 22);
  c.threads = o.threads;
  c.sample_root = o.sample_root;
  c.timing = o.timing;
  return c;
}

std::string run_log_text(const SddpRun& run, const std::string& header) {
  std::ostringstream os;
  os << header;
  write_run_log(os, run);
  return os.str();
}

// ---------------------------------------------------------------- commands

void cmd_generate(const Options& o, const json& config, std::ostream& out) {
  if (o.n == 0) throw UsageError("--n must be at least 1");
  if (o.horizon == 0) throw UsageError("--horizon must be at least 1");
  if (o.out.empty()) throw UsageError("missing --out directory");
  const Problem problem = parse_problem(o.problem);

  GeneratorConfig g;
  g.T = o.horizon;
  g.N = o.n;
  if (problem == Problem::LotSizing) g.demand_cap = LotSizingParams{}.demand_cap;
  const Loadings load = draw_loadings(g.T, loading_seed(o.seed));
  const TrainingSet data = generate_paths(g, load, derive_seed(o.seed, 1000));

  const std::string header = metadata_header(config, o.seed);
  std::ostringstream csv;
  csv << header;
  write_training_csv(csv, data);
  const fs::path dir(o.out);
  emit((dir / "training.csv").string(), csv.str(), out);

  WeightSpec spec;
  if (!o.weights.empty()) spec = weight_spec(o);
  ProblemInstance inst;
  if (problem == Problem::Inventory) {
    inst = build_inventory_instance(InventoryParams{}, data, spec);
  } else {
    LotSizingParams p;
    p.price_seed = o.price_seed ? o.price_seed : derive_seed(o.seed, 14);
    inst = build_lotsizing_instance(p, data, spec);
  }
  json ij = instance_to_json(inst);
  ij["meta"] = meta_json(config, o.seed);
  emit((dir / "instance.json").string(), dump_json(ij), out);

  json meta = {{"meta", meta_json(config, o.seed)},
               {"problem", to_string(problem)},
               {"N", o.n},
               {"T", o.horizon},
               {"covariate_dim", g.d},
               {"ar_coeff", g.ar_coeff},
               {"demand_cap", problem == Problem::LotSizing ? json(g.demand_cap) : json(nullptr)},
               {"files", {"training.csv", "instance.json"}}};
  emit((dir / "metadata.json").string(), dump_json(meta), out);
}

void cmd_solve(const Options& o, const json& config, std::ostream& out, std::ostream& err) {
  const ProblemInstance inst = load_instance(o, err);
  const auto models = fit_models(inst, o);
  json report = {{"meta", meta_json(config, o.seed)}, {"instance", inst.name}, {"solver", o.solver}};
  if (o.solver == "exact") {
    const auto sol = solve_extensive(inst, models);
    report["objective"] = sol.objective;
    report["first_stage"] = sol.first_stage;
    report["tree_nodes"] = sol.node_decisions.size();
  } else if (o.solver == "sddp") {
    const auto run = solve_sddp(inst, models, sddp_config(o));
    report["objective"] = run.lb;
    report["first_stage"] = run.first_stage;
    report["lb"] = run.lb;
    report["ub"] = run.ub;
    report["ub_mean"] = run.ub_mean;
    report["ub_std"] = run.ub_std;
    report["iterations"] = run.iterations;
    report["stop_reason"] = run.stop_reason;
    report["binary_expansion"] = run.expanded;
    json trace = json::array();
    for (const auto& l : run.log)
      trace.push_back({{"iter", l.iter}, {"lb", l.lb}, {"ub", l.ub}, {"ub_mean", l.ub_mean}, {"ub_std", l.ub_std},
                       {"wall_ms", l.wall_ms}});
    report["trace"] = trace;
    if (!o.log.empty()) emit(o.log, run_log_text(run, metadata_header(config, o.seed)), out);
  } else {
    throw UsageError("--solver must be exact or sddp");
  }
  emit(o.out, dump_json(report), out);
}

void cmd_cuts_export(const Options& o, const json& config, std::ostream& out, std::ostream& err) {
  const ProblemInstance inst = load_instance(o, err);
  const auto models = fit_models(inst, o);
  const auto run = solve_sddp(inst, models, sddp_config(o));
  json j = pool_to_json(run.pool);
  j["meta"] = meta_json(config, o.seed);
  j["binary_expansion"] = run.expanded;
  j["lb"] = run.lb;
  j["iterations"] = run.iterations;
  if (!o.log.empty()) emit(o.log, run_log_text(run, metadata_header(config, o.seed)), out);
  emit(o.out, dump_json(j), out);
}

void cmd_evaluate(const Options& o, const json& config, std::ostream& out, std::ostream& err) {
  const TrainingSet test = read_training(o.test, "test", err);
  Vector totals(test.n_samples());
  std::vector<Vector> stage_costs(test.n_samples());

  if (o.mode == "basestock" || o.mode == "basestock-static") {
    // Lot sizing through the basestock approximation; needs only the data.
    TrainingSet training;
    if (!o.training.empty()) training = read_training(o.training, "training", err);
    else training = load_instance(o, err).training.value();
    if (test.horizon() != training.horizon()) throw UsageError("test and training horizons differ");
    LotSizingParams p;
    p.price_seed = o.price_seed ? o.price_seed : derive_seed(o.seed, 14);
    p.draw_prices();
    WeightSpec spec;
    if (!o.weights.empty()) spec = weight_spec(o);
    const auto models = fit_stage_models(training, {spec}, derive_seed(o.seed, 21), o.threads);
    const bool frozen = o.mode == "basestock-static";
    std::optional<BasestockPolicy> shared;
    if (!frozen) shared = fit_basestock(training, models, p, o.grid_points);
    parallel_for(test.n_samples(), o.threads, [&](std::size_t i) {
      PolicyRun r;
      if (frozen) {
        const WeightVector w = models.at(0).weights(test.x(i, 0));
        r = run_basestock(fit_basestock(training, models, p, o.grid_points, &w), models, p, test, i);
      } else {
        r = run_basestock(*shared, models, p, test, i);
      }
      totals[i] = r.total;
      stage_costs[i] = r.stage_costs;
    });
  } else {
    PolicyMode mode;
    if (o.mode == "resolve") mode = PolicyMode::Resolve;
    else if (o.mode == "static") mode = PolicyMode::Static;
    else throw UsageError("--mode must be resolve, static, basestock or basestock-static");
    const ProblemInstance inst = load_instance(o, err);
    if (test.horizon() != inst.horizon()) throw UsageError("test paths and instance have different horizons");
    const auto models = fit_models(inst, o);
    CutPool pool;
    bool expanded = false;
    SddpConfig sc = sddp_config(o);
    if (!o.cuts_in.empty()) {
      const json j = read_json(o.cuts_in, "cuts-in");
      pool = pool_from_json(j);
      expanded = j.value("binary_expansion", false);
    } else {
      auto run = solve_sddp(inst, models, sc);
      pool = std::move(run.pool);
      expanded = run.expanded;
    }
    const ProblemInstance policy_inst = expanded ? binary_expansion(inst, sc.expansion_bits) : inst;
    if (pool.horizon() != policy_inst.horizon()) throw UsageError("cut pool does not match the instance horizon");
    parallel_for(test.n_samples(), o.threads, [&](std::size_t i) {
      const auto r = run_cut_policy(policy_inst, models, pool, test, i, mode, sc.mip);
      totals[i] = r.total;
      stage_costs[i] = r.stage_costs;
    });
  }

  std::ostringstream os;
  os << metadata_header(config, o.seed);
  os << "path,total";
  const std::size_t stages = stage_costs.empty() ? 0 : stage_costs[0].size();
  for (std::size_t t = 0; t < stages; ++t) os << ",stage" << t;
  os << '\n';
  for (std::size_t i = 0; i < totals.size(); ++i) {
    os << i << ',' << format_double(totals[i]);
    for (double c : stage_costs[i]) os << ',' << format_double(c);
    os << '\n';
  }
  emit(o.out, os.str(), out);
}

void cmd_benchmark(const Options& o, const json& config, std::ostream& out) {
  BenchmarkConfig c;
  c.problem = parse_problem(o.problem);
  c.n_grid = split_sizes(o.n_grid);
  c.methods = split(o.methods);
  c.replications = o.full ? 100 : o.replications;
  c.test_paths = o.test_paths;
  c.T = o.horizon;
  c.seed = o.seed;
  c.threads = o.threads;
  c.timing = o.timing;
  c.knn_k = o.k;
  c.rf_min_leaf = o.rf_min_leaf;
  c.rf_trees = o.trees;
  c.rf_subsample = o.subsample;
  c.sddp_iterations = o.sddp_iterations;
  c.sddp_M = o.sddp_m;
  c.grid_points = o.grid_points;
  c.lotsizing_sddp = o.lotsizing_sddp;
  if (c.n_grid.empty() || c.methods.empty()) throw UsageError("benchmark needs at least one N and one method");
  for (const auto& m : c.methods) {
    try {
      (void)method_from_string(m);
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
  }
  const auto rows = experiment_curve(c);
  const std::string header = metadata_header(config, o.seed);
  std::ostringstream r, a;
  r << header;
  write_rows_csv(r, rows);
  a << header;
  write_aggregate_csv(a, aggregate(rows));
  if (o.out.empty()) {
    out << r.str() << a.str();
    return;
  }
  const fs::path dir(o.out);
  emit((dir / "results.csv").string(), r.str(), out);
  emit((dir / "curve.csv").string(), a.str(), out);
}

/// Path given to --config, found before the full parse so flags can override it.
std::string find_config(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  Binder bind;
  CLI::App app{"Covariate-weighted multistage stochastic optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "JSON file of option values; flags override it");
    bind.option(s, "threads", o.threads, "worker threads (default: logical cores)");
    bind.option(s, "seed", o.seed, "master seed");
    bind.flag(s, "timing", o.timing, "record wall-clock times (outputs stop being byte-stable)");
  };
  auto learner = [&](CLI::App* s) {
    bind.option(s, "weights", o.weights, "saa, knn, tree or rf");
    bind.option(s, "k", o.k, "kNN neighbours or tree min leaf (0: default rule)");
    bind.option(s, "trees", o.trees, "forest size");
    bind.option(s, "lambda", o.lambda, "tree regularity fraction");
    bind.option(s, "pi", o.pi, "random-split probability floor");
    bind.option(s, "subsample", o.subsample, "forest subsample size (0: default rule)");
    bind.option(s, "honesty", o.honesty, "ignore-response or half-split");
  };
  auto sddp = [&](CLI::App* s) {
    bind.option(s, "M", o.M, "forward samples per iteration");
    bind.option(s, "alpha", o.alpha, "upper-bound confidence level");
    bind.option(s, "epsilon", o.epsilon, "relative gap tolerance (negative: run to the iteration cap)");
    bind.option(s, "max-iter", o.max_iter, "iteration cap");
    bind.option(s, "cuts", o.cuts, "auto, benders, integer, lagrangian or integer+lagrangian");
    bind.flag(s, "sample-root", o.sample_root, "draw root covariates from the training x0 rows");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic training set and instance");
  common(gen);
  bind.option(gen, "problem", o.problem, "inventory or lotsizing");
  bind.option(gen, "n", o.n, "training paths");
  bind.option(gen, "horizon", o.horizon, "number of stages after the first");
  bind.option(gen, "weights", o.weights, "weight learner stored in the instance");
  bind.option(gen, "price-seed", o.price_seed, "lot-sizing price seed (0: derived)");
  bind.option(gen, "out", o.out, "output directory");

  auto* solve = app.add_subcommand("solve", "fit weights and solve an instance");
  common(solve);
  bind.option(solve, "instance", o.instance, "instance JSON");
  bind.option(solve, "training", o.training, "training CSV replacing the instance's own");
  learner(solve);
  bind.option(solve, "solver", o.solver, "exact or sddp");
  sddp(solve);
  bind.option(solve, "log", o.log, "iteration log CSV");
  bind.option(solve, "out", o.out, "report JSON (default: stdout)");

  auto* eval = app.add_subcommand("evaluate", "run a trained policy on test paths");
  common(eval);
  bind.option(eval, "instance", o.instance, "instance JSON");
  bind.option(eval, "training", o.training, "training CSV replacing the instance's own");
  bind.option(eval, "test", o.test, "test paths CSV");
  learner(eval);
  sddp(eval);
  bind.option(eval, "mode", o.mode, "resolve, static, basestock or basestock-static");
  bind.option(eval, "cuts-in", o.cuts_in, "trained cut pool JSON (skips training)");
  bind.option(eval, "grid-points", o.grid_points, "basestock grid size");
  bind.option(eval, "price-seed", o.price_seed, "lot-sizing price seed (0: derived)");
  bind.option(eval, "out", o.out, "per-path cost CSV (default: stdout)");

  auto* bench = app.add_subcommand("benchmark", "reproduce the out-of-sample cost curves");
  common(bench);
  bind.option(bench, "problem", o.problem, "inventory or lotsizing");
  bind.option(bench, "methods", o.methods, "comma-separated methods, e.g. saa,knn,rf,knn-static");
  bind.option(bench, "n-grid", o.n_grid, "comma-separated training sizes");
  bind.option(bench, "replications", o.replications, "training sets per (N, method)");
  bind.option(bench, "test-paths", o.test_paths, "out-of-sample paths");
  bind.option(bench, "horizon", o.horizon, "number of stages after the first");
  bind.option(bench, "k", o.k, "kNN neighbours (0: default rule)");
  bind.option(bench, "trees", o.trees, "forest size");
  bind.option(bench, "rf-min-leaf", o.rf_min_leaf, "forest min leaf size");
  bind.option(bench, "subsample", o.subsample, "forest subsample size (0: N - 1)");
  bind.option(bench, "sddp-iterations", o.sddp_iterations, "SDDP iterations per trained policy");
  bind.option(bench, "sddp-M", o.sddp_m, "SDDP forward samples per iteration");
  bind.option(bench, "grid-points", o.grid_points, "basestock grid size");
  bind.flag(bench, "lotsizing-sddp", o.lotsizing_sddp, "lot sizing through SDDP instead of basestock");
  bind.flag(bench, "full", o.full, "100 replications");
  bind.option(bench, "out", o.out, "output directory (default: stdout)");

  auto* cuts = app.add_subcommand("cuts-export", "train SDDP and write the cut pool");
  common(cuts);
  bind.option(cuts, "instance", o.instance, "instance JSON");
  bind.option(cuts, "training", o.training, "training CSV replacing the instance's own");
  learner(cuts);
  sddp(cuts);
  bind.option(cuts, "log", o.log, "iteration log CSV");
  bind.option(cuts, "out", o.out, "cut pool JSON (default: stdout)");

  try {
    // Config values first; the parse then overrides whatever flags were given.
    const std::string cfg = find_config(argc, argv);
    CLI::App* sub = nullptr;
    for (int i = 1; i < argc && !sub; ++i)
      for (auto* s : app.get_subcommands({}))
        if (s->get_name() == argv[i]) sub = s;
    if (!cfg.empty() && sub) bind.load(read_json(cfg, "config"), sub);

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsageError;
    }
    sub = app.get_subcommands().front();
    if (o.threads == 0) o.threads = default_threads();
    const json config = bind.dump(sub);

    const std::string name = sub->get_name();
    if (name == "generate") cmd_generate(o, config, out);
    else if (name == "solve") cmd_solve(o, config, out, err);
    else if (name == "evaluate") cmd_evaluate(o, config, out, err);
    else if (name == "benchmark") cmd_benchmark(o, config, out);
    else cmd_cuts_export(o, config, out, err);
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kSolverFailure;
  }
}

} // namespace prescriptor::cli
