#include "cli.hpp"

#include "semcom/oracle.hpp"
#include "semcom/random_instance.hpp"
#include "semcom/schemes.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

namespace semcom::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kRdOracleTol = 1e-3;
constexpr double kExactOracleTol = 1e-12;

std::string num(double x) { return fmt::format("{}", x); }
std::string num(Index x) { return fmt::format("{}", x); }
std::string flag(bool b) { return b ? "1" : "0"; }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int key_columns = 1;  // leading columns kept as identifiers in the long form

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::logic_error("table row width mismatch");
    rows.push_back(std::move(row));
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << text;
}

std::string csv_text(const Table& t) {
  std::string s;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    s += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return s;
}

// Tidy form: identifier columns, then variable,value.
Table long_form(const Table& t) {
  Table out;
  out.header.assign(t.header.begin(), t.header.begin() + t.key_columns);
  out.header.push_back("variable");
  out.header.push_back("value");
  for (const auto& r : t.rows) {
    for (std::size_t j = static_cast<std::size_t>(t.key_columns); j < r.size(); ++j) {
      std::vector<std::string> row(r.begin(), r.begin() + t.key_columns);
      row.push_back(t.header[j]);
      row.push_back(r[j]);
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

Table oracle_table() {
  Table t;
  t.header = {"check", "case", "value", "reference", "abs_diff", "tolerance", "pass"};
  t.key_columns = 2;
  return t;
}

// ---------------------------------------------------------------------------
// Config access. Every error names the JSON pointer of the offending entry.

struct Context {
  std::string subcommand;
  json config;
  fs::path out_dir;
  bool plot_data = false;
  bool with_oracle = false;
  json resolved = json::object();
  std::vector<std::string> outputs;
  std::ostream* log = nullptr;

  void emit(const std::string& stem, const Table& t) {
    write_text(out_dir / (stem + ".csv"), csv_text(t));
    outputs.push_back(stem + ".csv");
    if (plot_data) {
      write_text(out_dir / (stem + "_long.csv"), csv_text(long_form(t)));
      outputs.push_back(stem + "_long.csv");
    }
    *log << "wrote " << (out_dir / (stem + ".csv")).string() << " (" << t.rows.size() << " rows)\n";
  }

  // Writes oracle.csv and fails the run when any row failed.
  void emit_oracle(const Table& t) {
    emit("oracle", t);
    json failures = json::array();
    for (const auto& r : t.rows) {
      if (r.back() == "0") failures.push_back({{"check", r[0]}, {"case", r[1]}, {"value", r[2]}, {"reference", r[3]}});
    }
    if (!failures.empty()) {
      throw InvariantViolation(std::to_string(failures.size()) + " oracle check(s) failed",
                               json{{"config", config}, {"resolved", resolved}, {"failures", failures}}.dump(2));
    }
  }
};

std::string ptr(const std::string& key) { return "/" + key; }

bool has(const json& cfg, const std::string& key) { return cfg.contains(key) && !cfg[key].is_null(); }

double get_double(const json& cfg, const std::string& key, double fallback) {
  if (!has(cfg, key)) return fallback;
  if (!cfg[key].is_number()) throw ValidationError("expected a number", ptr(key));
  return cfg[key].get<double>();
}

long get_int(const json& cfg, const std::string& key, long fallback, long min_value) {
  if (!has(cfg, key)) return fallback;
  if (!cfg[key].is_number_integer()) throw ValidationError("expected an integer", ptr(key));
  const long v = cfg[key].get<long>();
  if (v < min_value) throw ValidationError("must be >= " + std::to_string(min_value), ptr(key));
  return v;
}

std::uint64_t get_seed(const json& cfg) {
  if (!has(cfg, "seed")) return 1;
  if (!cfg["seed"].is_number_unsigned()) throw ValidationError("expected a non-negative integer", "/seed");
  return cfg["seed"].get<std::uint64_t>();
}

std::string get_string(const json& cfg, const std::string& key, const std::string& fallback) {
  if (!has(cfg, key)) return fallback;
  if (!cfg[key].is_string()) throw ValidationError("expected a string", ptr(key));
  return cfg[key].get<std::string>();
}

std::vector<double> get_doubles(const json& cfg, const std::string& key) {
  const json& a = cfg[key];
  if (!a.is_array() || a.empty()) throw ValidationError("expected a non-empty array of numbers", ptr(key));
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ValidationError("expected a number", ptr(key) + "/" + std::to_string(i));
    out.push_back(a[i].get<double>());
  }
  return out;
}

std::vector<Index> get_ns(const json& cfg, std::vector<Index> fallback, Index min_value) {
  if (!has(cfg, "n")) return fallback;
  const json& v = cfg["n"];
  std::vector<Index> out;
  auto take = [&](const json& x, const std::string& where) {
    if (!x.is_number_integer()) throw ValidationError("expected an integer", where);
    const auto n = x.get<Index>();
    if (n < min_value) throw ValidationError("must be >= " + std::to_string(min_value), where);
    out.push_back(n);
  };
  if (v.is_array()) {
    if (v.empty()) throw ValidationError("expected at least one length", "/n");
    for (std::size_t i = 0; i < v.size(); ++i) take(v[i], "/n/" + std::to_string(i));
  } else {
    take(v, "/n");
  }
  return out;
}

ValidationError under(const std::string& prefix, const ValidationError& e) {
  std::string msg = e.what();
  if (!e.pointer().empty()) msg = msg.substr(e.pointer().size() + 2);
  return ValidationError(msg, prefix + e.pointer());
}

json read_json_file(const std::string& path, const std::string& where) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open '" + path + "'", where);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("'") + path + "' is not valid JSON: " + e.what(), where);
  }
}

bool uses_example_world(const json& cfg) {
  return !has(cfg, "instance") && get_string(cfg, "world", "example1") == "example1";
}

ProblemInstance resolve_instance(const json& cfg) {
  if (has(cfg, "instance")) {
    const json& v = cfg["instance"];
    const json doc = v.is_string() ? read_json_file(v.get<std::string>(), "/instance") : v;
    if (!doc.is_object()) throw ValidationError("expected an instance object or a path", "/instance");
    try {
      return instance_from_json(doc);
    } catch (const ValidationError& e) {
      throw under("/instance", e);
    }
  }
  const std::string world = get_string(cfg, "world", "example1");
  if (world != "example1") throw ValidationError("unknown world '" + world + "'", "/world");
  return example1_instance();
}

LearningRule resolve_rule(const json& cfg, const ProblemInstance& instance) {
  if (!has(cfg, "rule")) {
    if (uses_example_world(cfg)) return MapTableRule{example1_alice(instance).rows()};
    return GibbsRule{1.0};
  }
  json doc = cfg["rule"];
  if (doc.is_string()) {
    const std::string s = doc.get<std::string>();
    if (s == "erm") {
      doc = {{"rule", "erm"}};
    } else if (s.rfind("gibbs", 0) == 0) {
      double beta = 1.0;
      if (s.size() > 6 && s[5] == ':') {
        try {
          beta = std::stod(s.substr(6));
        } catch (const std::exception&) {
          throw ValidationError("bad inverse temperature in '" + s + "'", "/rule");
        }
      } else if (s != "gibbs") {
        throw ValidationError("expected 'gibbs' or 'gibbs:<beta>'", "/rule");
      }
      doc = {{"rule", "gibbs"}, {"beta", beta}};
    } else {
      doc = read_json_file(s, "/rule");
    }
  }
  try {
    return rule_from_json(doc);
  } catch (const ValidationError& e) {
    throw under("/rule", e);
  }
}

Posterior resolve_alice(const LearningRule& rule, const ProblemInstance& instance) {
  try {
    return fit(rule, instance);
  } catch (const ValidationError& e) {
    throw under("/rule", e);
  }
}

Distribution resolve_prior(const json& cfg, const Posterior& reference) {
  if (!has(cfg, "prior")) return reference.marginal();
  json v = cfg["prior"];
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "marginal") return reference.marginal();
    if (s == "uniform") return Distribution::uniform(reference.num_hypotheses());
    v = read_json_file(s, "/prior");
  }
  if (!v.is_array()) throw ValidationError("expected 'marginal', 'uniform', an array or a file", "/prior");
  Vector p(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ValidationError("expected a number", "/prior/" + std::to_string(i));
    p(static_cast<Index>(i)) = v[i].get<double>();
  }
  if (p.size() != reference.num_hypotheses()) {
    throw ValidationError("prior has " + std::to_string(p.size()) + " entries, expected " +
                              std::to_string(reference.num_hypotheses()),
                          "/prior");
  }
  try {
    return Distribution(p);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "/prior");
  }
}

CodingMode resolve_mode(const json& cfg) {
  const std::string m = get_string(cfg, "mode", "per_symbol");
  if (m == "per_symbol") return CodingMode::per_symbol;
  if (m == "block") return CodingMode::block;
  throw ValidationError("expected 'per_symbol' or 'block'", "/mode");
}

CodingOptions resolve_coding(const json& cfg) {
  CodingOptions o;
  o.slack = get_double(cfg, "slack", o.slack);
  if (!(o.slack >= 0.0)) throw ValidationError("must be >= 0", "/slack");
  return o;
}

json vector_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

void resolve_common(Context& ctx, const ProblemInstance& instance, const LearningRule& rule) {
  ctx.resolved["instance"] = instance_to_json(instance);
  ctx.resolved["rule"] = rule_to_json(rule);
}

std::vector<double> linspace(double lo, double hi, int points) {
  if (!(hi > lo)) return {lo};
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(lo + (hi - lo) * i / (points - 1));
  out.back() = hi;
  return out;
}

void oracle_row(Table& t, const std::string& check, const std::string& which, double value, double reference,
                double tol) {
  const double diff = std::abs(value - reference);
  t.add({check, which, num(value), num(reference), num(diff), num(tol), flag(diff <= tol)});
}

// ---------------------------------------------------------------------------

void cmd_rd_curve(Context& ctx) {
  const json& cfg = ctx.config;
  const ProblemInstance instance = resolve_instance(cfg);
  const LearningRule rule = resolve_rule(cfg, instance);
  const Posterior alice = resolve_alice(rule, instance);
  const Distribution prior = resolve_prior(cfg, alice);
  resolve_common(ctx, instance, rule);
  ctx.resolved["prior"] = vector_json(prior.probs());

  const EpsilonRange range = epsilon_range(instance, alice);
  std::vector<double> eps = has(cfg, "epsilons") ? get_doubles(cfg, "epsilons")
                                                 : linspace(range.min_epsilon, range.zero_rate_epsilon, 11);
  if (!std::is_sorted(eps.begin(), eps.end())) throw ValidationError("budgets must be ascending", "/epsilons");
  ctx.resolved["epsilons"] = eps;

  const RDCurve curve = rd_curve(instance, alice, eps);
  Table t;
  t.header = {"epsilon", "rate_bits", "rate_with_prior_bits", "converged_iters", "duality_gap"};
  for (const auto& pt : curve.points) {
    double with_prior = std::numeric_limits<double>::infinity();
    try {
      with_prior = solve_rd_with_prior(instance, alice, prior, pt.epsilon).rate;
    } catch (const SupportError&) {
    }
    t.add({num(pt.epsilon), num(pt.rate), num(with_prior), num(static_cast<Index>(pt.iterations)),
           num(pt.duality_gap)});
  }
  ctx.emit("rd-curve", t);

  if (ctx.with_oracle) {
    Table o = oracle_table();
    for (const auto& pt : curve.points) {
      try {
        const auto ref = rd_grid_oracle(instance, alice, pt.epsilon);
        oracle_row(o, "rd_rate", "epsilon=" + num(pt.epsilon), pt.rate, ref.rate, kRdOracleTol);
      } catch (const EnumerationTooLarge&) {
        o.add({"rd_rate", "epsilon=" + num(pt.epsilon), num(pt.rate), "skipped", "", num(kRdOracleTol), "1"});
      }
    }
    ctx.emit_oracle(o);
  }
}

void cmd_code(Context& ctx) {
  const json& cfg = ctx.config;
  const ProblemInstance instance = resolve_instance(cfg);
  const LearningRule rule = resolve_rule(cfg, instance);
  const Posterior alice = resolve_alice(rule, instance);
  const Distribution prior = resolve_prior(cfg, alice);
  const CodingMode mode = resolve_mode(cfg);
  const CodingOptions coding = resolve_coding(cfg);
  const Index n = get_ns(cfg, {20}, 1).front();
  const long trials = get_int(cfg, "trials", 10'000, 1);
  const std::uint64_t seed = get_seed(cfg);
  resolve_common(ctx, instance, rule);
  ctx.resolved["prior"] = vector_json(prior.probs());

  const CommonRandomness root(seed);
  CommonRandomness data = root.derive(0);
  std::vector<Index> datasets(static_cast<std::size_t>(n));
  for (auto& s : datasets) s = data.next_categorical(instance.datasets().marginal.probs());
  const SequenceCode code = code_sequence(alice, prior, datasets, root.derive(1), mode, coding);

  Table t;
  t.header = {"position", "kl_bits", "K", "index_bits", "tv_exact_or_estimate", "flagged_fallback", "tv_is_exact"};
  Table o = oracle_table();
  double kl_total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const CodeRecord& rec = code.records[static_cast<std::size_t>(i)];
    const Distribution q = alice.row(datasets[static_cast<std::size_t>(i)]);
    kl_total += rec.target_kl;
    std::string tv = "nan", exact = "0";
    if (mode == CodingMode::per_symbol) {
      const InducedTv itv = induced_tv(q, prior, rec.n_candidates, trials, mix64(seed + static_cast<std::uint64_t>(i)),
                                       1'000'000);
      tv = num(itv.tv);
      exact = flag(itv.exact);
      if (ctx.with_oracle) {
        try {
          const Distribution ref = mrc_enumeration_oracle(q, prior, rec.n_candidates, 1'000'000);
          const Distribution got = induced_distribution_exact(q, prior, rec.n_candidates);
          oracle_row(o, "mrc_induced", "position=" + num(i), (got.probs() - ref.probs()).cwiseAbs().maxCoeff(), 0.0,
                     kExactOracleTol);
        } catch (const EnumerationTooLarge&) {
          o.add({"mrc_induced", "position=" + num(i), "", "skipped", "", num(kExactOracleTol), "1"});
        }
      }
    }
    t.add({num(i), num(rec.target_kl), num(rec.n_candidates), num(rec.index_bits), tv, flag(rec.fallback), exact});
  }
  ctx.emit("code", t);
  const double rate = kl_total / static_cast<double>(n);
  const auto bounds = single_shot_bounds(rate, get_double(cfg, "harsha_constant", 0.0));
  *ctx.log << fmt::format("bits/model {} (mean D_KL {}, bound {} + slack {})\n",
                          code.total_bits / static_cast<double>(n), rate, bounds.upper_theis, coding.slack);
  if (ctx.with_oracle) ctx.emit_oracle(o);
}

Table coordination_table(bool with_bob) {
  Table t;
  t.header = {"n", "d_avg", "d_max", "bits_per_symbol", "tv_max_position", "trials"};
  if (with_bob) {
    t.header.push_back("bob");
    t.key_columns = 1;
  }
  return t;
}

void check_trace(Table& o, const std::string& which, const SequenceTrace& trace, const ProblemInstance& instance) {
  const SequenceDistortion ref = sequence_distortion_oracle(trace, instance);
  oracle_row(o, "sequence_d_avg", which, d_avg_seq(trace.alice_rows, trace.bob_rows, instance), ref.d_avg,
             kExactOracleTol);
  oracle_row(o, "sequence_d_max", which, d_max_seq(trace.alice_rows, trace.bob_rows, instance), ref.d_max,
             kExactOracleTol);
}

void cmd_coordinate(Context& ctx) {
  const json& cfg = ctx.config;
  const ProblemInstance instance = resolve_instance(cfg);
  const LearningRule rule = resolve_rule(cfg, instance);
  const Posterior target = resolve_alice(rule, instance);
  StrongOptions opts;
  opts.mode = resolve_mode(cfg);
  opts.coding = resolve_coding(cfg);
  opts.trials = get_int(cfg, "trials", 10'000, 1);
  const auto ns = get_ns(cfg, {10}, 1);
  const CommonRandomness root(get_seed(cfg));
  resolve_common(ctx, instance, rule);

  Table t = coordination_table(false);
  Table o = oracle_table();
  for (Index n : ns) {
    const StrongReport rep = simulate_strong(instance, target, n, root.derive(static_cast<std::uint64_t>(n)), opts);
    t.add({num(n), num(rep.d_avg), num(rep.d_max), num(rep.bits_per_symbol), num(rep.tv_max),
           num(static_cast<Index>(rep.trials))});
    if (ctx.with_oracle) check_trace(o, "n=" + num(n), rep.trace, instance);
  }
  ctx.emit("coordinate", t);
  if (ctx.with_oracle) ctx.emit_oracle(o);
}

void cmd_example1(Context& ctx) {
  const json& cfg = ctx.config;
  std::vector<Index> all;
  for (Index n = 2; n <= 50; ++n) all.push_back(n);
  const auto ns = get_ns(cfg, all, 2);
  const std::string bob = get_string(cfg, "bob", "both");
  if (bob != "both" && bob != "deterministic" && bob != "strong") {
    throw ValidationError("expected 'deterministic', 'strong' or 'both'", "/bob");
  }
  StrongOptions opts;
  opts.trials = get_int(cfg, "trials", 10'000, 1);
  opts.coding = resolve_coding(cfg);
  opts.mode = resolve_mode(cfg);
  const std::uint64_t seed = get_seed(cfg);
  const CommonRandomness root(seed);
  const ProblemInstance instance = example1_instance();
  const Posterior alice = example1_alice(instance);
  resolve_common(ctx, instance, MapTableRule{alice.rows()});

  const Matrix target = alice.joint();
  Table t = coordination_table(true);
  Table o = oracle_table();
  for (Index n : ns) {
    if (bob != "strong") {
      const Example1Report rep = run_example_1(n, seed);
      double tv_max = 0.0;
      for (const auto& q : rep.trace.bob_rows) tv_max = std::max(tv_max, 0.5 * (q.joint() - target).cwiseAbs().sum());
      t.add({num(n), num(rep.d_avg), num(rep.d_max), "0", num(tv_max), "0", "deterministic"});
      if (ctx.with_oracle) {
        const std::string which = "n=" + num(n);
        check_trace(o, which, rep.trace, instance);
        oracle_row(o, "example1_d_avg", which, rep.d_avg, n % 2 == 0 ? 0.0 : 1.0 / (2.0 * static_cast<double>(n)),
                   1e-15);
        oracle_row(o, "example1_d_max", which, rep.d_max, 0.5, 0.0);
      }
    }
    if (bob != "deterministic") {
      StrongOptions so = opts;
      so.reference = alice;
      const StrongReport rep = simulate_strong(instance, alice, n, root.derive(static_cast<std::uint64_t>(n)), so);
      t.add({num(n), num(rep.d_avg), num(rep.d_max), num(rep.bits_per_symbol), num(rep.tv_max),
             num(static_cast<Index>(rep.trials)), "strong"});
    }
  }
  ctx.emit("example1", t);
  if (ctx.with_oracle) ctx.emit_oracle(o);
}

std::string compressor_name(const Compressor& c) {
  std::string s;
  for (std::size_t i = 0; i < c.map.size(); ++i) s += (i ? "-" : "") + std::to_string(c.map[i]);
  return s;
}

void cmd_compare_schemes(Context& ctx) {
  const json& cfg = ctx.config;
  const ProblemInstance instance = resolve_instance(cfg);
  const LearningRule rule = resolve_rule(cfg, instance);
  const Posterior alice = resolve_alice(rule, instance);
  resolve_common(ctx, instance, rule);
  const Index n = instance.num_datasets();

  std::vector<Compressor> compressors;
  if (!has(cfg, "compressor") || (cfg["compressor"].is_string() && cfg["compressor"] == "all")) {
    if (n > 12) throw ValidationError("too many datasets to enumerate every compressor; give one", "/compressor");
    compressors = enumerate_compressors(n);
  } else {
    const json& a = cfg["compressor"];
    if (!a.is_array()) throw ValidationError("expected an array of symbols or 'all'", "/compressor");
    Compressor c;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number_integer()) throw ValidationError("expected an integer", "/compressor/" + std::to_string(i));
      c.map.push_back(a[i].get<Index>());
    }
    compressors.push_back(std::move(c));
  }
  bool auto_budget = true;
  double budget = 0.0;
  if (has(cfg, "rate_budget") && !(cfg["rate_budget"].is_string() && cfg["rate_budget"] == "auto")) {
    budget = get_double(cfg, "rate_budget", 0.0);
    if (!(budget >= 0.0)) throw ValidationError("must be >= 0", "/rate_budget");
    auto_budget = false;
  }
  const double r0 = solve_rd(instance, alice, 0.0).rate;

  Table t;
  t.header = {"compressor", "rate_budget", "mi_model", "mi_model2", "mi_residual", "mi_pair", "chain_rule_error",
              "delta_r", "bound1", "bound2", "measured_distortion", "scheme2_distortion", "feasible2",
              "boundary_holds", "inequality_checked"};
  Table o = oracle_table();
  for (const auto& rho : compressors) {
    double r = budget;
    if (auto_budget) {
      // Scheme 2 sends Ŝ, H(Ŝ) bits; scheme 1 gets the same budget up to R(0).
      Vector cell = Vector::Zero(std::max<Index>(rho.num_symbols(), 1));
      for (Index s = 0; s < std::min<Index>(n, static_cast<Index>(rho.map.size())); ++s) {
        if (rho.map[s] >= 0 && rho.map[s] < cell.size()) cell(rho.map[s]) += instance.datasets().marginal[s];
      }
      r = std::min(entropy(cell), r0);
    }
    const SchemeReport rep = compare_schemes(instance, rule, alice, r, rho);
    t.add({compressor_name(rho), num(rep.rate_budget), num(rep.mi_model), num(rep.mi_model2), num(rep.mi_residual),
           num(rep.mi_pair), num(rep.chain_rule_error), num(rep.delta_r), num(rep.bound1), num(rep.bound2),
           num(rep.measured_distortion), num(rep.scheme2_distortion), flag(rep.feasible2), flag(rep.boundary_holds),
           flag(rep.inequality_checked)});
    if (ctx.with_oracle) {
      const std::string which = "compressor=" + compressor_name(rho);
      try {
        const auto ref = rd_grid_oracle(instance, alice, rep.measured_distortion);
        oracle_row(o, "scheme1_rate", which, rep.mi_model, ref.rate, kRdOracleTol);
      } catch (const EnumerationTooLarge&) {
        o.add({"scheme1_rate", which, num(rep.mi_model), "skipped", "", num(kRdOracleTol), "1"});
      }
    }
  }
  ctx.emit("compare-schemes", t);
  if (ctx.with_oracle) ctx.emit_oracle(o);
}

void cmd_verify_bound(Context& ctx) {
  const json& cfg = ctx.config;
  const std::uint64_t seed = get_seed(cfg);
  const bool random = has(cfg, "instances") || get_string(cfg, "world", "") == "random";
  const long count = get_int(cfg, "instances", 20, 1);

  struct Case {
    ProblemInstance instance;
    Posterior alice;
  };
  std::vector<Case> cases;
  if (random) {
    Rng rng(seed);
    for (long i = 0; i < count; ++i) {
      ProblemInstance inst = random_instance(rng);
      const LearningRule r = random_rule(rng, inst);
      Posterior a = fit(r, inst);
      cases.push_back({std::move(inst), std::move(a)});
    }
    ctx.resolved["instances"] = count;
  } else {
    ProblemInstance inst = resolve_instance(cfg);
    const LearningRule rule = resolve_rule(cfg, inst);
    Posterior a = resolve_alice(rule, inst);
    resolve_common(ctx, inst, rule);
    cases.push_back({std::move(inst), std::move(a)});
  }

  Table t;
  t.header = {"instance", "epsilon", "rate_bits", "rate_star_bits", "delta_r_bits", "distortion", "bound", "slack"};
  t.key_columns = 2;
  Table o = oracle_table();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const Distribution prior = resolve_prior(cfg, c.alice);
    std::vector<double> eps;
    if (has(cfg, "epsilons")) {
      eps = get_doubles(cfg, "epsilons");
    } else {
      for (int k = 0; k <= 10; ++k) eps.push_back(c.instance.l_max() * k / 10.0);
    }
    const auto rows = verify_bound(c.instance, c.alice, prior, eps);
    for (const auto& r : rows) {
      t.add({std::to_string(i), num(r.epsilon), num(r.rate), num(r.rate_star), num(r.delta_r), num(r.distortion),
             num(r.bound), num(r.slack)});
    }
    if (ctx.with_oracle && (prior.probs().array() > 0.0).all()) {
      // ε = 0 and the middle of the grid.
      for (std::size_t k : {std::size_t{0}, rows.size() / 2}) {
        const std::string which = "instance=" + std::to_string(i) + " epsilon=" + num(rows[k].epsilon);
        try {
          const auto ref = rd_grid_oracle(c.instance, c.alice, rows[k].epsilon, {}, OracleObjective::kl_to_prior, prior);
          oracle_row(o, "prior_rate", which, rows[k].rate, ref.rate, kRdOracleTol);
        } catch (const EnumerationTooLarge&) {
          o.add({"prior_rate", which, num(rows[k].rate), "skipped", "", num(kRdOracleTol), "1"});
        }
      }
    }
  }
  ctx.emit("verify-bound", t);
  *ctx.log << "bound holds on " << cases.size() << " instance(s)\n";
  if (ctx.with_oracle) ctx.emit_oracle(o);
}

void cmd_audit(Context& ctx) {
  const json& cfg = ctx.config;
  const std::uint64_t seed = get_seed(cfg);
  const long count = get_int(cfg, "instances", 10, 1);
  Rng rng(seed);
  RandomInstanceOptions small;
  small.max_hypotheses = 3;
  small.max_datasets = 3;
  Table o = oracle_table();
  for (long i = 0; i < count; ++i) {
    ProblemInstance inst = random_instance(rng, small);
    while (inst.num_datasets() * (inst.num_hypotheses() - 1) > 4) inst = random_instance(rng, small);
    const Posterior alice = fit(random_rule(rng, inst), inst);
    const std::string id = "instance=" + std::to_string(i);

    const EpsilonRange range = epsilon_range(inst, alice);
    for (double f : {0.05, 0.5, 0.95}) {
      const double e = range.min_epsilon + f * (range.zero_rate_epsilon - range.min_epsilon);
      const std::string which = id + " epsilon=" + num(e);
      oracle_row(o, "rd_rate", which, solve_rd(inst, alice, e).rate, rd_grid_oracle(inst, alice, e).rate,
                 kRdOracleTol);
      const Distribution uni = Distribution::uniform(inst.num_hypotheses());
      oracle_row(o, "prior_rate", which, solve_rd_with_prior(inst, alice, uni, e).rate,
                 rd_grid_oracle(inst, alice, e, {}, OracleObjective::kl_to_prior, uni).rate, kRdOracleTol);
    }
    oracle_row(o, "kl_rate_marginal", id, kl_rate(alice, alice.marginal(), inst), mutual_information(alice), 1e-10);

    const Index nh = inst.num_hypotheses();
    const Distribution q = random_distribution(rng, nh, 0.3);
    const Distribution p = random_distribution(rng, nh);
    for (Index k = 1; k <= 4; ++k) {
      const Distribution got = induced_distribution_exact(q, p, k);
      const Distribution ref = mrc_enumeration_oracle(q, p, k);
      oracle_row(o, "mrc_induced", id + " K=" + num(k), (got.probs() - ref.probs()).cwiseAbs().maxCoeff(), 0.0,
                 kExactOracleTol);
    }

    const auto schedule = random_deterministic_schedule(rng, inst, 5);
    const SequenceTrace trace = simulate_empirical_deterministic(inst, alice, schedule, 5, seed + i);
    check_trace(o, id, trace, inst);
    oracle_row(o, "type_identity", id, d_avg_seq(trace.alice_rows, trace.bob_rows, inst),
               d_sem(alice, schedule_type(schedule), inst), 1e-10);
  }
  ctx.resolved["instances"] = count;
  ctx.emit_oracle(o);
}

using Command = std::function<void(Context&)>;

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"rd-curve", cmd_rd_curve},         {"code", cmd_code},
      {"coordinate", cmd_coordinate},     {"example1", cmd_example1},
      {"compare-schemes", cmd_compare_schemes}, {"verify-bound", cmd_verify_bound},
      {"audit", cmd_audit},
  };
  return table;
}

// Flag values become JSON so that config files and flags share one validator.
struct Flags {
  std::string config, instance, rule, world, prior, mode, epsilons, n, compressor, rate_budget, bob;
  std::string seed, trials, instances, slack, harsha_constant;
  std::string out = "out";
  bool plot_data = false, with_oracle = false;
};

json parse_scalar(const std::string& text, const std::string& key) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    throw ValidationError("cannot parse '" + text + "'", ptr(key));
  }
}

json parse_list(const std::string& text, const std::string& key) {
  if (!text.empty() && text.front() == '[') return parse_scalar(text, key);
  const auto colon = text.find(':');
  if (key == "n" && colon != std::string::npos) {
    const json lo = parse_scalar(text.substr(0, colon), key), hi = parse_scalar(text.substr(colon + 1), key);
    if (!lo.is_number_integer() || !hi.is_number_integer() || lo.get<long>() > hi.get<long>()) {
      throw ValidationError("expected a range lo:hi", ptr(key));
    }
    json a = json::array();
    for (long v = lo.get<long>(); v <= hi.get<long>(); ++v) a.push_back(v);
    return a;
  }
  json a = json::array();
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    a.push_back(parse_scalar(text.substr(start, comma - start), key));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return a;
}

json merge_flags(const Flags& f) {
  json cfg = json::object();
  if (!f.config.empty()) {
    cfg = read_json_file(f.config, "");
    if (!cfg.is_object()) throw ValidationError("config must be a JSON object", "");
  }
  auto text_or_json = [&](const std::string& v, const std::string& key, char open) {
    if (v.empty()) return;
    cfg[key] = v.front() == open ? parse_scalar(v, key) : json(v);
  };
  text_or_json(f.instance, "instance", '{');
  text_or_json(f.rule, "rule", '{');
  text_or_json(f.prior, "prior", '[');
  if (!f.world.empty()) cfg["world"] = f.world;
  if (!f.mode.empty()) cfg["mode"] = f.mode;
  if (!f.bob.empty()) cfg["bob"] = f.bob;
  if (!f.epsilons.empty()) cfg["epsilons"] = parse_list(f.epsilons, "epsilons");
  if (!f.n.empty()) {
    json v = parse_list(f.n, "n");
    cfg["n"] = v.size() == 1 ? v[0] : v;
  }
  if (!f.compressor.empty()) cfg["compressor"] = f.compressor == "all" ? json("all") : parse_list(f.compressor, "compressor");
  if (!f.rate_budget.empty()) cfg["rate_budget"] = f.rate_budget == "auto" ? json("auto") : parse_scalar(f.rate_budget, "rate_budget");
  if (!f.seed.empty()) cfg["seed"] = parse_scalar(f.seed, "seed");
  if (!f.trials.empty()) cfg["trials"] = parse_scalar(f.trials, "trials");
  if (!f.instances.empty()) cfg["instances"] = parse_scalar(f.instances, "instances");
  if (!f.slack.empty()) cfg["slack"] = parse_scalar(f.slack, "slack");
  if (!f.harsha_constant.empty()) cfg["harsha_constant"] = parse_scalar(f.harsha_constant, "harsha_constant");
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rate-distortion, channel simulation and coordination experiments for communicating learned beliefs", "semcom"};
  app.set_version_flag("--version", std::string(SEMCOM_VERSION));
  app.require_subcommand(1);
  Flags f;
  const std::map<std::string, std::string> about = {
      {"rd-curve", "rate-distortion curve R(epsilon), with and without a coding prior"},
      {"code", "channel-simulate Alice's beliefs for n datasets"},
      {"coordinate", "strong coordination by channel simulation over n positions"},
      {"example1", "the two-hypothesis world: deterministic versus simulated Bob"},
      {"compare-schemes", "send the model versus send compressed data"},
      {"verify-bound", "check the distortion-rate bound over an epsilon grid"},
      {"audit", "oracle sweep over random small instances"},
  };
  for (const auto& [name, _] : commands()) {
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", f.config, "JSON config file; flags override its keys");
    sub->add_option("--out", f.out, "output directory")->capture_default_str();
    sub->add_flag("--plot-data", f.plot_data, "also write long-format tables");
    sub->add_flag("--with-oracle", f.with_oracle, "cross-check against brute-force oracles");
    sub->add_option("--seed", f.seed, "64-bit seed");
    sub->add_option("--instance", f.instance, "instance JSON (inline or path)");
    sub->add_option("--world", f.world, "built-in world: example1 | random");
    sub->add_option("--rule", f.rule, "learning rule: JSON, path, erm, gibbs or gibbs:<beta>");
    sub->add_option("--prior", f.prior, "coding prior: marginal | uniform | [p0,...] | path");
    sub->add_option("--epsilons", f.epsilons, "comma-separated budgets");
    sub->add_option("--n", f.n, "sequence length(s): n, a,b,c or lo:hi");
    sub->add_option("--trials", f.trials, "Monte Carlo repetitions");
    sub->add_option("--slack", f.slack, "bits added to D_KL when sizing K");
    sub->add_option("--mode", f.mode, "per_symbol | block");
    sub->add_option("--rate-budget", f.rate_budget, "bits, or auto");
    sub->add_option("--compressor", f.compressor, "comma-separated map S -> S-hat, or all");
    sub->add_option("--instances", f.instances, "number of random instances");
    sub->add_option("--bob", f.bob, "example1: deterministic | strong | both");
    sub->add_option("--harsha-constant", f.harsha_constant, "display constant of the Harsha bound");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  Context ctx;
  ctx.log = &out;
  ctx.plot_data = f.plot_data;
  ctx.with_oracle = f.with_oracle;
  ctx.out_dir = f.out;
  for (const auto& [name, _] : commands()) {
    if (app.got_subcommand(name)) ctx.subcommand = name;
  }
  try {
    ctx.config = merge_flags(f);
    fs::create_directories(ctx.out_dir);
    commands().at(ctx.subcommand)(ctx);
    const json manifest = {
        {"subcommand", ctx.subcommand},
        {"version", SEMCOM_VERSION},
        {"generator", std::string(CommonRandomness::kGeneratorId)},
        {"seed", get_seed(ctx.config)},
        {"config", ctx.config},
        {"resolved", ctx.resolved},
        {"assumptions",
         {{"common_randomness", "unlimited: shared seed, cr_bits reported for display only"},
          {"harsha_constant", get_double(ctx.config, "harsha_constant", 0.0)}}},
        {"outputs", ctx.outputs},
    };
    write_text(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SupportError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EnumerationTooLarge& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvariantViolation& e) {
    err << "invariant violated: " << e.what() << "\n";
    try {
      fs::create_directories(ctx.out_dir);
      write_text(ctx.out_dir / "repro.json", e.repro().empty() ? json{{"config", ctx.config}}.dump(2) + "\n"
                                                               : e.repro() + "\n");
      err << "repro written to " << (ctx.out_dir / "repro.json").string() << "\n";
    } catch (const std::exception&) {
    }
    return kExitInvariant;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace semcom::cli
