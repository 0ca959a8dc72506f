#include "cybergen/experiments/config.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace cybergen::experiments {

namespace {

using Keys = std::set<std::string>;

void check_keys(const toml::table& t, const Keys& allowed, const std::string& where) {
  for (const auto& [k, v] : t) {
    if (!allowed.count(std::string(k.str())))
      throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + std::string(k.str()) + "'");
  }
}

const toml::table* section(const toml::table& root, const char* name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  const auto* t = node->as_table();
  if (!t) throw ConfigError(std::string("'") + name + "' must be a table");
  return t;
}

std::string key_path(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

double as_number(const toml::node& n, const std::string& path) {
  if (const auto* f = n.as_floating_point()) return f->get();
  if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
  throw ConfigError("'" + path + "' must be a number");
}

void get(const toml::table& t, const std::string& where, const char* key, double& out) {
  if (const auto* n = t.get(key)) out = as_number(*n, key_path(where, key));
}

void get(const toml::table& t, const std::string& where, const char* key, std::optional<double>& out) {
  if (const auto* n = t.get(key)) out = as_number(*n, key_path(where, key));
}

std::int64_t as_integer(const toml::node& n, const std::string& path) {
  const auto* i = n.as_integer();
  if (!i) throw ConfigError("'" + path + "' must be an integer");
  return i->get();
}

template <class Int>
void get_int(const toml::table& t, const std::string& where, const char* key, Int& out) {
  const auto* n = t.get(key);
  if (!n) return;
  const auto v = as_integer(*n, key_path(where, key));
  if constexpr (std::is_unsigned_v<Int>) {
    if (v < 0) throw ConfigError("'" + key_path(where, key) + "' must be non-negative");
  }
  out = static_cast<Int>(v);
}

void get(const toml::table& t, const std::string& where, const char* key, std::string& out) {
  const auto* n = t.get(key);
  if (!n) return;
  const auto* s = n->as_string();
  if (!s) throw ConfigError("'" + key_path(where, key) + "' must be a string");
  out = s->get();
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || p.rfind("bundled:", 0) == 0 || base.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ScenarioConfig ScenarioConfig::from_toml(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  check_keys(root,
             {"seed", "network", "grid", "surrogate", "kinetics", "initial_state", "horizon", "inputs", "mismatch",
              "noise", "estimator", "design", "solver"},
             "");

  ScenarioConfig c;
  if (const auto* n = root.get("seed")) {
    const auto v = as_integer(*n, "seed");
    if (v < 0) throw ConfigError("'seed' must be non-negative");
    c.seed = static_cast<std::uint64_t>(v);
    c.seed_given = true;
  }
  if (const auto* t = section(root, "network")) {
    check_keys(*t, {"path", "acetate_per_growth"}, "network");
    get(*t, "network", "path", c.network);
    get(*t, "network", "acetate_per_growth", c.acetate_per_growth);
  }
  if (const auto* t = section(root, "grid")) {
    check_keys(*t, {"points", "max_flux"}, "grid");
    get_int(*t, "grid", "points", c.grid_points);
    get(*t, "grid", "max_flux", c.grid_max_flux);
  }
  if (const auto* t = section(root, "surrogate")) {
    check_keys(*t,
               {"artifact", "dataset", "hidden_layers", "neurons", "activation", "learning_rate", "optimizer",
                "momentum", "patience", "max_epochs", "batch_size"},
               "surrogate");
    get(*t, "surrogate", "artifact", c.surrogate_artifact);
    get(*t, "surrogate", "dataset", c.dataset);
    auto& h = c.hyper;
    get_int(*t, "surrogate", "hidden_layers", h.hidden_layers);
    get_int(*t, "surrogate", "neurons", h.neurons);
    get_int(*t, "surrogate", "patience", h.patience);
    get_int(*t, "surrogate", "max_epochs", h.max_epochs);
    get_int(*t, "surrogate", "batch_size", h.batch_size);
    get(*t, "surrogate", "learning_rate", h.learning_rate);
    get(*t, "surrogate", "momentum", h.momentum);
    std::string s;
    get(*t, "surrogate", "activation", s);
    try {
      if (!s.empty()) h.activation = surrogate::activation_from_string(s);
      s.clear();
      get(*t, "surrogate", "optimizer", s);
      if (!s.empty()) h.optimizer = surrogate::optimizer_from_string(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (const auto* t = section(root, "kinetics")) {
    check_keys(*t,
               {"cell", "theta1", "theta2", "theta3", "theta4", "theta5", "theta6", "theta7", "v_glc", "k_cat",
                "eukaryote"},
               "kinetics");
    auto& k = c.kinetics;
    std::string cell;
    get(*t, "kinetics", "cell", cell);
    if (!cell.empty()) {
      try {
        c.cell = model::cell_type_from_string(cell);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    get(*t, "kinetics", "theta1", k.theta1);
    get(*t, "kinetics", "theta2", k.theta2);
    get(*t, "kinetics", "theta3", k.theta3);
    get(*t, "kinetics", "theta4", k.theta4);
    get(*t, "kinetics", "theta5", k.theta5);
    get(*t, "kinetics", "theta6", k.theta6);
    get(*t, "kinetics", "theta7", k.theta7);
    get(*t, "kinetics", "v_glc", k.v_glc);
    if (const auto* kc = section(*t, "k_cat")) {
      k.k_cat.clear();
      for (const auto& [name, v] : *kc) k.k_cat[std::string(name.str())] = as_number(v, "kinetics.k_cat");
    }
    if (const auto* e = section(*t, "eukaryote")) {
      const std::string w = "kinetics.eukaryote";
      check_keys(*e, {"theta1_p", "theta2_p", "theta3_p", "theta4_p", "k_tl", "d_p"}, w);
      get(*e, w, "theta1_p", k.eukaryote.theta1_p);
      get(*e, w, "theta2_p", k.eukaryote.theta2_p);
      get(*e, w, "theta3_p", k.eukaryote.theta3_p);
      get(*e, w, "theta4_p", k.eukaryote.theta4_p);
      get(*e, w, "k_tl", k.eukaryote.k_tl);
      get(*e, w, "d_p", k.eukaryote.d_p);
    }
  }
  if (const auto* t = section(root, "initial_state")) {
    check_keys(*t, {"glc", "ita", "ace", "b", "e"}, "initial_state");
    get(*t, "initial_state", "glc", c.glc0);
    get(*t, "initial_state", "ita", c.ita0);
    get(*t, "initial_state", "ace", c.ace0);
    get(*t, "initial_state", "b", c.b0);
    get(*t, "initial_state", "e", c.e0);
  }
  if (const auto* t = section(root, "horizon")) {
    check_keys(*t, {"t0", "tf", "n_intervals", "dt"}, "horizon");
    get(*t, "horizon", "t0", c.t0);
    get(*t, "horizon", "tf", c.tf);
    get_int(*t, "horizon", "n_intervals", c.n_intervals);
    get(*t, "horizon", "dt", c.dt);
  }
  if (const auto* t = section(root, "inputs")) {
    check_keys(*t, {"u_min", "u_max"}, "inputs");
    get(*t, "inputs", "u_min", c.u_min);
    get(*t, "inputs", "u_max", c.u_max);
  }
  if (const auto* t = section(root, "mismatch")) {
    check_keys(*t, {"factor"}, "mismatch");
    get(*t, "mismatch", "factor", c.mismatch);
  }
  if (const auto* t = section(root, "noise")) {
    check_keys(*t, {"std_fraction", "seed"}, "noise");
    get(*t, "noise", "std_fraction", c.noise_std);
    if (const auto* n = t->get("seed")) {
      const auto v = as_integer(*n, "noise.seed");
      if (v < 0) throw ConfigError("'noise.seed' must be non-negative");
      c.noise_seed = static_cast<std::uint64_t>(v);
    }
  }
  if (const auto* t = section(root, "estimator")) {
    check_keys(*t, {"p", "r", "window"}, "estimator");
    get(*t, "estimator", "p", c.estimator_p);
    get(*t, "estimator", "r", c.estimator_r);
    get_int(*t, "estimator", "window", c.estimator_window);
  }
  if (const auto* t = section(root, "design")) {
    check_keys(*t, {"theta2"}, "design");
    if (const auto* n = t->get("theta2")) {
      const auto* arr = n->as_array();
      if (!arr) throw ConfigError("'design.theta2' must be an array");
      c.theta2_values.clear();
      for (const auto& v : *arr) c.theta2_values.push_back(as_number(v, "design.theta2"));
    }
  }
  if (const auto* t = section(root, "solver")) {
    check_keys(*t, {"max_iterations", "pg_tol", "ftol", "fd_step", "threads"}, "solver");
    get_int(*t, "solver", "max_iterations", c.solver.max_iterations);
    get(*t, "solver", "pg_tol", c.solver.pg_tol);
    get(*t, "solver", "ftol", c.solver.ftol);
    get(*t, "solver", "fd_step", c.solver.fd_step);
    get_int(*t, "solver", "threads", c.threads);
  }

  c.network = resolve_path(c.network, base_dir);
  c.surrogate_artifact = resolve_path(c.surrogate_artifact, base_dir);
  c.dataset = resolve_path(c.dataset, base_dir);
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_toml(ss.str(), path.parent_path());
}

std::string ScenarioConfig::to_toml() const {
  toml::table root;
  root.insert("seed", static_cast<std::int64_t>(seed));
  root.insert("network", toml::table{{"path", network}, {"acetate_per_growth", acetate_per_growth}});
  root.insert("grid", toml::table{{"points", static_cast<std::int64_t>(grid_points)}, {"max_flux", grid_max_flux}});

  toml::table s{{"hidden_layers", hyper.hidden_layers},
                {"neurons", hyper.neurons},
                {"activation", surrogate::to_string(hyper.activation)},
                {"learning_rate", hyper.learning_rate},
                {"optimizer", surrogate::to_string(hyper.optimizer)},
                {"momentum", hyper.momentum},
                {"patience", hyper.patience},
                {"max_epochs", hyper.max_epochs},
                {"batch_size", hyper.batch_size}};
  if (!surrogate_artifact.empty()) s.insert("artifact", surrogate_artifact);
  if (!dataset.empty()) s.insert("dataset", dataset);
  root.insert("surrogate", std::move(s));

  const auto& k = kinetics;
  toml::table kc;
  for (const auto& [name, v] : k.k_cat) kc.insert(name, v);
  toml::table eu{{"theta1_p", k.eukaryote.theta1_p}, {"k_tl", k.eukaryote.k_tl}, {"d_p", k.eukaryote.d_p}};
  if (k.eukaryote.theta2_p) eu.insert("theta2_p", *k.eukaryote.theta2_p);
  if (k.eukaryote.theta3_p) eu.insert("theta3_p", *k.eukaryote.theta3_p);
  if (k.eukaryote.theta4_p) eu.insert("theta4_p", *k.eukaryote.theta4_p);
  root.insert("kinetics", toml::table{{"cell", model::to_string(cell)},
                                      {"theta1", k.theta1},
                                      {"theta2", k.theta2},
                                      {"theta3", k.theta3},
                                      {"theta4", k.theta4},
                                      {"theta5", k.theta5},
                                      {"theta6", k.theta6},
                                      {"theta7", k.theta7},
                                      {"v_glc", k.v_glc},
                                      {"k_cat", std::move(kc)},
                                      {"eukaryote", std::move(eu)}});
  root.insert("initial_state", toml::table{{"glc", glc0}, {"ita", ita0}, {"ace", ace0}, {"b", b0}, {"e", e0}});
  root.insert("horizon", toml::table{{"t0", t0},
                                     {"tf", tf},
                                     {"n_intervals", static_cast<std::int64_t>(n_intervals)},
                                     {"dt", dt}});
  root.insert("inputs", toml::table{{"u_min", u_min}, {"u_max", u_max}});
  root.insert("mismatch", toml::table{{"factor", mismatch}});
  toml::table noise{{"std_fraction", noise_std}};
  if (noise_seed) noise.insert("seed", static_cast<std::int64_t>(*noise_seed));
  root.insert("noise", std::move(noise));
  root.insert("estimator", toml::table{{"p", estimator_p},
                                       {"r", estimator_r},
                                       {"window", static_cast<std::int64_t>(estimator_window)}});
  toml::array th;
  for (double v : theta2_values) th.push_back(v);
  root.insert("design", toml::table{{"theta2", std::move(th)}});
  root.insert("solver", toml::table{{"max_iterations", solver.max_iterations},
                                    {"pg_tol", solver.pg_tol},
                                    {"ftol", solver.ftol},
                                    {"fd_step", solver.fd_step},
                                    {"threads", static_cast<std::int64_t>(threads)}});
  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

void ScenarioConfig::validate() const {
  try {
    kinetics.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(mismatch > 0.0, "mismatch.factor must be positive");
  require(noise_std >= 0.0, "noise.std_fraction must be non-negative");
  require(tf > t0, "horizon.tf must exceed horizon.t0");
  require(n_intervals > 0, "horizon.n_intervals must be positive");
  require(dt > 0.0, "horizon.dt must be positive");
  require(u_min >= 0.0 && u_max >= u_min, "inputs need 0 <= u_min <= u_max");
  require(glc0 >= 0.0 && ita0 >= 0.0 && ace0 >= 0.0 && b0 >= 0.0 && e0 >= 0.0,
          "initial_state values must be non-negative");
  require(estimator_p > 0.0 && estimator_r > 0.0, "estimator weights must be positive");
  require(grid_points >= 2, "grid.points must be at least 2");
  require(grid_max_flux > 0.0, "grid.max_flux must be positive");
  require(acetate_per_growth >= 0.0, "network.acetate_per_growth must be non-negative");
  require(hyper.hidden_layers >= 1 && hyper.neurons >= 1, "surrogate needs at least one hidden neuron");
  require(hyper.learning_rate > 0.0, "surrogate.learning_rate must be positive");
  require(hyper.max_epochs >= 1 && hyper.patience >= 1 && hyper.batch_size >= 0,
          "surrogate epochs, patience and batch_size are out of range");
  require(!theta2_values.empty(), "design.theta2 must not be empty");
  for (double v : theta2_values) require(v >= 0.0, "design.theta2 values must be non-negative");
  require(solver.max_iterations > 0 && solver.pg_tol > 0.0 && solver.fd_step > 0.0, "solver settings out of range");
  for (const auto* p : {&surrogate_artifact, &dataset})
    require(p->empty() || std::filesystem::exists(*p), "file not found: " + *p);
  require(network.rfind("bundled:", 0) == 0 || std::filesystem::exists(network), "network not found: " + network);
}

std::uint64_t ScenarioConfig::stream_seed(SeedStream s) const {
  static constexpr const char* names[] = {"split", "training", "noise"};
  const std::uint64_t tag = hash_name(names[static_cast<int>(s)]);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> from_file,
                           std::uint64_t fallback) {
  if (flag) return *flag;
  if (from_file) return *from_file;
  if (const char* env = std::getenv("CYBERGEN_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("CYBERGEN_SEED is not an unsigned integer: ") + env);
  }
  return fallback;
}

}  // namespace cybergen::experiments
