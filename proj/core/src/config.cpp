#include "polard/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace polard {

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::invalid_argument(path.empty() ? message : path + ": " + message),
      path_(std::move(path)) {}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Strict view of one JSON object: every key must be consumed before finish().
class Obj {
 public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string at(const std::string& key) const { return join(path_, key); }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return as_number(j_.at(key), at(key));
  }

  std::optional<double> opt_number(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return as_number(j_.at(key), at(key));
  }

  long long integer(const std::string& key, long long fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return as_integer(j_.at(key), at(key));
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const long long x = as_integer(v, at(key));
    if (x < 0) throw ConfigError(at(key), "must be >= 0");
    return static_cast<std::uint64_t>(x);
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(at(key), "must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ConfigError(at(key), "must be a string");
    return j_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    seen_.insert(key);
    const Json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(at(key), "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_number(v[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    seen_.insert(key);
    const Json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(at(key), "must be an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string())
        throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "must be a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(at(key), "unknown key '" + key + "'");
  }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
    return x;
  }

  static long long as_integer(const Json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::isfinite(x) && std::floor(x) == x && std::abs(x) < 9e15)
        return static_cast<long long>(x);
    }
    throw ConfigError(path, "must be an integer");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

int to_int(long long x, const std::string& path) {
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(path, "is out of range");
  return static_cast<int>(x);
}

std::vector<DimensionSpec> parse_dims(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "must be an array of dimensions");
  std::vector<DimensionSpec> dims;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    Obj d(j[i], p);
    DimensionSpec spec;
    spec.name = d.string("name", "x" + std::to_string(i + 1));
    if (!d.has("min")) throw ConfigError(d.at("min"), "is required");
    if (!d.has("max")) throw ConfigError(d.at("max"), "is required");
    if (!d.has("step")) throw ConfigError(d.at("step"), "is required");
    spec.lower = d.number("min", 0.0);
    spec.upper = d.number("max", 0.0);
    spec.step = d.number("step", 1.0);
    d.finish();
    if (!(spec.step > 0.0)) throw ConfigError(d.at("step"), "must be > 0");
    if (spec.lower > spec.upper) throw ConfigError(d.at("max"), "must be >= min");
    dims.push_back(std::move(spec));
  }
  if (dims.empty()) throw ConfigError(path, "must list at least one dimension");
  return dims;
}

Json dims_json(const std::vector<DimensionSpec>& dims) {
  Json out = Json::array();
  for (const auto& d : dims)
    out.push_back({{"name", d.name}, {"min", d.lower}, {"max", d.upper}, {"step", d.step}});
  return out;
}

NoiseParams parse_noise(Obj& o, NoiseParams fallback) {
  NoiseParams n;
  n.c_p = o.number("c_p", fallback.c_p);
  n.c_c = o.number("c_c", fallback.c_c);
  n.c_o = o.number("c_o", fallback.c_o);
  o.finish();
  return n;
}

BenchmarkFunction parse_truth(const Json& j, const std::string& path,
                              const std::filesystem::path& base_dir) {
  Obj t(j, path);
  const std::string kind = t.string("kind", "");
  if (kind == "hartmann3") {
    t.finish();
    return BenchmarkFunction::hartmann3();
  }
  if (kind == "hartmann6") {
    t.finish();
    return BenchmarkFunction::hartmann6();
  }
  if (kind == "grid_table") {
    if (t.has("path")) {
      std::filesystem::path file = t.string("path", "");
      t.finish();
      if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
      try {
        return load_grid_table(file);
      } catch (const ConfigError& e) {
        throw ConfigError(t.at("path"), e.what());
      }
    }
    if (!t.has("dims") || !t.has("values"))
      throw ConfigError(path, "grid_table needs either 'path' or both 'dims' and 'values'");
    auto dims = parse_dims(t.raw("dims"), t.at("dims"));
    auto values = t.numbers("values");
    t.finish();
    try {
      return BenchmarkFunction::grid_table(std::move(dims), std::move(values));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(t.at("values"), e.what());
    }
  }
  if (kind.empty()) throw ConfigError(t.at("kind"), "is required");
  throw ConfigError(t.at("kind"), "unknown benchmark '" + kind +
                                      "' (expected hartmann3, hartmann6 or grid_table)");
}

Json truth_json(const BenchmarkFunction& f) {
  switch (f.kind()) {
    case BenchmarkKind::hartmann3: return {{"kind", "hartmann3"}};
    case BenchmarkKind::hartmann6: return {{"kind", "hartmann6"}};
    case BenchmarkKind::grid_table:
      return {{"kind", "grid_table"}, {"dims", dims_json(f.table_dims())}, {"values", f.table_values()}};
    case BenchmarkKind::custom: return {{"kind", "custom"}};
  }
  return nullptr;
}

std::vector<std::string> default_category_names(int r) {
  if (r == 4) return {"Very Bad", "Bad", "Neutral", "Good"};
  std::vector<std::string> out;
  for (int i = 1; i <= r; ++i) out.push_back("Category " + std::to_string(i));
  return out;
}

LinkFunction parse_link(const std::string& name, const std::string& path) {
  try {
    return {link_from_string(name)};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

OrdinalScale parse_thresholds(std::vector<double> b, const std::string& path) {
  try {
    return OrdinalScale(std::move(b));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

void check_noise(const NoiseParams& n, const std::string& path) {
  const std::pair<const char*, double> fields[] = {{"c_p", n.c_p}, {"c_c", n.c_c}, {"c_o", n.c_o}};
  for (const auto& [name, value] : fields)
    if (!(value > 0.0) || !std::isfinite(value))
      throw ConfigError(join(path, name), std::string("NoiseParams.") + name + " must be > 0");
}

}  // namespace

BenchmarkFunction load_grid_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read grid table " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", "grid table " + path.string() + " is not valid JSON: " + e.what());
  }
  Obj t(j, "");
  if (!t.has("dims") || !t.has("values"))
    throw ConfigError("", "grid table needs 'dims' and 'values'");
  auto dims = parse_dims(t.raw("dims"), "dims");
  auto values = t.numbers("values");
  t.finish();
  try {
    return BenchmarkFunction::grid_table(std::move(dims), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("values", e.what());
  }
}

SessionConfig session_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  Obj root(j, "");
  SessionConfig cfg;

  if (!root.has("space")) throw ConfigError("space", "is required");
  {
    Obj space(root.raw("space"), "space");
    if (!space.has("dims")) throw ConfigError("space.dims", "is required");
    cfg.dims = parse_dims(space.raw("dims"), "space.dims");
    space.finish();
  }

  {
    const std::string mode = root.string("mode", "regret_min");
    try {
      cfg.sampler.mode = sampling_mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("mode", e.what());
    }
  }
  if (root.has("sampler")) {
    Obj s(root.raw("sampler"), "sampler");
    SamplerConfig& sc = cfg.sampler;
    sc.n = to_int(s.integer("n", sc.n), "sampler.n");
    sc.b = to_int(s.integer("b", sc.b), "sampler.b");
    sc.R = to_int(s.integer("R", sc.R), "sampler.R");
    sc.lambda = s.number("lambda", sc.lambda);
    sc.b_roi = s.opt_number("b_roi");
    sc.use_subset = s.boolean("use_subset", sc.use_subset);
    sc.mc_samples = to_int(s.integer("mc_samples", sc.mc_samples), "sampler.mc_samples");
    sc.rng_seed = s.unsigned_integer("rng_seed", sc.rng_seed);
    sc.roi_uses_stddev = s.boolean("roi_uses_stddev", sc.roi_uses_stddev);
    s.finish();
  }

  if (root.has("kernel")) {
    Obj k(root.raw("kernel"), "kernel");
    cfg.kernel.signal_variance = k.number("signal_variance", cfg.kernel.signal_variance);
    if (k.has("lengthscales")) cfg.kernel.lengthscales = k.numbers("lengthscales");
    cfg.kernel.jitter = k.number("jitter", cfg.kernel.jitter);
    k.finish();
  }
  if (cfg.kernel.lengthscales.empty()) {
    for (const auto& dim : cfg.dims) {
      const double span = dim.upper - dim.lower;
      cfg.kernel.lengthscales.push_back(span > 0.0 ? 0.2 * span : 1.0);
    }
  }

  if (root.has("noise")) {
    Obj n(root.raw("noise"), "noise");
    cfg.noise = parse_noise(n, cfg.noise);
  }
  cfg.link = parse_link(root.string("link", "sigmoid"), "link");

  {
    int r = 4;
    std::optional<std::vector<double>> thresholds;
    if (root.has("ordinal")) {
      Obj o(root.raw("ordinal"), "ordinal");
      if (o.has("thresholds")) thresholds = o.numbers("thresholds");
      if (o.has("num_categories")) {
        r = to_int(o.integer("num_categories", r), "ordinal.num_categories");
        if (r < 2) throw ConfigError("ordinal.num_categories", "must be >= 2");
        if (thresholds && static_cast<int>(thresholds->size()) != r - 1)
          throw ConfigError("ordinal.thresholds", "must hold num_categories - 1 values");
      } else if (thresholds) {
        r = static_cast<int>(thresholds->size()) + 1;
      }
      if (o.has("category_names")) cfg.category_names = o.strings("category_names");
      o.finish();
    }
    if (r > 64) throw ConfigError("ordinal.num_categories", "must be <= 64");
    cfg.scale = thresholds ? parse_thresholds(*thresholds, "ordinal.thresholds")
                           : OrdinalScale::quantile_default(r, std::sqrt(cfg.kernel.signal_variance));
    if (cfg.category_names.empty()) cfg.category_names = default_category_names(r);
  }

  if (!root.has("iterations")) throw ConfigError("iterations", "is required");
  cfg.iterations = to_int(root.integer("iterations", 1), "iterations");

  if (root.has("feedback_types")) {
    cfg.feedback = {false, false, false};
    const auto types = root.strings("feedback_types");
    for (std::size_t i = 0; i < types.size(); ++i) {
      if (types[i] == "preference")
        cfg.feedback.preference = true;
      else if (types[i] == "coactive")
        cfg.feedback.coactive = true;
      else if (types[i] == "ordinal")
        cfg.feedback.ordinal = true;
      else
        throw ConfigError("feedback_types[" + std::to_string(i) + "]",
                          "unknown feedback type '" + types[i] +
                              "' (expected preference, coactive or ordinal)");
    }
  }

  if (root.has("solver")) {
    Obj s(root.raw("solver"), "solver");
    SolverConfig& sv = cfg.solver;
    sv.max_newton_iters = to_int(s.integer("max_newton_iters", sv.max_newton_iters), "solver.max_newton_iters");
    sv.grad_tol = s.number("grad_tol", sv.grad_tol);
    sv.armijo_c = s.number("armijo_c", sv.armijo_c);
    sv.backtrack_factor = s.number("backtrack_factor", sv.backtrack_factor);
    sv.max_backtracks = to_int(s.integer("max_backtracks", sv.max_backtracks), "solver.max_backtracks");
    s.finish();
  }

  if (root.has("source")) {
    Obj s(root.raw("source"), "source");
    const std::string type = s.string("type", "human");
    if (type == "synthetic") {
      OracleConfig oc;
      if (!s.has("truth")) throw ConfigError("source.truth", "is required");
      oc.truth = parse_truth(s.raw("truth"), "source.truth", base_dir);
      oc.noise = cfg.noise;
      if (s.has("noise")) {
        Obj n(s.raw("noise"), "source.noise");
        oc.noise = parse_noise(n, cfg.noise);
      }
      oc.thresholds = s.has("thresholds") ? parse_thresholds(s.numbers("thresholds"), "source.thresholds")
                                          : cfg.scale;
      if (s.has("coactive")) {
        Obj c(s.raw("coactive"), "source.coactive");
        oc.coactive.eps1 = c.number("eps1", oc.coactive.eps1);
        oc.coactive.eps2 = c.number("eps2", oc.coactive.eps2);
        oc.coactive.f_eps1 = c.number("f_eps1", oc.coactive.f_eps1);
        oc.coactive.f_eps2 = c.number("f_eps2", oc.coactive.f_eps2);
        c.finish();
      }
      oc.link = s.has("link") ? parse_link(s.string("link", ""), "source.link") : cfg.link;
      oc.seed = s.unsigned_integer("seed", 0);
      cfg.synthetic = std::move(oc);
    } else if (type != "human") {
      throw ConfigError("source.type", "unknown source '" + type + "' (expected human or synthetic)");
    }
    s.finish();
  }

  root.finish();
  validate_session_config(cfg);
  return cfg;
}

Json session_config_to_json(const SessionConfig& cfg) {
  Json j;
  j["space"] = {{"dims", dims_json(cfg.dims)}};
  j["mode"] = std::string(to_string(cfg.sampler.mode));
  const SamplerConfig& sc = cfg.sampler;
  j["sampler"] = {{"n", sc.n},
                  {"b", sc.b},
                  {"R", sc.R},
                  {"lambda", sc.lambda},
                  {"use_subset", sc.use_subset},
                  {"mc_samples", sc.mc_samples},
                  {"rng_seed", sc.rng_seed},
                  {"roi_uses_stddev", sc.roi_uses_stddev}};
  if (sc.b_roi) j["sampler"]["b_roi"] = *sc.b_roi;
  j["kernel"] = {{"signal_variance", cfg.kernel.signal_variance},
                 {"lengthscales", cfg.kernel.lengthscales},
                 {"jitter", cfg.kernel.jitter}};
  j["noise"] = {{"c_p", cfg.noise.c_p}, {"c_c", cfg.noise.c_c}, {"c_o", cfg.noise.c_o}};
  j["link"] = std::string(to_string(cfg.link.kind));
  j["ordinal"] = {{"num_categories", cfg.scale.num_categories()},
                  {"thresholds", cfg.scale.thresholds()},
                  {"category_names", cfg.category_names.empty()
                                         ? default_category_names(cfg.scale.num_categories())
                                         : cfg.category_names}};
  j["iterations"] = cfg.iterations;
  Json types = Json::array();
  if (cfg.feedback.preference) types.push_back("preference");
  if (cfg.feedback.coactive) types.push_back("coactive");
  if (cfg.feedback.ordinal) types.push_back("ordinal");
  j["feedback_types"] = types;
  j["solver"] = {{"max_newton_iters", cfg.solver.max_newton_iters},
                 {"grad_tol", cfg.solver.grad_tol},
                 {"armijo_c", cfg.solver.armijo_c},
                 {"backtrack_factor", cfg.solver.backtrack_factor},
                 {"max_backtracks", cfg.solver.max_backtracks}};
  if (cfg.synthetic) {
    const OracleConfig& oc = *cfg.synthetic;
    Json coactive = {{"eps1", oc.coactive.eps1}, {"eps2", oc.coactive.eps2}};
    if (std::isfinite(oc.coactive.f_eps1)) coactive["f_eps1"] = oc.coactive.f_eps1;
    if (std::isfinite(oc.coactive.f_eps2)) coactive["f_eps2"] = oc.coactive.f_eps2;
    j["source"] = {{"type", "synthetic"},
                   {"truth", truth_json(oc.truth)},
                   {"noise", {{"c_p", oc.noise.c_p}, {"c_c", oc.noise.c_c}, {"c_o", oc.noise.c_o}}},
                   {"thresholds", oc.thresholds.thresholds()},
                   {"coactive", coactive},
                   {"link", std::string(to_string(oc.link.kind))},
                   {"seed", oc.seed}};
  } else {
    j["source"] = {{"type", "human"}};
  }
  return j;
}

std::vector<std::string> validate_session_config(const SessionConfig& cfg) {
  std::vector<std::string> warnings;
  std::optional<ActionSpace> space;
  try {
    space.emplace(cfg.dims);
  } catch (const std::exception& e) {
    throw ConfigError("space.dims", e.what());
  }
  if (cfg.iterations < 1) throw ConfigError("iterations", "must be >= 1");

  const SamplerConfig& sc = cfg.sampler;
  if (sc.n < 1) throw ConfigError("sampler.n", "must be >= 1");
  if (sc.b < 0) throw ConfigError("sampler.b", "must be >= 0");
  if (sc.R < 1) throw ConfigError("sampler.R", "must be >= 1");
  if (sc.mc_samples < 1) throw ConfigError("sampler.mc_samples", "must be >= 1");
  if (!std::isfinite(sc.lambda)) throw ConfigError("sampler.lambda", "must be finite");
  if (sc.b_roi && !std::isfinite(*sc.b_roi)) throw ConfigError("sampler.b_roi", "must be finite");
  if (sc.mode == SamplingMode::active_learning && sc.n > 1)
    warnings.push_back("sampler.n = " + std::to_string(sc.n) +
                       " in active_learning mode; actions after the first are chosen greedily");

  if (!cfg.feedback.any())
    throw ConfigError("feedback_types", "at least one feedback type must be enabled");
  if (cfg.feedback.preference && sc.n + sc.b < 2)
    throw ConfigError("sampler", "preference feedback needs n + b >= 2");

  try {
    cfg.kernel.validate(cfg.dims.size());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("kernel", e.what());
  }

  check_noise(cfg.noise, "noise");
  for (auto& w : noise_warnings(cfg.noise)) warnings.push_back(std::move(w));

  const int r = cfg.scale.num_categories();
  if (r < 2) throw ConfigError("ordinal.thresholds", "at least one threshold is required");
  if (!cfg.category_names.empty() && static_cast<int>(cfg.category_names.size()) != r)
    throw ConfigError("ordinal.category_names",
                      "expected " + std::to_string(r) + " names, got " +
                          std::to_string(cfg.category_names.size()));

  const SolverConfig& sv = cfg.solver;
  if (sv.max_newton_iters < 1) throw ConfigError("solver.max_newton_iters", "must be >= 1");
  if (!(sv.grad_tol > 0.0)) throw ConfigError("solver.grad_tol", "must be > 0");
  if (!(sv.armijo_c > 0.0 && sv.armijo_c < 1.0)) throw ConfigError("solver.armijo_c", "must lie in (0, 1)");
  if (!(sv.backtrack_factor > 0.0 && sv.backtrack_factor < 1.0))
    throw ConfigError("solver.backtrack_factor", "must lie in (0, 1)");
  if (sv.max_backtracks < 1) throw ConfigError("solver.max_backtracks", "must be >= 1");

  if (cfg.synthetic) {
    check_noise(cfg.synthetic->noise, "source.noise");
    if (cfg.synthetic->truth.kind() == BenchmarkKind::grid_table &&
        cfg.synthetic->truth.table_dims().size() != cfg.dims.size())
      throw ConfigError("source.truth", "grid table dimension does not match the action space");
    try {
      SyntheticOracle oracle(*cfg.synthetic, *space);
    } catch (const std::exception& e) {
      throw ConfigError("source", e.what());
    }
    if (cfg.synthetic->thresholds.num_categories() != r)
      warnings.push_back("source.thresholds define " +
                         std::to_string(cfg.synthetic->thresholds.num_categories()) +
                         " categories but the model uses " + std::to_string(r));
  }
  return warnings;
}

ConfigFile config_file_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  ConfigFile file;
  Json session = j;
  if (j.contains("seeds")) {
    const Json& s = j.at("seeds");
    if (!s.is_array()) throw ConfigError("seeds", "must be an array of integers");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string p = "seeds[" + std::to_string(i) + "]";
      if (!s[i].is_number_integer() || s[i].get<long long>() < 0)
        throw ConfigError(p, "must be a non-negative integer");
      file.seeds.push_back(s[i].get<std::uint64_t>());
    }
    session.erase("seeds");
  }
  if (j.contains("output")) {
    Obj o(j.at("output"), "output");
    if (o.has("dir")) file.output_dir = o.string("dir", "");
    o.finish();
    session.erase("output");
  }
  if (j.contains("workers")) {
    const Json& w = j.at("workers");
    if (!w.is_number_integer() || w.get<long long>() < 0)
      throw ConfigError("workers", "must be a non-negative integer");
    file.workers = w.get<unsigned>();
    session.erase("workers");
  }
  Json conditions;
  if (j.contains("conditions")) {
    conditions = j.at("conditions");
    session.erase("conditions");
  }
  file.session = session_config_from_json(session, base_dir);
  file.warnings = validate_session_config(file.session);

  if (!conditions.is_null()) {
    if (!conditions.is_array()) throw ConfigError("conditions", "must be an array");
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      const std::string p = "conditions[" + std::to_string(i) + "]";
      Obj c(conditions[i], p);
      if (!c.has("name")) throw ConfigError(c.at("name"), "is required");
      Condition cond;
      cond.name = c.string("name", "");
      Json merged = session;
      if (c.has("overrides")) {
        const Json& over = c.raw("overrides");
        if (!over.is_object()) throw ConfigError(c.at("overrides"), "must be an object");
        merged.merge_patch(over);
      }
      c.finish();
      try {
        cond.config = session_config_from_json(merged, base_dir);
      } catch (const ConfigError& e) {
        throw ConfigError(c.at("overrides") + (e.path().empty() ? "" : "." + e.path()),
                          e.what());
      }
      file.conditions.push_back(std::move(cond));
    }
  }
  return file;
}

std::optional<int> line_of_path(std::string_view text, std::string_view path) {
  std::size_t pos = 0;
  bool found_any = false;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t end = path.find('.', start);
    if (end == std::string_view::npos) end = path.size();
    std::string_view part = path.substr(start, end - start);
    start = end + 1;
    if (part.empty()) continue;
    std::size_t repeat = 1;
    const std::size_t bracket = part.find('[');
    std::string_view key = part.substr(0, bracket);
    if (bracket != std::string_view::npos) {
      repeat += static_cast<std::size_t>(
          std::strtoul(std::string(part.substr(bracket + 1)).c_str(), nullptr, 10));
    }
    const std::string quoted = "\"" + std::string(key) + "\"";
    std::size_t hit = text.find(quoted, pos);
    if (hit == std::string_view::npos) break;
    pos = hit + quoted.size();
    found_any = true;
    if (repeat > 1) {
      // Skip to the requested array element by counting its opening braces.
      std::size_t bracket_pos = text.find('[', pos);
      if (bracket_pos == std::string_view::npos) break;
      pos = bracket_pos + 1;
      std::size_t wanted = repeat;
      int depth = 0;
      for (std::size_t i = pos; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '{' || ch == '[') {
          if (depth == 0 && --wanted == 0) {
            pos = i;
            break;
          }
          ++depth;
        } else if (ch == '}' || ch == ']') {
          if (depth == 0) break;
          --depth;
        }
      }
    }
  }
  if (!found_any) return std::nullopt;
  const std::size_t at = pos == 0 ? 0 : pos - 1;
  int line = 1;
  for (std::size_t i = 0; i < at && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

ConfigFile load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    ConfigError err("", std::string("invalid JSON: ") + e.what());
    int line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    err.line = line;
    throw err;
  }
  try {
    return config_file_from_json(j, path.parent_path());
  } catch (ConfigError& e) {
    if (!e.line) e.line = line_of_path(text, e.path());
    throw;
  }
}

}  // namespace polard
