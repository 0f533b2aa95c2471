#include "polard/transcript.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "polard/config.hpp"

namespace polard {

namespace {

Json action_json(const ActionSpace& space, ActionIndex a) {
  const Eigen::VectorXd c = space.coords_of(a);
  return {{"index", a}, {"coords", std::vector<double>(c.data(), c.data() + c.size())}};
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<ActionIndex> sampled_indices(const Json& ev) {
  std::vector<ActionIndex> out;
  for (const auto& a : ev.at("actions")) out.push_back(a.at("index").get<ActionIndex>());
  return out;
}

FeedbackResponses responses_from_records(const Json& records) {
  FeedbackResponses r;
  for (const auto& rec : records) {
    const std::string type = rec.at("type").get<std::string>();
    if (type == "preference") {
      const auto w = rec.at("winner").get<ActionIndex>();
      const auto l = rec.at("loser").get<ActionIndex>();
      r.comparisons.push_back({w, l, w});
    } else if (type == "coactive") {
      const auto p = rec.at("prompt").get<ActionIndex>();
      const auto s = rec.at("suggested").get<ActionIndex>();
      const auto o = rec.at("original").get<ActionIndex>();
      CoactiveAnswer ans;
      ans.prompt = p;
      ans.reversed = s == p;
      ans.suggested = ans.reversed ? o : s;
      r.coactive.push_back(std::move(ans));
    } else if (type == "ordinal") {
      r.ordinal.push_back({rec.at("action").get<ActionIndex>(), rec.at("label").get<int>()});
    }
  }
  return r;
}

Json without_timing(Json ev) {
  if (ev.contains("duration_s")) ev.erase("duration_s");
  return ev;
}

}  // namespace

Json feedback_records_json(const std::vector<Json>& records) {
  Json out = Json::array();
  for (const auto& r : records) out.push_back(r);
  return out;
}

SessionState replay_transcript(const std::vector<Json>& events, SessionOptions options) {
  if (events.empty() || events.front().value("event", "") != "session_started")
    throw std::runtime_error("transcript does not start with session_started");
  const SessionConfig cfg = session_config_from_json(events.front().at("config"));
  SessionState state = start_session(cfg, options);

  for (std::size_t i = 1; i < events.size(); ++i) {
    const Json& ev = events[i];
    const std::string type = ev.value("event", "");
    if (type == "feedback_recorded") {
      submit_feedback(state, responses_from_records(ev.at("records")));
    } else if (type == "actions_sampled") {
      if (ev.at("iteration").get<int>() > state.iteration) advance(state);
      if (sampled_indices(ev) != state.current)
        throw std::runtime_error("replay diverged at iteration " + std::to_string(state.iteration) +
                                 ": sampled actions differ");
    } else if (type == "session_finished") {
      if (state.phase != Phase::finished) advance(state);
    }
  }

  if (state.transcript.size() != events.size())
    throw std::runtime_error("replay produced " + std::to_string(state.transcript.size()) +
                             " events, transcript has " + std::to_string(events.size()));
  for (std::size_t i = 0; i < events.size(); ++i)
    if (without_timing(state.transcript[i]) != without_timing(events[i]))
      throw std::runtime_error("replay diverged at event " + std::to_string(i) + " (" +
                               events[i].value("event", "?") + ")");
  state.transcript = events;
  return state;
}

std::string transcript_jsonl(const std::vector<Json>& events) {
  std::string out;
  for (const auto& ev : events) {
    out += ev.dump();
    out += '\n';
  }
  return out;
}

std::vector<Json> parse_transcript_jsonl(const std::string& text) {
  std::vector<Json> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw std::runtime_error("transcript line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Json state_digest(const SessionState& state) {
  Json d;
  d["iteration"] = state.iteration;
  d["phase"] = std::string(to_string(state.phase));
  d["current"] = state.current;
  d["visited"] = state.visited.indices();
  d["buffer"] = state.buffer.actions();
  d["subset"] = state.subset.actions().indices();
  Json data = Json::array();
  for (const auto& p : state.data.preferences) data.push_back({"p", p.winner, p.loser});
  for (const auto& c : state.data.coactive) data.push_back({"c", c.suggested, c.original});
  for (const auto& o : state.data.ordinal) data.push_back({"o", o.action, o.label});
  d["data"] = data;
  d["optimum"] = state.optimum ? Json(*state.optimum) : Json(nullptr);
  d["mean"] = state.posterior ? Json(to_vector(state.posterior->mean)) : Json(nullptr);
  Json optima = Json::array();
  for (const auto& h : state.history) optima.push_back(h.optimum);
  d["optima"] = optima;
  return d;
}

Json posterior_snapshot(const SessionState& state, bool full_covariance) {
  if (!state.posterior) throw PhaseError("no posterior has been computed yet");
  const PosteriorModel& post = *state.posterior;
  const ActionSpace& space = state.space;
  const std::size_t d = space.dimension();

  Json subset = Json::array();
  for (ActionIndex a : post.subset.actions()) subset.push_back(action_json(space, a));

  std::vector<std::vector<std::size_t>> digits;
  digits.reserve(post.subset.size());
  for (ActionIndex a : post.subset.actions()) digits.push_back(space.digits_of(a));

  Json projections = Json::array();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const std::size_t ni = space.counts()[i];
      const std::size_t nj = space.counts()[j];
      std::vector<double> sum(ni * nj, 0.0);
      std::vector<std::size_t> count(ni * nj, 0);
      for (std::size_t p = 0; p < digits.size(); ++p) {
        const std::size_t cell = digits[p][i] * nj + digits[p][j];
        sum[cell] += post.mean[static_cast<Eigen::Index>(p)];
        ++count[cell];
      }
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t c = 0; c < sum.size(); ++c) {
        if (count[c] == 0) continue;
        sum[c] /= static_cast<double>(count[c]);
        lo = std::min(lo, sum[c]);
        hi = std::max(hi, sum[c]);
      }
      const double range = hi - lo;
      Json grid = Json::array();
      for (std::size_t a = 0; a < ni; ++a) {
        Json row = Json::array();
        for (std::size_t b = 0; b < nj; ++b) {
          const std::size_t c = a * nj + b;
          if (count[c] == 0)
            row.push_back(nullptr);
          else
            row.push_back(range > 0.0 ? (sum[c] - lo) / range : 0.5);
        }
        grid.push_back(std::move(row));
      }
      std::vector<double> xs, ys;
      for (std::size_t a = 0; a < ni; ++a) xs.push_back(space.dims()[i].value(a));
      for (std::size_t b = 0; b < nj; ++b) ys.push_back(space.dims()[j].value(b));
      projections.push_back({{"dims", {i, j}},
                             {"names", {space.dims()[i].name, space.dims()[j].name}},
                             {"x", xs},
                             {"y", ys},
                             {"grid", grid}});
    }
  }

  Json out;
  out["iteration"] = state.iteration;
  out["phase"] = std::string(to_string(state.phase));
  out["subset"] = subset;
  out["mean"] = to_vector(post.mean);
  out["std"] = to_vector(post.stddev());
  out["optimum_estimate"] = state.optimum ? action_json(space, *state.optimum) : Json(nullptr);
  out["visited"] = state.visited.indices();
  out["diagnostics"] = {{"newton_iterations", post.diagnostics.newton_iterations},
                        {"converged", post.diagnostics.converged},
                        {"gradient_inf_norm", post.diagnostics.final_gradient_inf_norm}};
  out["projections"] = projections;
  if (full_covariance) {
    const Eigen::MatrixXd& cov = post.covariance;
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(cov.size()));
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
      for (Eigen::Index j = 0; j < cov.cols(); ++j) flat.push_back(cov(i, j));
    out["covariance"] = flat;
  }
  return out;
}

Json query_json(const SessionState& state, const QueryBundle& bundle) {
  Json comparisons = Json::array();
  for (const auto& [a, b] : bundle.comparisons)
    comparisons.push_back({{"first", action_json(state.space, a)}, {"second", action_json(state.space, b)}});
  Json coactive = Json::array();
  for (ActionIndex a : bundle.coactive_prompts) coactive.push_back(action_json(state.space, a));
  Json ordinal = Json::array();
  for (ActionIndex a : bundle.ordinal_prompts) ordinal.push_back(action_json(state.space, a));

  const OrdinalScale& scale = state.config.scale;
  Json categories = Json::array();
  for (int k = 1; k <= scale.num_categories(); ++k) {
    const auto name = static_cast<std::size_t>(k - 1) < state.config.category_names.size()
                          ? state.config.category_names[static_cast<std::size_t>(k - 1)]
                          : "Category " + std::to_string(k);
    Json lo = std::isfinite(scale.bound(k - 1)) ? Json(scale.bound(k - 1)) : Json(nullptr);
    Json hi = std::isfinite(scale.bound(k)) ? Json(scale.bound(k)) : Json(nullptr);
    categories.push_back({{"label", k}, {"name", name}, {"lower", lo}, {"upper", hi}});
  }
  Json dims = Json::array();
  for (const auto& dim : state.space.dims())
    dims.push_back({{"name", dim.name}, {"min", dim.lower}, {"max", dim.upper}, {"step", dim.step}});

  return {{"iteration", bundle.iteration},
          {"iterations", state.config.iterations},
          {"dims", dims},
          {"comparisons", comparisons},
          {"coactive_prompts", coactive},
          {"ordinal_prompts", ordinal},
          {"categories", categories}};
}

Json state_json(const SessionState& state) {
  Json current = Json::array();
  for (ActionIndex a : state.current) current.push_back(action_json(state.space, a));
  Json updates = Json::array();
  for (const auto& u : state.last_updates)
    updates.push_back({{"purpose", u.purpose},
                       {"subset_size", u.subset_size},
                       {"duration_s", u.seconds},
                       {"converged", u.diagnostics.converged},
                       {"newton_iterations", u.diagnostics.newton_iterations}});
  return {{"iteration", state.iteration},
          {"iterations", state.config.iterations},
          {"phase", std::string(to_string(state.phase))},
          {"mode", std::string(to_string(state.config.sampler.mode))},
          {"current_actions", current},
          {"visited_count", state.visited.size()},
          {"feedback_counts",
           {{"preferences", state.data.preferences.size()},
            {"coactive", state.data.coactive.size()},
            {"ordinal", state.data.ordinal.size()}}},
          {"optimum_estimate", state.optimum ? action_json(state.space, *state.optimum) : Json(nullptr)},
          {"posterior_updates", updates}};
}

namespace {

ActionIndex index_field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FeedbackError(where + " is missing '" + key + "'");
  const Json& v = j.at(key);
  if (v.is_object() && v.contains("index")) return index_field(v, "index", where);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw FeedbackError(where + "." + key + " must be an action index");
  return v.get<ActionIndex>();
}

}  // namespace

FeedbackResponses responses_from_json(const Json& j, const SessionState& state) {
  if (!j.is_object()) throw FeedbackError("feedback body must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "comparisons" && key != "coactive" && key != "ordinal")
      throw FeedbackError("unknown key '" + key + "' in feedback body");
  FeedbackResponses r;
  auto list = [&](const char* key) -> const Json& {
    static const Json empty = Json::array();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_array()) throw FeedbackError(std::string(key) + " must be an array");
    return j.at(key);
  };

  const Json& comps = list("comparisons");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string where = "comparisons[" + std::to_string(i) + "]";
    const Json& c = comps[i];
    if (!c.is_object()) throw FeedbackError(where + " must be an object");
    ComparisonAnswer ans;
    ans.first = index_field(c, "first", where);
    ans.second = index_field(c, "second", where);
    if (c.contains("winner") && !c.at("winner").is_null()) {
      const Json& w = c.at("winner");
      if (w.is_string()) {
        const auto s = w.get<std::string>();
        if (s == "first")
          ans.winner = ans.first;
        else if (s == "second")
          ans.winner = ans.second;
        else if (s != "skip" && s != "none")
          throw FeedbackError(where + ".winner must be an index, \"first\", \"second\" or null");
      } else {
        ans.winner = index_field(c, "winner", where);
      }
    }
    r.comparisons.push_back(ans);
  }

  const Json& coactive = list("coactive");
  for (std::size_t i = 0; i < coactive.size(); ++i) {
    const std::string where = "coactive[" + std::to_string(i) + "]";
    const Json& c = coactive[i];
    if (!c.is_object()) throw FeedbackError(where + " must be an object");
    CoactiveAnswer ans;
    ans.prompt = index_field(c, "action", where);
    if (c.contains("suggested") && !c.at("suggested").is_null()) {
      ans.suggested = index_field(c, "suggested", where);
    } else if (c.contains("coords") && !c.at("coords").is_null()) {
      const Json& xs = c.at("coords");
      if (!xs.is_array()) throw FeedbackError(where + ".coords must be an array of numbers");
      Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (!xs[k].is_number()) throw FeedbackError(where + ".coords must be an array of numbers");
        v[static_cast<Eigen::Index>(k)] = xs[k].get<double>();
      }
      if (static_cast<std::size_t>(v.size()) != state.space.dimension())
        throw FeedbackError(where + ".coords must have " + std::to_string(state.space.dimension()) +
                            " entries");
      ans.suggested_coords = std::move(v);
    }
    r.coactive.push_back(std::move(ans));
  }

  const Json& ordinal = list("ordinal");
  for (std::size_t i = 0; i < ordinal.size(); ++i) {
    const std::string where = "ordinal[" + std::to_string(i) + "]";
    const Json& o = ordinal[i];
    if (!o.is_object()) throw FeedbackError(where + " must be an object");
    OrdinalAnswer ans;
    ans.action = index_field(o, "action", where);
    if (o.contains("label") && !o.at("label").is_null()) {
      if (!o.at("label").is_number_integer()) throw FeedbackError(where + ".label must be an integer");
      ans.label = o.at("label").get<int>();
    }
    r.ordinal.push_back(ans);
  }
  return r;
}

}  // namespace polard
