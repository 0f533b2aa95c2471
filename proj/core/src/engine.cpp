#include "polard/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "polard/config.hpp"

namespace polard {

namespace {

Json actions_json(const ActionSpace& space, const std::vector<ActionIndex>& actions) {
  Json out = Json::array();
  for (ActionIndex a : actions) {
    const Eigen::VectorXd c = space.coords_of(a);
    out.push_back({{"index", a}, {"coords", std::vector<double>(c.data(), c.data() + c.size())}});
  }
  return out;
}

void log_query(SessionState& state) {
  const QueryBundle q = build_queries(state);
  Json pairs = Json::array();
  for (const auto& [a, b] : q.comparisons) pairs.push_back({a, b});
  state.transcript.push_back({{"event", "query_issued"},
                              {"iteration", q.iteration},
                              {"comparisons", pairs},
                              {"coactive_prompts", q.coactive_prompts},
                              {"ordinal_prompts", q.ordinal_prompts}});
}

void log_sampled(SessionState& state, const Json& extra = Json::object()) {
  Json ev = {{"event", "actions_sampled"},
             {"iteration", state.iteration},
             {"actions", actions_json(state.space, state.current)}};
  for (const auto& [k, v] : extra.items()) ev[k] = v;
  state.transcript.push_back(std::move(ev));
}

PosteriorModel run_update(SessionState& state, Subset subset, const std::string& purpose) {
  const auto t0 = std::chrono::steady_clock::now();
  PosteriorModel post = update_posterior(state.space, subset, state.data, state.config.kernel,
                                         state.config.likelihood(), state.config.solver);
  double seconds = 0.0;
  if (state.options.record_timing)
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  PosteriorUpdateInfo info{purpose, subset.size(), seconds, post.diagnostics};
  state.last_updates.push_back(info);
  state.iteration_updates.push_back(info);
  state.transcript.push_back({{"event", "posterior_updated"},
                              {"iteration", state.iteration},
                              {"purpose", purpose},
                              {"subset_size", subset.size()},
                              {"duration_s", seconds},
                              {"newton_iterations", post.diagnostics.newton_iterations},
                              {"converged", post.diagnostics.converged},
                              {"gradient_inf_norm", post.diagnostics.final_gradient_inf_norm},
                              {"prior_jitter", post.prior_jitter}});
  state.subset = std::move(subset);
  return post;
}

std::vector<ActionIndex> unique_in_order(const std::vector<ActionIndex>& v) {
  std::vector<ActionIndex> out;
  for (ActionIndex a : v)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

std::string pair_text(ActionIndex a, ActionIndex b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::awaiting_feedback: return "awaiting_feedback";
    case Phase::ready_to_advance: return "ready_to_advance";
    case Phase::finished: return "finished";
  }
  return "unknown";
}

SessionState::SessionState(SessionConfig cfg, SessionOptions opts)
    : config(std::move(cfg)),
      space(config.dims),
      options(opts),
      rng(config.sampler.rng_seed),
      buffer(static_cast<std::size_t>(config.sampler.b)) {}

SessionState start_session(const SessionConfig& config, SessionOptions options) {
  validate_session_config(config);
  SessionState state(config, options);
  state.transcript.push_back(
      {{"event", "session_started"}, {"config", session_config_to_json(config)}});
  state.current = random_sample(state.space, config.sampler.n, state.rng);
  for (ActionIndex a : state.current) state.visited.insert(a);
  log_sampled(state);
  log_query(state);
  return state;
}

QueryBundle build_queries(const SessionState& state) {
  if (state.phase != Phase::awaiting_feedback)
    throw PhaseError("no open query: session is " + std::string(to_string(state.phase)));
  QueryBundle q;
  q.iteration = state.iteration;
  const auto fresh = unique_in_order(state.current);
  const auto& types = state.config.feedback;
  if (types.preference) {
    std::vector<ActionIndex> pool = fresh;
    for (ActionIndex a : state.buffer.actions())
      if (std::find(pool.begin(), pool.end(), a) == pool.end()) pool.push_back(a);
    for (std::size_t i = 0; i < pool.size(); ++i)
      for (std::size_t j = i + 1; j < pool.size(); ++j) q.comparisons.emplace_back(pool[i], pool[j]);
  }
  if (types.coactive) q.coactive_prompts = fresh;
  if (types.ordinal) q.ordinal_prompts = fresh;
  return q;
}

void submit_feedback(SessionState& state, const FeedbackResponses& responses) {
  if (state.phase != Phase::awaiting_feedback)
    throw PhaseError("feedback is not expected: session is " + std::string(to_string(state.phase)));
  const QueryBundle q = build_queries(state);
  FeedbackDataset data = state.data;
  ActionSet visited = state.visited;
  Json records = Json::array();

  std::vector<bool> answered(q.comparisons.size(), false);
  for (const auto& ans : responses.comparisons) {
    std::size_t k = 0;
    for (; k < q.comparisons.size(); ++k) {
      const auto& [a, b] = q.comparisons[k];
      if ((a == ans.first && b == ans.second) || (a == ans.second && b == ans.first)) break;
    }
    if (k == q.comparisons.size())
      throw FeedbackError("comparison " + pair_text(ans.first, ans.second) +
                          " is not part of the current query");
    if (answered[k])
      throw FeedbackError("comparison " + pair_text(ans.first, ans.second) + " answered twice");
    answered[k] = true;
    if (!ans.winner) continue;
    if (*ans.winner != ans.first && *ans.winner != ans.second)
      throw FeedbackError("winner " + std::to_string(*ans.winner) + " is not in comparison " +
                          pair_text(ans.first, ans.second));
    const ActionIndex loser = *ans.winner == ans.first ? ans.second : ans.first;
    data.preferences.push_back({*ans.winner, loser});
    records.push_back({{"type", "preference"}, {"winner", *ans.winner}, {"loser", loser}});
  }
  for (std::size_t k = 0; k < q.comparisons.size(); ++k)
    if (!answered[k])
      records.push_back({{"type", "skip"},
                         {"kind", "preference"},
                         {"first", q.comparisons[k].first},
                         {"second", q.comparisons[k].second}});

  std::set<ActionIndex> coactive_done;
  for (const auto& ans : responses.coactive) {
    if (std::find(q.coactive_prompts.begin(), q.coactive_prompts.end(), ans.prompt) ==
        q.coactive_prompts.end())
      throw FeedbackError("action " + std::to_string(ans.prompt) +
                          " has no open coactive prompt");
    if (!coactive_done.insert(ans.prompt).second)
      throw FeedbackError("coactive prompt for action " + std::to_string(ans.prompt) +
                          " answered twice");
    std::optional<ActionIndex> s = ans.suggested;
    if (s && *s >= state.space.cardinality())
      throw FeedbackError("suggested action " + std::to_string(*s) + " is not in the action space");
    if (!s && ans.suggested_coords) {
      const Eigen::VectorXd& c = *ans.suggested_coords;
      if (static_cast<std::size_t>(c.size()) != state.space.dimension())
        throw FeedbackError("suggestion has " + std::to_string(c.size()) +
                            " coordinates, expected " + std::to_string(state.space.dimension()));
      if (!c.allFinite()) throw FeedbackError("suggestion coordinates must be finite");
      s = state.space.snap_to_grid(c).index;
    }
    if (!s || *s == ans.prompt) {
      coactive_done.erase(ans.prompt);
      continue;
    }
    const CoactiveRecord rec = ans.reversed ? CoactiveRecord{ans.prompt, *s}
                                            : CoactiveRecord{*s, ans.prompt};
    data.coactive.push_back(rec);
    visited.insert(*s);
    records.push_back({{"type", "coactive"},
                       {"prompt", ans.prompt},
                       {"suggested", rec.suggested},
                       {"original", rec.original}});
  }
  for (ActionIndex a : q.coactive_prompts)
    if (!coactive_done.contains(a))
      records.push_back({{"type", "skip"}, {"kind", "coactive"}, {"action", a}});

  const int r = state.config.scale.num_categories();
  std::set<ActionIndex> ordinal_done;
  for (const auto& ans : responses.ordinal) {
    if (std::find(q.ordinal_prompts.begin(), q.ordinal_prompts.end(), ans.action) ==
        q.ordinal_prompts.end())
      throw FeedbackError("action " + std::to_string(ans.action) + " has no open ordinal prompt");
    if (!ordinal_done.insert(ans.action).second)
      throw FeedbackError("ordinal prompt for action " + std::to_string(ans.action) +
                          " answered twice");
    if (!ans.label) {
      ordinal_done.erase(ans.action);
      continue;
    }
    if (*ans.label < 1 || *ans.label > r)
      throw LabelError("ordinal label " + std::to_string(*ans.label) + " is outside [1, " +
                       std::to_string(r) + "]");
    data.ordinal.push_back({ans.action, *ans.label});
    records.push_back({{"type", "ordinal"}, {"action", ans.action}, {"label", *ans.label}});
  }
  for (ActionIndex a : q.ordinal_prompts)
    if (!ordinal_done.contains(a))
      records.push_back({{"type", "skip"}, {"kind", "ordinal"}, {"action", a}});

  state.data = std::move(data);
  state.visited = std::move(visited);
  state.transcript.push_back(
      {{"event", "feedback_recorded"}, {"iteration", state.iteration}, {"records", records}});
  state.phase = Phase::ready_to_advance;
}

void advance(SessionState& state) {
  if (state.phase == Phase::finished) throw PhaseError("session is finished");
  if (state.phase != Phase::ready_to_advance)
    throw PhaseError("feedback for iteration " + std::to_string(state.iteration) +
                     " has not been submitted");

  SessionState next = state;
  next.last_updates.clear();
  const SessionConfig& cfg = next.config;
  const SamplerConfig& sc = cfg.sampler;

  for (ActionIndex a : next.current) next.buffer.push(a);

  // End of iteration: refit and re-estimate the optimum.
  PosteriorModel post;
  if (sc.mode == SamplingMode::active_learning) {
    if (sc.use_subset)
      post = run_update(next, construct_active_subset(next.space, next.visited, sc.R, next.rng),
                        "active_subset");
    else
      post = run_update(next, Subset::whole(next.space), "full");
  } else {
    post = run_update(next, sc.use_subset ? Subset(next.visited) : Subset::whole(next.space),
                      sc.use_subset ? "visited" : "full");
  }
  next.optimum = estimate_optimum(post);
  next.transcript.push_back({{"event", "optimum_updated"},
                             {"iteration", next.iteration},
                             {"action", *next.optimum}});

  IterationRecord rec;
  rec.iteration = next.iteration;
  rec.actions = next.current;
  rec.optimum = *next.optimum;
  rec.updates = next.iteration_updates;
  rec.support = post.support;
  rec.alpha = post.alpha;
  rec.prior_jitter = post.prior_jitter;
  next.history.push_back(std::move(rec));
  next.iteration_updates.clear();

  if (next.iteration >= cfg.iterations) {
    next.posterior = std::move(post);
    next.phase = Phase::finished;
    next.transcript.push_back({{"event", "session_finished"}, {"iteration", next.iteration}});
    state = std::move(next);
    return;
  }

  ++next.iteration;
  Json extra = Json::object();
  std::vector<ActionIndex> picks;
  switch (sc.mode) {
    case SamplingMode::regret_min: {
      if (sc.use_subset) {
        Subset line = construct_regret_subset(next.space, next.visited, *next.optimum, next.rng);
        post = run_update(next, std::move(line), "line");
      }
      picks = thompson_sample(post, sc.n, next.rng);
      break;
    }
    case SamplingMode::active_learning: {
      const ActionSet roi = roi_filter(post, sc.lambda, cfg.roi_threshold(), sc.roi_uses_stddev);
      extra["roi_size"] = roi.size();
      ActionSet candidates = roi;
      if (roi.empty()) {
        candidates.insert(roi_fallback(post, sc.lambda, sc.roi_uses_stddev));
        extra["roi_fallback"] = true;
      }
      const InfoGainOptions opts{cfg.feedback.ordinal, cfg.feedback.preference, sc.mc_samples};
      Buffer comparators(static_cast<std::size_t>(sc.b + sc.n));
      for (ActionIndex a : next.buffer.actions()) comparators.push(a);
      for (int k = 0; k < sc.n; ++k) {
        const ActionIndex a =
            info_gain_sample(post, candidates, comparators, cfg.likelihood(), opts, next.rng);
        picks.push_back(a);
        comparators.push(a);
      }
      break;
    }
    case SamplingMode::random:
      picks = random_sample(next.space, sc.n, next.rng);
      break;
  }
  next.posterior = std::move(post);
  next.current = std::move(picks);
  for (ActionIndex a : next.current) next.visited.insert(a);
  log_sampled(next, extra);
  next.phase = Phase::awaiting_feedback;
  log_query(next);
  state = std::move(next);
}

MetricsReport evaluate_metrics(const SessionState& state, const SyntheticOracle& oracle) {
  MetricsReport m;
  const double best = oracle.utility(oracle.optimum());
  const int r_model = state.config.scale.num_categories();
  const int r_true = oracle.config().thresholds.num_categories();
  const int r = std::max(r_model, r_true);

  std::vector<ActionIndex> all(state.space.cardinality());
  for (ActionIndex a = 0; a < all.size(); ++a) all[a] = a;
  std::vector<int> truth(all.size());
  for (ActionIndex a : all) truth[a] = oracle.true_category(a);

  for (const auto& rec : state.history) {
    m.optimal_action_error.push_back(best - oracle.utility(rec.optimum));
    double mean_u = 0.0;
    for (ActionIndex a : rec.actions) mean_u += oracle.utility(a);
    mean_u /= static_cast<double>(rec.actions.size());
    m.instantaneous_regret.push_back(best - mean_u);

    PosteriorModel expansion;
    expansion.support = rec.support;
    expansion.alpha = rec.alpha;
    expansion.prior_jitter = rec.prior_jitter;
    const Eigen::VectorXd mu = predictive_mean(expansion, state.space, state.config.kernel, all);
    double err = 0.0;
    const bool last = &rec == &state.history.back();
    if (last) m.confusion_matrix.assign(static_cast<std::size_t>(r), std::vector<long>(static_cast<std::size_t>(r), 0));
    for (ActionIndex a : all) {
      const int pred = state.config.scale.bin(mu[static_cast<Eigen::Index>(a)]);
      err += std::abs(pred - truth[a]);
      if (last) ++m.confusion_matrix[static_cast<std::size_t>(truth[a] - 1)][static_cast<std::size_t>(pred - 1)];
    }
    m.ordinal_prediction_error.push_back(err / static_cast<double>(all.size()));

    double seconds = 0.0;
    for (const auto& u : rec.updates) seconds += u.seconds;
    m.posterior_update_seconds.push_back(seconds);
  }
  return m;
}

FeedbackResponses synthetic_responses(const SyntheticOracle& oracle, const QueryBundle& bundle,
                                      Rng& rng) {
  FeedbackResponses out;
  for (const auto& [a, b] : bundle.comparisons) {
    const PreferenceRecord p = synth_preference(oracle, a, b, rng);
    out.comparisons.push_back({a, b, p.winner});
  }
  for (ActionIndex a : bundle.coactive_prompts) {
    const auto rec = synth_coactive(oracle, a, rng);
    if (!rec) continue;
    CoactiveAnswer ans;
    ans.prompt = a;
    ans.reversed = rec->suggested == a;
    ans.suggested = ans.reversed ? rec->original : rec->suggested;
    out.coactive.push_back(std::move(ans));
  }
  for (ActionIndex a : bundle.ordinal_prompts)
    out.ordinal.push_back({a, synth_ordinal(oracle, a, rng).label});
  return out;
}

SimulationResult run_simulation(const SessionConfig& config, std::uint64_t seed,
                                SessionOptions options) {
  if (!config.synthetic) throw std::invalid_argument("simulation needs a synthetic feedback source");
  SessionConfig cfg = config;
  cfg.sampler.rng_seed = seed;
  SessionState state = start_session(cfg, options);
  const SyntheticOracle oracle(*cfg.synthetic, state.space);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.synthetic->seed),
                    static_cast<std::uint32_t>(cfg.synthetic->seed >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  Rng user_rng(seq);
  while (state.phase != Phase::finished) {
    submit_feedback(state, synthetic_responses(oracle, build_queries(state), user_rng));
    advance(state);
  }
  MetricsReport metrics = evaluate_metrics(state, oracle);
  return {std::move(state), std::move(metrics)};
}

namespace {

std::pair<double, double> mean_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

ComparisonResult compare_runs(const std::vector<Condition>& conditions,
                              const std::vector<std::uint64_t>& seeds, unsigned workers,
                              SessionOptions options) {
  if (conditions.empty()) throw std::invalid_argument("compare_runs needs at least one condition");
  if (seeds.empty()) throw std::invalid_argument("compare_runs needs at least one seed");
  const std::size_t jobs = conditions.size() * seeds.size();
  ComparisonResult result;
  result.runs.assign(conditions.size(), std::vector<MetricsReport>(seeds.size()));
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const std::size_t c = j / seeds.size();
      const std::size_t s = j % seeds.size();
      try {
        result.runs[c][s] = run_simulation(conditions[c].config, seeds[s], options).metrics;
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t c = 0; c < conditions.size(); ++c) {
    const auto& runs = result.runs[c];
    const std::size_t rows = runs.front().rows();
    for (std::size_t i = 0; i < rows; ++i) {
      auto column = [&](auto member) {
        std::vector<double> xs;
        for (const auto& r : runs) xs.push_back((r.*member)[i]);
        return mean_se(xs);
      };
      result.rows.push_back({conditions[c].name, static_cast<int>(i) + 1,
                             column(&MetricsReport::optimal_action_error),
                             column(&MetricsReport::instantaneous_regret),
                             column(&MetricsReport::ordinal_prediction_error),
                             column(&MetricsReport::posterior_update_seconds)});
    }
  }
  return result;
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::string metrics_csv(const MetricsReport& report) {
  std::string out =
      "iteration,optimal_action_error,instantaneous_regret,ordinal_prediction_error,"
      "posterior_update_seconds\n";
  for (std::size_t i = 0; i < report.rows(); ++i) {
    out += std::to_string(i + 1) + "," + fmt(report.optimal_action_error[i]) + "," +
           fmt(report.instantaneous_regret[i]) + "," + fmt(report.ordinal_prediction_error[i]) +
           "," + fmt(report.posterior_update_seconds[i]) + "\n";
  }
  return out;
}

std::string comparison_csv(const ComparisonResult& result) {
  std::string out =
      "condition,iteration,optimal_action_error_mean,optimal_action_error_se,"
      "instantaneous_regret_mean,instantaneous_regret_se,ordinal_prediction_error_mean,"
      "ordinal_prediction_error_se,posterior_update_seconds_mean,posterior_update_seconds_se\n";
  for (const auto& r : result.rows) {
    std::string name = r.condition;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = quoted + "\"";
    }
    out += name + "," + std::to_string(r.iteration);
    for (const auto& [m, se] : {r.optimal_action_error, r.instantaneous_regret,
                                r.ordinal_prediction_error, r.posterior_update_seconds})
      out += "," + fmt(m) + "," + fmt(se);
    out += "\n";
  }
  return out;
}

}  // namespace polard
