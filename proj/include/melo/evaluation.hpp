#pragma once

#include <cstdint>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "melo/core.hpp"
#include "melo/metrics.hpp"
#include "melo/synthetic.hpp"

namespace melo::eval {

enum class Mode {
  // Replay the training part with updates, then score the test part with all
  // parameters frozen.
  SplitFrozen,
  // Predict-then-update over the whole stream and score every prediction.
  Online,
};

inline const char* to_string(Mode m) { return m == Mode::Online ? "online" : "split-frozen"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "split-frozen" || s == "SPLIT_FROZEN") return Mode::SplitFrozen;
  if (s == "online" || s == "ONLINE") return Mode::Online;
  throw ConfigError("unknown evaluation mode: " + std::string(s));
}

struct Protocol {
  Mode mode{Mode::SplitFrozen};
  double split_fraction{0.7};
  std::uint32_t repeats{5};
  double threshold{0.5};

  void validate() const {
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split fraction must lie in (0,1)");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  }
};

struct PredictionRecord {
  std::uint64_t seq{0};
  double score{0.5};
  bool label{false};
};

struct RunResult {
  Metrics metrics;
  std::vector<PredictionRecord> predictions;
};

struct Report {
  EngineConfig config;
  Protocol protocol;
  std::vector<RunResult> runs;
  Metrics mean;  // averaged over runs; AUC over runs where it is defined
};

inline std::vector<ScoredOutcome> as_scored(std::span<const PredictionRecord> preds) {
  std::vector<ScoredOutcome> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back({p.score, p.label});
  return out;
}

inline RunResult finish(std::vector<PredictionRecord> preds, double threshold) {
  if (preds.empty()) throw DomainError("evaluation produced no scored predictions");
  auto scored = as_scored(preds);
  return RunResult{score_all(scored, threshold), std::move(preds)};
}

// `model` is taken by value: the caller's state is never touched.
inline RunResult evaluate_split(Model model, std::span<const Interaction> train, std::span<const Interaction> test,
                                double threshold = 0.5) {
  replay(train, model);
  std::vector<PredictionRecord> preds;
  preds.reserve(test.size());
  for (const auto& x : test) preds.push_back({x.seq, model.predict(x.student, x.item), x.correct});
  return finish(std::move(preds), threshold);
}

inline RunResult evaluate_online(Model model, std::span<const Interaction> stream, double threshold = 0.5) {
  auto steps = replay(stream, model);
  std::vector<PredictionRecord> preds;
  preds.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) preds.push_back({stream[i].seq, steps[i].prediction, stream[i].correct});
  return finish(std::move(preds), threshold);
}

// Split is by position: the first fraction of the stream trains.
inline RunResult evaluate_stream(const Model& model, std::span<const Interaction> stream, const Protocol& protocol) {
  protocol.validate();
  if (protocol.mode == Mode::Online) return evaluate_online(model, stream, protocol.threshold);
  const auto cut = static_cast<std::size_t>(static_cast<double>(stream.size()) * protocol.split_fraction);
  return evaluate_split(model, stream.first(cut), stream.subspan(cut), protocol.threshold);
}

inline Metrics average(std::span<const RunResult> runs) {
  Metrics m;
  if (runs.empty()) return m;
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (const auto& r : runs) {
    if (r.metrics.auc) {
      auc_sum += *r.metrics.auc;
      ++auc_n;
    }
    m.rmse += r.metrics.rmse;
    m.acc += r.metrics.acc;
    m.count += r.metrics.count;
  }
  if (auc_n > 0) m.auc = auc_sum / static_cast<double>(auc_n);
  m.rmse /= static_cast<double>(runs.size());
  m.acc /= static_cast<double>(runs.size());
  return m;
}

inline Report make_report(const EngineConfig& cfg, const Protocol& protocol, std::vector<RunResult> runs) {
  Report r{cfg, protocol, std::move(runs), {}};
  r.mean = average(r.runs);
  return r;
}

// Seed of repeat r for a cohort template seeded with `base`.
inline std::uint64_t repeat_seed(std::uint64_t base, std::uint32_t r) { return base + r; }

// One cohort per repeat; interactions sampled with the repeat's seed.
inline Report run_synthetic(const synthetic::CohortSpec& spec, const EngineConfig& cfg, const Protocol& protocol) {
  protocol.validate();
  cfg.validate();
  std::vector<RunResult> runs;
  for (std::uint32_t r = 0; r < protocol.repeats; ++r) {
    auto s = spec;
    s.seed = repeat_seed(spec.seed, r);
    const auto truth = synthetic::generate_cohort(s);
    const auto stream = synthetic::to_interactions(synthetic::sample_interactions(truth, s.answers, s.seed));
    runs.push_back(evaluate_stream(synthetic::make_model(truth, cfg), stream, protocol));
  }
  return make_report(cfg, protocol, std::move(runs));
}

struct SweepRow {
  double sigma{0.0};
  std::uint32_t concepts{0};
  Variant variant{Variant::MElo};
  std::optional<std::uint32_t> repeat;  // nullopt marks the averaged row
  Metrics metrics;
};

// Grid over (sigma, L). Both variants see the same cohorts at each grid point.
// Returns per-repeat rows followed by averaged rows for each point, in grid
// order (sigma-major, then L, then variant).
inline std::vector<SweepRow> sigma_sweep(const synthetic::CohortSpec& base, std::span<const double> sigmas,
                                         std::span<const std::uint32_t> concept_counts,
                                         std::span<const EngineConfig> configs, const Protocol& protocol,
                                         bool parallel = true) {
  protocol.validate();
  if (sigmas.empty() || concept_counts.empty() || configs.empty()) throw ConfigError("sweep: empty grid");
  for (const auto& c : configs) c.validate();

  auto point = [&](double sigma, std::uint32_t l) {
    std::vector<SweepRow> rows;
    std::vector<std::vector<RunResult>> per_cfg(configs.size());
    for (std::uint32_t r = 0; r < protocol.repeats; ++r) {
      auto s = base;
      s.sigma = sigma;
      s.concepts = l;
      s.seed = repeat_seed(base.seed, r);
      const auto truth = synthetic::generate_cohort(s);
      const auto stream = synthetic::to_interactions(synthetic::sample_interactions(truth, s.answers, s.seed));
      for (std::size_t c = 0; c < configs.size(); ++c) {
        auto res = evaluate_stream(synthetic::make_model(truth, configs[c]), stream, protocol);
        res.predictions.clear();
        rows.push_back({sigma, l, configs[c].variant, r, res.metrics});
        per_cfg[c].push_back(std::move(res));
      }
    }
    for (std::size_t c = 0; c < configs.size(); ++c)
      rows.push_back({sigma, l, configs[c].variant, std::nullopt, average(per_cfg[c])});
    return rows;
  };

  std::vector<std::future<std::vector<SweepRow>>> jobs;
  for (double sigma : sigmas)
    for (auto l : concept_counts)
      jobs.push_back(std::async(parallel ? std::launch::async : std::launch::deferred, point, sigma, l));

  std::vector<SweepRow> out;
  for (auto& j : jobs) {
    auto rows = j.get();
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace melo::eval
