// melo: command-line front end for the learner-modeling engine.
//
//   melo simulate  --out DIR [cohort flags]
//   melo ingest    --train FILE [--test FILE] --out DIR
//   melo eval      --log FILE --items FILE [--test FILE] [engine/protocol flags] [--out DIR]
//   melo sweep     --sigmas LIST --concepts LIST --out DIR [cohort/engine flags]
//   melo recommend (--state FILE | --course-dir DIR) --student ID [--k N]
//   melo serve     --data-dir DIR [--listen HOST:PORT]

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "melo/codec.hpp"
#include "melo/course_store.hpp"
#include "melo/evaluation.hpp"
#include "melo/http_api.hpp"
#include "melo/interaction_log.hpp"
#include "melo/kdd.hpp"
#include "melo/manifest.hpp"
#include "melo/recommender.hpp"
#include "melo/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values mirror EngineConfig field names.
struct EngineFlags {
  std::string config_file;
  std::string variant{"melo"};
  std::optional<double> k;
  std::optional<double> gamma;
  std::optional<double> beta;
  bool guess_correction{false};
  std::optional<double> init_rating;

  // Sweeps always run both variants and take no --variant.
  void add(CLI::App* app, bool with_variant = true) {
    app->add_option("--config", config_file, "Engine config JSON file (flags override it)")->check(CLI::ExistingFile);
    if (with_variant)
      app->add_option("--variant", variant, "elo, melo or both")->check(CLI::IsMember({"elo", "melo", "both"}));
    auto* kopt = app->add_option("--k", k, "Constant sensitivity K (selects constant mode)");
    app->add_option("--gamma", gamma, "Uncertainty gamma (default 1.8)")->excludes(kopt);
    app->add_option("--beta", beta, "Uncertainty beta (default 0.05)")->excludes(kopt);
    app->add_flag("--guess-correction", guess_correction, "Shifted-logistic guess correction");
    app->add_option("--init-rating", init_rating, "Initial rating for new students/items/concepts");
  }

  [[nodiscard]] melo::EngineConfig base() const {
    melo::EngineConfig cfg;
    if (!config_file.empty()) {
      json j;
      try {
        j = json::parse(melo::read_file(config_file));
      } catch (const json::exception& e) {
        throw melo::ConfigError("config file " + config_file + " is not valid JSON: " + e.what());
      }
      cfg = melo::codec::config_from_json(j);
    }
    if (k) {
      cfg.sensitivity = melo::ConstantK{*k};
    } else if (gamma || beta) {
      auto u = std::holds_alternative<melo::Uncertainty>(cfg.sensitivity) ? std::get<melo::Uncertainty>(cfg.sensitivity)
                                                                           : melo::Uncertainty{};
      if (gamma) u.gamma = *gamma;
      if (beta) u.beta = *beta;
      cfg.sensitivity = u;
    }
    if (guess_correction) cfg.guess_correction = true;
    if (init_rating) cfg.init_rating = *init_rating;
    return cfg;
  }

  // One config per requested variant.
  [[nodiscard]] std::vector<melo::EngineConfig> resolve(const CLI::App* app) const {
    auto cfg = base();
    const bool explicit_variant = app->count("--variant") > 0;
    if (!explicit_variant && !config_file.empty()) {
      cfg.validate();
      return {cfg};
    }
    if (variant == "both") {
      auto e = cfg, m = cfg;
      e.variant = melo::Variant::StandardElo;
      m.variant = melo::Variant::MElo;
      e.validate();
      return {e, m};
    }
    cfg.variant = melo::parse_variant(variant);
    cfg.validate();
    return {cfg};
  }
};

struct CohortFlags {
  melo::synthetic::CohortSpec spec;

  void add(CLI::App* app) {
    app->add_option("--students", spec.students, "Number of students N")->capture_default_str();
    app->add_option("--items", spec.items, "Number of items M")->capture_default_str();
    app->add_option("--answers", spec.answers, "Number of sampled answers R")->capture_default_str();
    app->add_option("--sigma", spec.sigma, "Per-student knowledge spread")->capture_default_str();
    app->add_option("--tag-min", spec.tag_range.first, "Minimum concepts per item")->capture_default_str();
    app->add_option("--tag-max", spec.tag_range.second, "Maximum concepts per item")->capture_default_str();
    app->add_option("--mean-min", spec.mean_range.first, "Lower bound of student mean ability")->capture_default_str();
    app->add_option("--mean-max", spec.mean_range.second, "Upper bound of student mean ability")->capture_default_str();
    app->add_option("--difficulty-mean", spec.difficulty.mean)->capture_default_str();
    app->add_option("--difficulty-sd", spec.difficulty.sd)->capture_default_str();
    app->add_option("--discrimination-mean", spec.discrimination.mean)->capture_default_str();
    app->add_option("--discrimination-sd", spec.discrimination.sd)->capture_default_str();
    app->add_option("--seed", spec.seed, "64-bit seed")->capture_default_str();
  }

  [[nodiscard]] json to_json() const {
    return {{"students", spec.students},
            {"items", spec.items},
            {"answers", spec.answers},
            {"concepts", spec.concepts},
            {"sigma", spec.sigma},
            {"tag_range", {spec.tag_range.first, spec.tag_range.second}},
            {"mean_range", {spec.mean_range.first, spec.mean_range.second}},
            {"difficulty", {{"mean", spec.difficulty.mean}, {"sd", spec.difficulty.sd}}},
            {"discrimination", {{"mean", spec.discrimination.mean}, {"sd", spec.discrimination.sd}}},
            {"min_discrimination", spec.min_discrimination},
            {"seed", spec.seed}};
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw melo::Error("cannot create output directory " + dir.string());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw melo::Error("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw melo::NotFound("cannot read " + p.string());
  return f;
}

std::string fmt(double v) { return melo::io::format_double(v); }

std::string fmt_metric(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

json truth_to_json(const melo::synthetic::GroundTruth& t) {
  json items = json::array();
  for (std::uint32_t m = 0; m < t.items.size(); ++m) {
    json tags = json::array();
    for (auto c : t.items[m].concepts) tags.push_back(melo::synthetic::concept_name(c));
    items.push_back({{"id", melo::synthetic::item_name(m)},
                     {"concepts", tags},
                     {"difficulty", t.items[m].difficulty},
                     {"discrimination", t.items[m].discrimination}});
  }
  json students = json::array();
  for (std::uint32_t n = 0; n < t.knowledge.size(); ++n)
    students.push_back(
        {{"id", melo::synthetic::student_name(n)}, {"mean", t.student_means[n]}, {"knowledge", t.knowledge[n]}});
  return {{"concepts", t.concept_count}, {"students", students}, {"items", items}};
}

// --- simulate -------------------------------------------------------------

int run_simulate(const CohortFlags& cohort, const fs::path& out) {
  ensure_dir(out);
  const auto& spec = cohort.spec;
  const auto truth = melo::synthetic::generate_cohort(spec);
  const auto answers = melo::synthetic::sample_interactions(truth, spec.answers, spec.seed);
  const auto model = melo::synthetic::make_model(truth, melo::EngineConfig{});
  const auto stream = melo::synthetic::to_interactions(answers);
  {
    auto f = open_out(out / "interactions.tsv");
    melo::io::write_log(f, model, stream);
  }
  {
    auto f = open_out(out / "items.tsv");
    melo::io::write_registry(f, model);
  }
  {
    auto f = open_out(out / "truth.json");
    f << truth_to_json(truth).dump(1) << '\n';
  }
  melo::RunManifest m{"simulate", {{"cohort", cohort.to_json()}}, {spec.seed}, {},
                      {"interactions.tsv", "items.tsv", "truth.json"}};
  m.write(out);
  std::cout << "simulated " << stream.size() << " interactions for " << spec.students << " students, " << spec.items
            << " items, " << spec.concepts << " concepts -> " << out.string() << '\n';
  return 0;
}

// --- ingest ---------------------------------------------------------------

json report_json(const melo::kdd::DiscardReport& r) {
  json errors = json::array();
  for (const auto& e : r.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
  return {{"total_rows", r.total_rows},
          {"kept", r.kept},
          {"discarded_untagged", r.untagged},
          {"discarded_malformed", r.errors.size()},
          {"kc_conflicts", r.kc_conflicts},
          {"rule", "rows with an empty, whitespace-only or missing KC field are discarded"},
          {"errors", errors}};
}

int run_ingest(const fs::path& train, const std::optional<fs::path>& test, const fs::path& out,
               const std::string& kc_column) {
  ensure_dir(out);
  melo::kdd::Columns cols;
  cols.kc = kc_column;
  melo::kdd::Parser parser({}, cols);
  std::vector<melo::kdd::ParsedFile> files;
  {
    auto in = open_in(train);
    files.push_back(parser.parse(in));
  }
  if (test) {
    auto in = open_in(*test);
    files.push_back(parser.parse(in));
  }
  std::vector<std::string> outputs;
  {
    auto f = open_out(out / "train.tsv");
    melo::io::write_log(f, parser.model(), files[0].interactions);
    outputs.push_back("train.tsv");
  }
  if (test) {
    auto f = open_out(out / "test.tsv");
    melo::io::write_log(f, parser.model(), files[1].interactions);
    outputs.push_back("test.tsv");
  }
  {
    auto f = open_out(out / "items.tsv");
    melo::io::write_registry(f, parser.model(), parser.item_sources());
    outputs.push_back("items.tsv");
  }
  std::vector<std::span<const melo::Interaction>> streams;
  for (const auto& pf : files) streams.emplace_back(pf.interactions);
  const auto st = melo::kdd::dataset_stats(parser.model(), streams);
  json stats{{"students", st.students},
             {"kcs", st.concepts},
             {"items", st.items},
             {"multi_kc_items", st.multi_concept_items},
             {"interactions", st.interactions}};
  json discards{{"train", report_json(files[0].report)}};
  if (test) discards["test"] = report_json(files[1].report);
  {
    auto f = open_out(out / "stats.json");
    f << json{{"stats", stats}, {"discards", discards}}.dump(2) << '\n';
    outputs.push_back("stats.json");
  }
  melo::RunManifest m{"ingest", {{"kc_column", kc_column}}, {}, {train}, outputs};
  if (test) m.inputs.push_back(*test);
  m.write(out);
  std::cout << "students\t" << st.students << "\nkcs\t" << st.concepts << "\nitems\t" << st.items
            << "\nmulti_kc_items\t" << st.multi_concept_items << "\ninteractions\t" << st.interactions << '\n';
  for (std::size_t i = 0; i < files.size(); ++i)
    std::cout << (i == 0 ? "train" : "test") << " discarded\t" << files[i].report.discarded() << " of "
              << files[i].report.total_rows << '\n';
  return 0;
}

// --- eval -----------------------------------------------------------------

int run_eval(const fs::path& log, const fs::path& items, const std::optional<fs::path>& test,
             const std::vector<melo::EngineConfig>& cfgs, const melo::eval::Protocol& protocol,
             const std::optional<fs::path>& out, bool save_state) {
  protocol.validate();
  melo::Model registry;
  {
    auto in = open_in(items);
    melo::io::read_registry(in, registry);
  }
  std::vector<melo::Interaction> train_stream, test_stream;
  {
    auto in = open_in(log);
    train_stream = melo::io::read_log(in, registry);
  }
  if (test) {
    auto in = open_in(*test);
    test_stream = melo::io::read_log(in, registry);
  }

  std::ostringstream csv, preds;
  csv << "variant,mode,auc,rmse,acc,n\n";
  preds << "variant\tseq\tscore\tlabel\n";
  std::cout << std::left << std::setw(8) << "variant" << std::setw(14) << "mode" << std::setw(22) << "AUC"
            << std::setw(22) << "RMSE" << std::setw(22) << "ACC" << "n\n";
  json state_files = json::array();
  for (const auto& cfg : cfgs) {
    melo::Model model = registry;
    model.config = cfg;
    melo::eval::RunResult r;
    if (test) {
      if (protocol.mode == melo::eval::Mode::Online) {
        // Online over the training stream followed by the test stream.
        auto all = train_stream;
        const auto offset = all.empty() ? 0 : all.back().seq;
        for (auto x : test_stream) {
          x.seq += offset;
          all.push_back(x);
        }
        r = melo::eval::evaluate_online(model, all, protocol.threshold);
      } else {
        r = melo::eval::evaluate_split(model, train_stream, test_stream, protocol.threshold);
      }
    } else {
      r = melo::eval::evaluate_stream(model, train_stream, protocol);
    }
    const auto& mt = r.metrics;
    std::cout << std::setw(8) << melo::to_string(cfg.variant) << std::setw(14) << melo::eval::to_string(protocol.mode)
              << std::setw(22) << fmt_metric(mt.auc) << std::setw(22) << fmt(mt.rmse) << std::setw(22) << fmt(mt.acc)
              << mt.count << '\n';
    csv << melo::to_string(cfg.variant) << ',' << melo::eval::to_string(protocol.mode) << ',' << fmt_metric(mt.auc)
        << ',' << fmt(mt.rmse) << ',' << fmt(mt.acc) << ',' << mt.count << '\n';
    for (const auto& p : r.predictions)
      preds << melo::to_string(cfg.variant) << '\t' << p.seq << '\t' << fmt(p.score) << '\t' << (p.label ? 1 : 0)
            << '\n';
    if (out && save_state) {
      // Final state after replaying the training stream.
      melo::replay(train_stream, model);
      const std::string name = std::string("state-") + melo::to_string(cfg.variant) + ".json";
      ensure_dir(*out);
      auto f = open_out(*out / name);
      f << melo::codec::to_json(model).dump() << '\n';
      state_files.push_back(name);
    }
  }
  if (out) {
    ensure_dir(*out);
    open_out(*out / "report.csv") << csv.str();
    open_out(*out / "predictions.tsv") << preds.str();
    json cfg_json = json::array();
    for (const auto& c : cfgs) cfg_json.push_back(melo::codec::to_json(c));
    melo::RunManifest m{"eval",
                        {{"engines", cfg_json},
                         {"protocol",
                          {{"mode", melo::eval::to_string(protocol.mode)},
                           {"split_fraction", protocol.split_fraction},
                           {"threshold", protocol.threshold}}}},
                        {},
                        {log, items},
                        {"report.csv", "predictions.tsv"}};
    if (test) m.inputs.push_back(*test);
    for (const auto& s : state_files) m.outputs.push_back(s.get<std::string>());
    m.write(*out);
  }
  return 0;
}

// --- sweep ----------------------------------------------------------------

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (auto part : melo::text::split(s, ",")) {
    auto v = melo::text::parse_number<double>(part);
    if (!v) throw melo::ConfigError("not a number: '" + std::string(part) + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::uint32_t> parse_counts(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (auto part : melo::text::split(s, ",")) {
    auto v = melo::text::parse_number<std::uint32_t>(part);
    if (!v || *v < 1) throw melo::ConfigError("not a positive integer: '" + std::string(part) + "'");
    out.push_back(*v);
  }
  return out;
}

int run_sweep(const CohortFlags& cohort, const std::string& sigmas_s, const std::string& concepts_s,
              const std::vector<melo::EngineConfig>& cfgs, const melo::eval::Protocol& protocol, const fs::path& out) {
  const auto sigmas = parse_doubles(sigmas_s);
  const auto concepts = parse_counts(concepts_s);
  ensure_dir(out);
  const auto rows = melo::eval::sigma_sweep(cohort.spec, sigmas, concepts, cfgs, protocol);
  std::ostringstream csv;
  csv << "sigma,concepts,variant,repeat,auc,rmse,acc,n\n";
  for (const auto& r : rows) {
    csv << fmt(r.sigma) << ',' << r.concepts << ',' << melo::to_string(r.variant) << ','
        << (r.repeat ? std::to_string(*r.repeat) : std::string("mean")) << ',' << fmt_metric(r.metrics.auc) << ','
        << fmt(r.metrics.rmse) << ',' << fmt(r.metrics.acc) << ',' << r.metrics.count << '\n';
  }
  open_out(out / "sweep.csv") << csv.str();
  std::vector<std::uint64_t> seeds;
  for (std::uint32_t r = 0; r < protocol.repeats; ++r) seeds.push_back(melo::eval::repeat_seed(cohort.spec.seed, r));
  json cfg_json = json::array();
  for (const auto& c : cfgs) cfg_json.push_back(melo::codec::to_json(c));
  melo::RunManifest m{"sweep",
                      {{"cohort", cohort.to_json()},
                       {"sigmas", sigmas},
                       {"concepts", concepts},
                       {"engines", cfg_json},
                       {"protocol",
                        {{"mode", melo::eval::to_string(protocol.mode)},
                         {"split_fraction", protocol.split_fraction},
                         {"repeats", protocol.repeats},
                         {"threshold", protocol.threshold}}}},
                      seeds,
                      {},
                      {"sweep.csv"}};
  m.write(out);
  std::cout << std::left << std::setw(8) << "sigma" << std::setw(6) << "L" << std::setw(8) << "variant"
            << "mean AUC\n";
  for (const auto& r : rows)
    if (!r.repeat)
      std::cout << std::setw(8) << r.sigma << std::setw(6) << r.concepts << std::setw(8) << melo::to_string(r.variant)
                << fmt_metric(r.metrics.auc) << '\n';
  return 0;
}

// --- recommend ------------------------------------------------------------

int run_recommend(const std::optional<fs::path>& state, const std::optional<fs::path>& course_dir,
                  const std::optional<fs::path>& history_log, const std::string& student, std::uint32_t k,
                  double target, bool include_attempted) {
  if (course_dir) {
    melo::service::StoreOptions opts;
    opts.snapshot_every = 0;
    auto store = melo::service::CourseStore::open(*course_dir, opts);
    std::cout << store->recommendations(student, k, target).dump(2) << '\n';
    return 0;
  }
  json j;
  try {
    j = json::parse(melo::read_file(*state));
  } catch (const json::exception& e) {
    throw melo::ParseError("state file is not valid JSON: " + std::string(e.what()));
  }
  auto model = melo::codec::model_from_json(j);
  melo::rec::Request req;
  req.student = model.students.at(student);
  req.k = k;
  req.target = target;
  req.exclude_attempted = !include_attempted;
  std::set<melo::ItemId> attempted;
  if (history_log) {
    auto probe = model;
    auto in = open_in(*history_log);
    for (const auto& x : melo::io::read_log(in, probe))
      if (x.student == req.student) attempted.insert(x.item);
  }
  const auto res = melo::rec::recommend(req, model, attempted);
  if (res.items.empty()) {
    std::cout << "status\t" << res.status << '\n';
    return 0;
  }
  std::cout << "rank\titem\tcombined\tgap\tmatch\tprobability\tattempts\n";
  int rank = 1;
  for (const auto& s : res.items)
    std::cout << rank++ << '\t' << model.items.name(s.item) << '\t' << fmt(s.combined) << '\t' << fmt(s.gap) << '\t'
              << fmt(s.match) << '\t' << fmt(s.probability) << '\t' << s.attempts << '\n';
  return 0;
}

// --- serve ----------------------------------------------------------------

httplib::Server* g_server = nullptr;

int run_serve(const std::string& listen, const fs::path& data_dir, const std::string& token,
              std::uint64_t snapshot_every) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw melo::ConfigError("--listen must be HOST:PORT");
  const auto host = listen.substr(0, colon);
  const auto port = melo::text::parse_number<int>(listen.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) throw melo::ConfigError("invalid port in --listen");
  melo::service::StoreOptions opts;
  opts.snapshot_every = snapshot_every;
  melo::service::Service svc(data_dir, opts);
  httplib::Server server;
  melo::service::mount(server, svc, token);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  int bound = *port;
  if (bound == 0) {
    bound = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, bound)) {
    throw melo::Error("cannot bind " + listen);
  }
  if (bound < 0) throw melo::Error("cannot bind " + listen);
  std::cout << "listening on " << host << ':' << bound << " data=" << data_dir.string() << std::endl;
  server.listen_after_bind();
  return 0;
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melo: Elo and multivariate Elo learner models"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic cohort and interaction log");
  CohortFlags sim_cohort;
  sim_cohort.add(sim);
  sim->add_option("--concepts", sim_cohort.spec.concepts, "Number of concepts L")->capture_default_str();
  std::string sim_out;
  sim->add_option("--out", sim_out, "Output directory")->required();

  // ingest
  auto* ing = app.add_subcommand("ingest", "Convert KDD Cup 2010 step logs");
  std::string ing_train, ing_test, ing_out, ing_kc = "KC(Default)";
  ing->add_option("--train", ing_train, "Training TSV")->required()->check(CLI::ExistingFile);
  ing->add_option("--test", ing_test, "Test TSV")->check(CLI::ExistingFile);
  ing->add_option("--out", ing_out, "Output directory")->required();
  ing->add_option("--kc-column", ing_kc, "KC column name")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Score Elo/M-Elo predictions on an interaction log");
  EngineFlags ev_engine;
  ev_engine.add(ev);
  std::string ev_log, ev_items, ev_test, ev_out, ev_mode = "split-frozen";
  melo::eval::Protocol ev_protocol;
  bool ev_save_state = false;
  ev->add_option("--log", ev_log, "Interaction log (training stream when --test is given)")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--items", ev_items, "Item registry")->required()->check(CLI::ExistingFile);
  ev->add_option("--test", ev_test, "Separate test log (provided split)")->check(CLI::ExistingFile);
  ev->add_option("--mode", ev_mode, "split-frozen or online")
      ->check(CLI::IsMember({"split-frozen", "online"}))
      ->capture_default_str();
  ev->add_option("--split-fraction", ev_protocol.split_fraction, "Training fraction when no --test")
      ->capture_default_str();
  ev->add_option("--threshold", ev_protocol.threshold, "ACC threshold")->capture_default_str();
  ev->add_option("--out", ev_out, "Write report.csv, predictions.tsv and manifest here");
  ev->add_flag("--save-state", ev_save_state, "Also write the trained model state (needs --out)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Synthetic sigma x L grid for both variants");
  CohortFlags sw_cohort;
  sw_cohort.add(sw);
  EngineFlags sw_engine;
  sw_engine.add(sw, false);
  std::string sw_sigmas = "0,0.25,0.5,0.75,1,1.5,2,3", sw_concepts = "10,100", sw_out, sw_mode = "split-frozen";
  melo::eval::Protocol sw_protocol;
  sw->add_option("--sigmas", sw_sigmas, "Comma-separated sigma values")->capture_default_str();
  sw->add_option("--concepts", sw_concepts, "Comma-separated concept counts L")->capture_default_str();
  sw->add_option("--repeats", sw_protocol.repeats, "Cohorts per grid point")->capture_default_str();
  sw->add_option("--mode", sw_mode)->check(CLI::IsMember({"split-frozen", "online"}))->capture_default_str();
  sw->add_option("--split-fraction", sw_protocol.split_fraction)->capture_default_str();
  sw->add_option("--threshold", sw_protocol.threshold)->capture_default_str();
  sw->add_option("--out", sw_out, "Output directory")->required();

  // recommend
  auto* rc = app.add_subcommand("recommend", "Top-k items for a student from a saved state");
  std::string rc_state, rc_course, rc_student, rc_log;
  std::uint32_t rc_k = 5;
  double rc_target = 0.65;
  bool rc_include_attempted = false;
  auto* st_opt = rc->add_option("--state", rc_state, "Model state JSON (eval --save-state)")->check(CLI::ExistingFile);
  auto* cd_opt = rc->add_option("--course-dir", rc_course, "Service course directory")->check(CLI::ExistingDirectory);
  st_opt->excludes(cd_opt);
  rc->add_option("--history", rc_log, "Interaction log marking attempted items (with --state)")
      ->check(CLI::ExistingFile);
  rc->add_option("--student", rc_student, "Student id")->required();
  rc->add_option("--k", rc_k, "Number of items")->capture_default_str()->check(CLI::PositiveNumber);
  rc->add_option("--target", rc_target, "Target success probability")->capture_default_str();
  rc->add_flag("--include-attempted", rc_include_attempted, "Do not exclude attempted items");

  // serve
  auto* sv = app.add_subcommand("serve", "Run the practice service");
  std::string sv_listen = env_or("MELO_LISTEN", "127.0.0.1:8080");
  std::string sv_data = env_or("MELO_DATA_DIR", "melo-data");
  std::string sv_token = env_or("MELO_API_TOKEN", "");
  std::uint64_t sv_snapshot = 1000;
  sv->add_option("--listen", sv_listen, "HOST:PORT (env MELO_LISTEN)")->capture_default_str();
  sv->add_option("--data-dir", sv_data, "Course storage directory (env MELO_DATA_DIR)")->capture_default_str();
  sv->add_option("--token", sv_token, "Static API token (env MELO_API_TOKEN)");
  sv->add_option("--snapshot-every", sv_snapshot, "Events between snapshots (0 disables)")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return run_simulate(sim_cohort, sim_out);
    if (*ing)
      return run_ingest(ing_train, ing_test.empty() ? std::nullopt : std::optional<fs::path>(ing_test), ing_out, ing_kc);
    if (*ev) {
      ev_protocol.mode = melo::eval::parse_mode(ev_mode);
      return run_eval(ev_log, ev_items, ev_test.empty() ? std::nullopt : std::optional<fs::path>(ev_test),
                      ev_engine.resolve(ev), ev_protocol,
                      ev_out.empty() ? std::nullopt : std::optional<fs::path>(ev_out), ev_save_state);
    }
    if (*sw) {
      sw_protocol.mode = melo::eval::parse_mode(sw_mode);
      auto base = sw_engine.base();
      auto e = base, m = base;
      e.variant = melo::Variant::StandardElo;
      m.variant = melo::Variant::MElo;
      return run_sweep(sw_cohort, sw_sigmas, sw_concepts, {e, m}, sw_protocol, sw_out);
    }
    if (*rc) {
      if (rc_state.empty() && rc_course.empty()) throw melo::ConfigError("recommend needs --state or --course-dir");
      return run_recommend(rc_state.empty() ? std::nullopt : std::optional<fs::path>(rc_state),
                           rc_course.empty() ? std::nullopt : std::optional<fs::path>(rc_course),
                           rc_log.empty() ? std::nullopt : std::optional<fs::path>(rc_log), rc_student, rc_k,
                           rc_target, rc_include_attempted);
    }
    if (*sv) return run_serve(sv_listen, sv_data, sv_token, sv_snapshot);
  } catch (const melo::ConfigError& e) {
    std::cerr << "melo: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const melo::ParseError& e) {
    std::cerr << "melo: parse error: " << e.what() << '\n';
    return 3;
  } catch (const melo::NotFound& e) {
    std::cerr << "melo: not found: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "melo: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
