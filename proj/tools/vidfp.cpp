#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vidfp/eval.hpp"
#include "vidfp/matchdb.hpp"
#include "vidfp/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vidfp;

namespace {

struct Settings {
  PipelineConfig pipeline;
  double a = 0.3;
  double tau = 0.32;
};

Settings settingsFromJson(const json& j) {
  Settings s;
  if (j.contains("feature")) {
    const json& f = j.at("feature");
    s.pipeline.feature.standard_length =
        f.value("standard_length", s.pipeline.feature.standard_length);
    s.pipeline.feature.histogram_bins =
        f.value("histogram_bins", s.pipeline.feature.histogram_bins);
    s.pipeline.feature.local_points = f.value("local_points", s.pipeline.feature.local_points);
    s.pipeline.feature.descriptor_patch =
        f.value("descriptor_patch", s.pipeline.feature.descriptor_patch);
    s.pipeline.feature.descriptor_grid =
        f.value("descriptor_grid", s.pipeline.feature.descriptor_grid);
  }
  s.pipeline.target_frames = j.value("target_frames", s.pipeline.target_frames);
  if (j.contains("ard")) {
    const json& a = j.at("ard");
    if (a.contains("prior")) {
      const std::string prior = a.at("prior").get<std::string>();
      if (prior == "gaussian")
        s.pipeline.ard.prior = ArdPrior::Gaussian;
      else if (prior == "laplace")
        s.pipeline.ard.prior = ArdPrior::Laplace;
      else
        throw std::runtime_error("config: prior must be 'gaussian' or 'laplace'");
    }
    s.pipeline.ard.snr_db = a.value("snr_db", s.pipeline.ard.snr_db);
    s.pipeline.ard.learn_sigma = a.value("learn_sigma", s.pipeline.ard.learn_sigma);
    if (a.contains("max_ranks")) {
      const auto ranks = a.at("max_ranks").get<std::vector<long long>>();
      if (ranks.size() != 3) throw std::runtime_error("config: max_ranks needs 3 entries");
      for (int n = 0; n < 3; ++n) s.pipeline.ard.max_ranks[n] = ranks[size_t(n)];
    }
    s.pipeline.ard.prune_ratio = a.value("prune_ratio", s.pipeline.ard.prune_ratio);
    s.pipeline.ard.max_iter = a.value("max_iter", s.pipeline.ard.max_iter);
    s.pipeline.ard.tol = a.value("tol", s.pipeline.ard.tol);
  }
  s.pipeline.seed = j.value("seed", s.pipeline.seed);
  s.a = j.value("a", s.a);
  s.tau = j.value("tau", s.tau);
  return s;
}

Settings loadSettings(const std::string& path) {
  if (path.empty()) return Settings{};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  in >> j;
  return settingsFromJson(j);
}

json settingsToJson(const Settings& s) {
  const PipelineConfig c = s.pipeline.resolved();
  return json{
      {"feature",
       {{"standard_length", c.feature.standard_length},
        {"histogram_bins", c.feature.histogram_bins},
        {"local_points", c.feature.local_points},
        {"descriptor_patch", c.feature.descriptor_patch},
        {"descriptor_grid", c.feature.descriptor_grid}}},
      {"target_frames", c.target_frames},
      {"ard",
       {{"prior", c.ard.prior == ArdPrior::Gaussian ? "gaussian" : "laplace"},
        {"snr_db", c.ard.snr_db},
        {"learn_sigma", c.ard.learn_sigma},
        {"max_ranks", {c.ard.max_ranks[0], c.ard.max_ranks[1], c.ard.max_ranks[2]}},
        {"prune_ratio", c.ard.prune_ratio},
        {"max_iter", c.ard.max_iter},
        {"tol", c.ard.tol}}},
      {"seed", c.seed},
      {"a", s.a},
      {"tau", s.tau},
      {"config_digest", configDigest(c)}};
}

std::string defaultId(const fs::path& input) {
  if (fs::is_directory(input)) {
    fs::path p = input;
    if (!p.filename().string().empty()) return p.filename().string();
    return p.parent_path().filename().string();
  }
  return input.stem().string();
}

std::vector<Modification> parseMods(const std::string& spec) {
  std::vector<Modification> mods;
  const auto add_kind = [&](ModKind kind) { mods.push_back(Modification(kind)); };
  if (spec == "singles") {
    for (const ModKind kind : singleModifications()) add_kind(kind);
    return mods;
  }
  if (spec == "combos") {
    for (const ModKind kind :
         {ModKind::Combo1, ModKind::Combo2, ModKind::Combo3, ModKind::Combo4})
      add_kind(kind);
    return mods;
  }
  if (spec == "all") {
    for (const ModKind kind : singleModifications()) add_kind(kind);
    for (const ModKind kind :
         {ModKind::Combo1, ModKind::Combo2, ModKind::Combo3, ModKind::Combo4})
      add_kind(kind);
    return mods;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string name =
        spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!name.empty()) {
      try {
        add_kind(modKindFromName(name));
      } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("--mods", e.what());
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (mods.empty()) throw CLI::ValidationError("--mods", "no modifications given");
  return mods;
}

std::vector<FrameSequence> loadCorpusDir(const fs::path& dir, int threads) {
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() || entry.path().extension() == ".json")
      inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.size() < 2)
    throw std::runtime_error("corpus directory needs at least 2 videos: " + dir.string());
  std::vector<FrameSequence> corpus(inputs.size());
  parallelFor(static_cast<int>(inputs.size()), threads,
              [&](int i) { corpus[size_t(i)] = loadFrames(inputs[size_t(i)]); });
  return corpus;
}

std::vector<LabeledQuery> loadLabeledPairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file " + path.string());
  std::vector<LabeledQuery> queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const FingerprintRecord record = recordFromJsonLine(line);
      LabeledQuery q;
      q.fingerprint = record.fingerprint;
      const json j = json::parse(line);
      if (j.contains("positives"))
        q.positive_ids = j.at("positives").get<std::vector<std::string>>();
      queries.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  if (queries.empty()) throw std::runtime_error("no labeled queries in " + path.string());
  return queries;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"comprehensive-feature video fingerprinting"};
  app.require_subcommand(1);

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "generate a synthetic PGM video corpus");
  CorpusSpec corpus_spec;
  std::string corpus_out;
  corpus_cmd->add_option("--n", corpus_spec.n_videos, "number of videos")
      ->required()
      ->check(CLI::Range(2, 100000));
  corpus_cmd->add_option("--frames", corpus_spec.frames_per_video, "frames per video")
      ->check(CLI::Range(2, 100000));
  corpus_cmd->add_option("--width", corpus_spec.width)->check(CLI::Range(32, 8192));
  corpus_cmd->add_option("--height", corpus_spec.height)->check(CLI::Range(32, 8192));
  corpus_cmd->add_option("--seed", corpus_spec.seed);
  corpus_cmd->add_option("--out", corpus_out, "output directory")->required();
  corpus_cmd->callback([&] {
    const std::vector<FrameSequence> corpus = synthCorpus(corpus_spec);
    for (std::size_t v = 0; v < corpus.size(); ++v) {
      char name[32];
      std::snprintf(name, sizeof(name), "video_%03zu", v);
      saveFramesPgm(corpus[v], fs::path(corpus_out) / name);
    }
    std::cout << "wrote " << corpus.size() << " videos to " << corpus_out << "\n";
  });

  // fingerprint
  auto* fp_cmd = app.add_subcommand("fingerprint", "fingerprint one video");
  std::string fp_input, fp_id, fp_out, fp_config;
  std::uint64_t fp_seed = 0;
  fp_cmd->add_option("--input", fp_input, "PGM directory or .json raw header")->required();
  fp_cmd->add_option("--id", fp_id, "record id (default: input name)");
  fp_cmd->add_option("--out", fp_out, "output file (default: stdout)");
  fp_cmd->add_option("--config", fp_config, "JSON config file");
  fp_cmd->add_option("--seed", fp_seed);
  fp_cmd->callback([&] {
    Settings s = loadSettings(fp_config);
    if (fp_cmd->count("--seed")) s.pipeline.seed = fp_seed;
    const FrameSequence seq = loadFrames(fp_input);
    const Fingerprint fp = fingerprintVideo(seq, s.pipeline).fingerprint;
    const std::string id = fp_id.empty() ? defaultId(fp_input) : fp_id;
    const std::string line = recordToJsonLine({id, fp, {}});
    if (fp_out.empty()) {
      std::cout << line << "\n";
    } else {
      std::ofstream out(fp_out);
      if (!out) throw std::runtime_error("cannot write " + fp_out);
      out << line << "\n";
    }
  });

  // index
  auto* index_cmd = app.add_subcommand("index", "fingerprint videos into a database");
  std::string index_db, index_config;
  std::vector<std::string> index_inputs;
  std::uint64_t index_seed = 0;
  int index_threads = 1;
  index_cmd->add_option("--db", index_db, "database file")->required();
  index_cmd->add_option("inputs", index_inputs, "video inputs")->required();
  index_cmd->add_option("--config", index_config, "JSON config file");
  index_cmd->add_option("--seed", index_seed);
  index_cmd->add_option("--threads", index_threads)->check(CLI::Range(1, 256));
  index_cmd->callback([&] {
    Settings s = loadSettings(index_config);
    if (index_cmd->count("--seed")) s.pipeline.seed = index_seed;
    const std::string digest = configDigest(s.pipeline);
    Database db = fs::exists(index_db) ? Database::load(index_db) : Database(digest);
    if (db.configDigest() != digest)
      throw std::runtime_error("database " + index_db + " was built with config digest " +
                               db.configDigest() + ", current config is " + digest);
    std::vector<Fingerprint> fps(index_inputs.size());
    parallelFor(static_cast<int>(index_inputs.size()), index_threads, [&](int i) {
      fps[size_t(i)] = fingerprintVideo(loadFrames(index_inputs[size_t(i)]), s.pipeline).fingerprint;
    });
    for (std::size_t i = 0; i < index_inputs.size(); ++i)
      db.insert({defaultId(index_inputs[i]), fps[i], {}});
    db.save(index_db);
    std::cout << "indexed " << index_inputs.size() << " videos, database now holds "
              << db.size() << "\n";
  });

  // query
  auto* query_cmd = app.add_subcommand("query", "match one video against a database");
  std::string query_db, query_input, query_config;
  double query_a = -1.0, query_tau = -1.0;
  bool query_exhaustive = false;
  int query_top = 10;
  std::uint64_t query_seed = 0;
  query_cmd->add_option("--db", query_db)->required();
  query_cmd->add_option("--input", query_input)->required();
  query_cmd->add_option("--a", query_a, "pre-match adjustment factor")
      ->check(CLI::Range(0.0, 1.0));
  query_cmd->add_option("--tau", query_tau, "decision threshold")
      ->check(CLI::PositiveNumber);
  query_cmd->add_flag("--exhaustive", query_exhaustive, "bypass the tag pre-match");
  query_cmd->add_option("--top", query_top, "result lines to print, 0 for all");
  query_cmd->add_option("--config", query_config, "JSON config file");
  query_cmd->add_option("--seed", query_seed);
  query_cmd->callback([&] {
    Settings s = loadSettings(query_config);
    if (query_cmd->count("--seed")) s.pipeline.seed = query_seed;
    if (query_cmd->count("--a")) s.a = query_a;
    if (query_cmd->count("--tau")) s.tau = query_tau;
    const Database db = Database::load(query_db);
    const Fingerprint query = fingerprintVideo(loadFrames(query_input), s.pipeline).fingerprint;
    std::cout << "# config: " << settingsToJson(s).dump() << "\n";
    std::cout << "# a: " << g17(s.a) << " tau: " << g17(s.tau)
              << " exhaustive: " << (query_exhaustive ? 1 : 0) << "\n";
    const std::vector<SearchHit> hits = search(db, query, s.a, s.tau, query_exhaustive);
    if (hits.empty()) {
      std::cout << "no match\n";
      return;
    }
    const std::size_t limit =
        query_top <= 0 ? hits.size() : std::min<std::size_t>(hits.size(), size_t(query_top));
    for (std::size_t i = 0; i < limit; ++i)
      std::cout << hits[i].id << "\t" << g17(hits[i].distance) << "\t"
                << (hits[i].decision == Decision::Copy ? "copy" : "different") << "\n";
  });

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate",
                                     "fit the adjustment factor and decision threshold");
  std::string cal_db, cal_pairs, cal_out = ".", cal_config;
  double cal_step = 0.05;
  cal_cmd->add_option("--db", cal_db)->required();
  cal_cmd->add_option("--pairs", cal_pairs, "JSON-lines labeled queries")->required();
  cal_cmd->add_option("--grid-step", cal_step)->check(CLI::Range(0.001, 1.0));
  cal_cmd->add_option("--out-dir", cal_out);
  cal_cmd->add_option("--config", cal_config, "JSON config file");
  cal_cmd->callback([&] {
    const Settings s = loadSettings(cal_config);
    const Database db = Database::load(cal_db);
    const std::vector<LabeledQuery> queries = loadLabeledPairs(cal_pairs);

    std::vector<double> grid;
    for (double a = 0.0; a < 1.0 + 1e-12; a += cal_step) grid.push_back(std::min(a, 1.0));
    if (grid.back() != 1.0) grid.push_back(1.0);
    const CalibrationCurve curve = calibrateAdjustmentFactor(db, queries, grid);

    std::map<std::string, std::size_t> index_by_id;
    for (std::size_t i = 0; i < db.size(); ++i) index_by_id[db.records()[i].id] = i;
    std::vector<double> v, w;
    for (const LabeledQuery& q : queries) {
      std::set<std::string> positives(q.positive_ids.begin(), q.positive_ids.end());
      for (const FingerprintRecord& record : db.records()) {
        const double d = l2Distance(q.fingerprint, record.fingerprint);
        (positives.contains(record.id) ? v : w).push_back(d);
      }
    }
    const ThresholdModel model = fitThreshold(v, w);

    fs::create_directories(cal_out);
    writeCalibrationCsv(fs::path(cal_out) / "calibration.csv", curve);
    writeThresholdCsv(fs::path(cal_out) / "threshold.csv", model);
    std::cout << "# config: " << settingsToJson(s).dump() << "\n";
    std::cout << "chosen_a: " << g17(curve.chosen_a) << "\n";
    std::cout << "tau: " << g17(model.tau) << "\n";
  });

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "run the modification robustness suite");
  std::string eval_corpus, eval_out, eval_mods = "singles", eval_system = "comprehensive";
  std::string eval_config, eval_fit = "per-mod";
  double eval_beta = 0.5, eval_tau = -1.0;
  std::uint64_t eval_seed = 0;
  int eval_threads = 1;
  eval_cmd->add_option("--corpus", eval_corpus, "directory of videos")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--mods", eval_mods, "comma list, or singles/combos/all");
  eval_cmd->add_option("--system", eval_system)
      ->check(CLI::IsMember({"comprehensive", "baseline", "both"}));
  eval_cmd->add_option("--beta", eval_beta)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--fit", eval_fit, "threshold fitting: per-mod or pooled")
      ->check(CLI::IsMember({"per-mod", "pooled"}));
  eval_cmd->add_option("--tau", eval_tau, "fixed decision threshold instead of fitting")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--config", eval_config, "JSON config file");
  eval_cmd->add_option("--seed", eval_seed);
  eval_cmd->add_option("--threads", eval_threads)->check(CLI::Range(1, 256));
  eval_cmd->callback([&] {
    Settings s = loadSettings(eval_config);
    if (eval_cmd->count("--seed")) s.pipeline.seed = eval_seed;
    const std::vector<FrameSequence> corpus = loadCorpusDir(eval_corpus, eval_threads);
    const std::vector<Modification> mods = parseMods(eval_mods);

    EvalOptions options;
    options.pipeline = s.pipeline;
    options.beta = eval_beta;
    options.seed = eval_seed;
    options.threads = eval_threads;
    options.threshold_mode = eval_fit == "pooled" ? ThresholdMode::FitPooled
                                                  : ThresholdMode::FitPerModification;
    if (eval_cmd->count("--tau")) {
      options.threshold_mode = ThresholdMode::Fixed;
      options.thresholds = {eval_tau};
    }

    std::vector<EvalReport> reports;
    if (eval_system == "comprehensive" || eval_system == "both")
      reports.push_back(runEvaluation(corpus, mods, EvalSystem::Comprehensive, options));
    if (eval_system == "baseline" || eval_system == "both")
      reports.push_back(runEvaluation(corpus, mods, EvalSystem::ConcatenatedBaseline, options));

    fs::create_directories(eval_out);
    const std::string header = settingsToJson(s).dump();
    writeEvalCsv(fs::path(eval_out) / "report.csv", reports, header);
    writeRocCsv(fs::path(eval_out) / "roc.csv", reports);
    for (const EvalReport& report : reports) {
      if (!report.condition_numbers.empty())
        writeConditionCsv(fs::path(eval_out) / "condition.csv", report.condition_numbers);
      std::cout << report.system << ": thresholds "
                << (report.threshold_mode == ThresholdMode::Fixed
                        ? "fixed"
                        : (report.threshold_mode == ThresholdMode::FitPooled
                               ? "fitted-pooled"
                               : "fitted-per-modification"));
      if (report.pooled_fit_ok) std::cout << ", pooled_tau=" << g17(report.pooled_tau);
      std::cout << ", runtime=" << report.runtime_seconds << "s\n";
    }
    std::cout << "reports written to " << eval_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
