// annotagg: label aggregation pipeline over plain files.
//
// Each subcommand reads its inputs by path and writes its artifacts plus a
// manifest.<subcommand>.json into --out. Exit codes: 0 success, 1 usage
// error, 2 data error, 3 transport failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "annotagg/agreement.hpp"
#include "annotagg/baselines.hpp"
#include "annotagg/error.hpp"
#include "annotagg/evaluation.hpp"
#include "annotagg/exemplars.hpp"
#include "annotagg/label_data.hpp"
#include "annotagg/mace.hpp"
#include "annotagg/pipeline.hpp"
#include "annotagg/prompts.hpp"
#include "annotagg/random.hpp"
#include "annotagg/simulator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace annotagg;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

// Collects the artifacts of one invocation; removes them again on failure.
class Run {
 public:
  Run(std::string subcommand, CLI::App* app) : subcommand_(std::move(subcommand)), app_(app) {}

  void set_out(const fs::path& dir) { out_ = dir; }

  void input(const fs::path& path) {
    if (path.empty()) return;
    inputs_.push_back({{"path", path.string()}, {"fnv1a", hex64(hash_string(read_file(path)))}});
  }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = out_ / name;
    {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw DataError("cannot write '" + path.string() + "'");
      written_.push_back(path);
      out << content;
      if (!out) throw DataError("failed writing '" + path.string() + "'");
    }
    outputs_.push_back({{"path", name}, {"fnv1a", hex64(hash_string(content))}});
  }

  void finish() {
    // only this subcommand's settings; enough to rerun it via --config
    std::string config, hashed;
    {
      std::istringstream all(app_->config_to_str(true, false));
      const std::string prefix = subcommand_ + ".";
      for (std::string line; std::getline(all, line);)
        if (line.rfind(prefix, 0) == 0 && !line.ends_with("=\"\"")) {
          config += line + "\n";
          // the output location does not affect content
          if (line.rfind(prefix + "out=", 0) != 0) hashed += line + "\n";
        }
    }
    json manifest;
    manifest["tool"] = "annotagg";
    manifest["version"] = kVersion;
    manifest["subcommand"] = subcommand_;
    manifest["config"] = config;
    manifest["config_hash"] = hex64(hash_string(hashed));
    manifest["seeds"] = seeds_;
    manifest["inputs"] = inputs_;
    manifest["outputs"] = outputs_;
    if (!notes_.empty()) manifest["notes"] = notes_;
    write("manifest." + subcommand_ + ".json", manifest.dump(2) + "\n");
  }

  void rollback() noexcept {
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::string subcommand_;
  CLI::App* app_;
  fs::path out_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json seeds_ = json::object();
  json notes_ = json::object();
  std::vector<fs::path> written_;
};

struct SpaceOptions {
  std::string task;
  std::vector<std::string> labels;

  void add(CLI::App* cmd) {
    auto* t = cmd->add_option("--task", task, "Task spec JSON (provides the label space)")
                  ->check(CLI::ExistingFile);
    auto* l = cmd->add_option("--labels", labels, "Comma-separated label space")->delimiter(',');
    t->excludes(l);
  }
  LabelSpace resolve(Run& run) const {
    if (!task.empty()) {
      run.input(task);
      return prompts::TaskSpec::load(task).label_space();
    }
    if (labels.empty()) throw UsageError("one of --task or --labels is required");
    return LabelSpace(labels);
  }
};

struct MaceOptions {
  mace::Config config;
  std::string mode = "em";
  std::optional<double> threshold;

  void add(CLI::App* cmd) {
    cmd->add_option("--restarts", config.restarts, "Random restarts")->capture_default_str();
    cmd->add_option("--iterations", config.iterations, "EM iterations per restart")
        ->capture_default_str();
    cmd->add_option("--smoothing", config.smoothing, "Additive smoothing per count")
        ->capture_default_str();
    cmd->add_option("--mode", mode, "Inference mode")
        ->check(CLI::IsMember({"em", "vb"}))
        ->capture_default_str();
    cmd->add_option("--alpha", config.vb_alpha, "VB Beta prior on competence")
        ->capture_default_str();
    cmd->add_option("--beta", config.vb_beta, "VB Dirichlet prior on strategies")
        ->capture_default_str();
    cmd->add_option("--tol", config.tolerance, "Relative log-likelihood convergence tolerance")
        ->capture_default_str();
    cmd->add_option("--threshold", threshold,
                    "Label only this fraction of lowest-entropy items (0,1]");
    cmd->add_option("--threads", config.threads, "Concurrent restarts (0 = all cores)")
        ->capture_default_str();
  }
  mace::Config resolve(std::uint64_t seed) const {
    mace::Config c = config;
    c.mode = mode == "vb" ? mace::Mode::vb : mace::Mode::em;
    c.seed = seed;
    return c;
  }
};

std::string to_csv(auto&& writer) {
  std::ostringstream ss;
  writer(ss);
  return ss.str();
}

AnnotationMatrix load_matrix(const fs::path& path, const LabelSpace& space, Run& run) {
  run.input(path);
  auto in = open_input(path);
  try {
    return read_matrix_csv(in, space);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annotagg: aggregate labels from multiple LLM or human annotators"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Read flags from a TOML/INI config file");
  app.require_subcommand(1);

  fs::path out_dir;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* cmd, bool seeded) {
    cmd->add_option("-o,--out", out_dir, "Output directory")->required();
    if (seeded) cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
  };

  // normalize
  auto* normalize = app.add_subcommand("normalize", "Raw responses -> normalized matrix CSV");
  SpaceOptions norm_space;
  std::vector<fs::path> responses_paths;
  fs::path dataset_path;
  std::optional<std::string> fallback_label;
  norm_space.add(normalize);
  normalize->add_option("--responses", responses_paths,
                        "Responses JSONL or CSV item_id,annotator_id,raw (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  normalize->add_option("--dataset", dataset_path, "Dataset with gold (defines item order and fallback)")
      ->check(CLI::ExistingFile);
  normalize->add_option("--fallback", fallback_label, "Override the out-of-label fallback label");
  add_common(normalize, false);

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "Matrix -> aggregated labels CSV");
  SpaceOptions agg_space;
  fs::path matrix_path;
  std::string method = "majority";
  MaceOptions agg_mace;
  agg_space.add(aggregate);
  aggregate->add_option("--matrix", matrix_path, "Normalized matrix CSV")
      ->required()
      ->check(CLI::ExistingFile);
  aggregate->add_option("--method", method, "Aggregation method")
      ->check(CLI::IsMember({"majority", "mace"}))
      ->capture_default_str();
  agg_mace.add(aggregate);
  add_common(aggregate, true);

  // agreement
  auto* agreement_cmd = app.add_subcommand("agreement", "Matrix -> inter-annotator agreement report");
  SpaceOptions agr_space;
  std::string row_name = "task";
  agr_space.add(agreement_cmd);
  agreement_cmd->add_option("--matrix", matrix_path, "Normalized matrix CSV")
      ->required()
      ->check(CLI::ExistingFile);
  agreement_cmd->add_option("--name", row_name, "Row label for the text table")->capture_default_str();
  add_common(agreement_cmd, false);

  // mace
  auto* mace_cmd = app.add_subcommand("mace", "Matrix -> MACE model, competence, entropy, labels");
  SpaceOptions mace_space;
  MaceOptions mace_opts;
  mace_space.add(mace_cmd);
  mace_cmd->add_option("--matrix", matrix_path, "Normalized matrix CSV")
      ->required()
      ->check(CLI::ExistingFile);
  mace_opts.add(mace_cmd);
  add_common(mace_cmd, true);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Labels + gold -> macro-F1 report with bootstrap");
  SpaceOptions eval_space;
  fs::path gold_path, competence_path;
  std::vector<fs::path> label_paths;
  std::string reference = "random";
  eval::BootstrapConfig bootstrap;
  std::uint64_t baseline_seed = 0;
  bool no_baselines = false;
  std::string column = "macro_f1";
  eval_space.add(evaluate);
  evaluate->add_option("--gold", gold_path, "Dataset with gold labels or truth CSV item_id,label")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--predictions", label_paths, "Aggregated labels CSV (repeatable)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--matrix", matrix_path, "Normalized matrix CSV for per-annotator scores")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--competence", competence_path, "Competence CSV for correlation")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--reference", reference, "Source the bootstrap test compares against")
      ->capture_default_str();
  evaluate->add_option("--samples", bootstrap.samples, "Bootstrap samples")->capture_default_str();
  evaluate->add_option("--sample-frac", bootstrap.sample_frac, "Bootstrap sample size fraction")
      ->capture_default_str();
  evaluate->add_option("--baseline-seed", baseline_seed, "Seed of the random baseline")
      ->capture_default_str();
  evaluate->add_flag("--no-baselines", no_baselines, "Skip the most_frequent and random baselines");
  evaluate->add_option("--threads", bootstrap.threads, "Bootstrap worker threads (0 = all cores)")
      ->capture_default_str();
  evaluate->add_option("--column", column, "Column header of the text table")->capture_default_str();
  add_common(evaluate, true);

  // select
  auto* select = app.add_subcommand("select", "Entropy CSV + classes -> few-shot exemplar JSON");
  SpaceOptions sel_space;
  fs::path entropy_path, classes_path;
  std::size_t k_per_class = 3;
  std::string strategy = "low_entropy";
  std::size_t pool_cap = 4000;
  sel_space.add(select);
  select->add_option("--entropy", entropy_path, "Entropy CSV item_id,entropy")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--classes", classes_path,
                     "Class per item: dataset with gold, or labels CSV item_id,label")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--k", k_per_class, "Exemplars per class")->capture_default_str();
  select->add_option("--strategy", strategy, "Selection strategy")
      ->check(CLI::IsMember({"low_entropy", "max_entropy", "random"}))
      ->capture_default_str();
  select->add_option("--pool-cap", pool_cap, "Maximum pool size")->capture_default_str();
  add_common(select, true);

  // render
  auto* render = app.add_subcommand("render", "Task + dataset [+ exemplars] -> prompts JSONL");
  fs::path task_path, exemplars_path, exemplar_dataset_path;
  render->add_option("--task", task_path, "Task spec JSON")->required()->check(CLI::ExistingFile);
  render->add_option("--dataset", dataset_path, "Dataset to prompt for")
      ->required()
      ->check(CLI::ExistingFile);
  render->add_option("--exemplars", exemplars_path, "Exemplar selection JSON")
      ->check(CLI::ExistingFile);
  render->add_option("--exemplar-dataset", exemplar_dataset_path,
                     "Dataset holding exemplar texts (default: --dataset)")
      ->check(CLI::ExistingFile);
  add_common(render, false);

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Prompts + endpoint -> raw responses JSONL");
  fs::path prompts_path, replay_path;
  std::string annotator_id, url;
  double timeout = 60.0;
  std::size_t retries = 2, in_flight = 4;
  annotate->add_option("--prompts", prompts_path, "Prompts JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  annotate->add_option("--annotator-id", annotator_id, "Annotator id")->required();
  auto* replay_opt = annotate->add_option("--replay", replay_path, "Replay store JSONL")
                         ->check(CLI::ExistingFile);
  auto* url_opt = annotate->add_option("--url", url, "HTTP endpoint: POST {prompt} -> {text}");
  replay_opt->excludes(url_opt);
  annotate->add_option("--timeout", timeout, "HTTP timeout in seconds")->capture_default_str();
  annotate->add_option("--retries", retries, "HTTP retries per prompt")->capture_default_str();
  annotate->add_option("--max-in-flight", in_flight, "Concurrent HTTP requests")
      ->capture_default_str();
  add_common(annotate, false);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Synthetic annotations from the MACE generative model");
  fs::path sim_config_path;
  std::size_t sim_items = 1000, sim_labels = 3;
  std::vector<double> sim_theta{0.9, 0.7, 0.5, 0.3};
  double missing_rate = 0.0;
  simulate->add_option("--sim-config", sim_config_path, "Simulation config JSON")
      ->check(CLI::ExistingFile);
  simulate->add_option("--items", sim_items, "Number of items")->capture_default_str();
  simulate->add_option("--num-labels", sim_labels, "Number of labels")->capture_default_str();
  simulate->add_option("--theta", sim_theta, "Annotator competences")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--missing-rate", missing_rate, "Probability a cell is absent")
      ->capture_default_str();
  add_common(simulate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Run run(cmd->get_name(), &app);
  int code = 0;
  try {
    if (!fs::exists(out_dir)) fs::create_directories(out_dir);
    run.set_out(out_dir);

    if (cmd == normalize) {
      const auto space = norm_space.resolve(run);
      std::vector<AnnotationRecord> records;
      for (const auto& path : responses_paths) {
        run.input(path);
        auto in = open_input(path);
        auto part = format_from_path(path) == DatasetFormat::jsonl ? read_responses_jsonl(in)
                                                                    : read_annotations_csv(in, space);
        records.insert(records.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
      }
      std::optional<Dataset> dataset;
      if (!dataset_path.empty()) {
        run.input(dataset_path);
        dataset = load_dataset(dataset_path, format_from_path(dataset_path), space);
      }
      const auto fallback =
          pipeline::resolve_fallback(space, dataset ? &*dataset : nullptr, records, fallback_label);
      records = normalize_records(std::move(records), space, fallback);
      std::vector<std::string> order;
      if (dataset)
        for (const auto& inst : dataset->instances) order.push_back(inst.id);
      const auto matrix = AnnotationMatrix::from_records(records, space, dataset ? &order : nullptr);
      run.write("matrix.csv", to_csv([&](std::ostream& o) { write_matrix_csv(o, matrix); }));
      json ool;
      ool["fallback"] = space.name(fallback);
      if (!records.empty()) {
        ool["all"] = ool_rate(records, OolGrouping::all).at("all");
        ool["per_annotator"] = ool_rate(records, OolGrouping::annotator);
      }
      run.write("ool.json", ool.dump(2) + "\n");
    } else if (cmd == aggregate) {
      const auto space = agg_space.resolve(run);
      const auto matrix = load_matrix(matrix_path, space, run);
      run.seed("seed", seed);
      std::vector<std::optional<LabelId>> labels;
      if (method == "majority") {
        for (const auto& v : majority_vote(matrix, seed)) labels.push_back(v.label);
      } else {
        const auto model = mace::fit(matrix, agg_mace.resolve(seed));
        labels = mace::decode(model, agg_mace.threshold);
      }
      run.write("labels.csv", to_csv([&](std::ostream& o) {
                  write_labels_csv(o, space, matrix.item_ids(), labels, method);
                }));
    } else if (cmd == agreement_cmd) {
      const auto space = agr_space.resolve(run);
      const auto matrix = load_matrix(matrix_path, space, run);
      const auto report = agreement::compute(matrix);
      run.write("agreement.json", agreement::to_json(report, matrix).dump(2) + "\n");
      run.write("agreement.txt", agreement::format_table(report, row_name));
    } else if (cmd == mace_cmd) {
      const auto space = mace_space.resolve(run);
      const auto matrix = load_matrix(matrix_path, space, run);
      run.seed("seed", seed);
      const auto model = mace::fit(matrix, mace_opts.resolve(seed));
      run.write("model.json", mace::to_json(model).dump(2) + "\n");
      run.write("competence.csv", to_csv([&](std::ostream& o) { mace::write_competence_csv(o, model); }));
      run.write("entropy.csv", to_csv([&](std::ostream& o) { mace::write_entropy_csv(o, model); }));
      const auto labels = mace::decode(model, mace_opts.threshold);
      run.write("labels.csv", to_csv([&](std::ostream& o) {
                  write_labels_csv(o, space, matrix.item_ids(), labels, "mace");
                }));
    } else if (cmd == evaluate) {
      const auto space = eval_space.resolve(run);
      pipeline::EvaluationInputs in;
      in.space = &space;
      run.input(gold_path);
      in.gold = pipeline::load_gold(gold_path, space);
      std::optional<AnnotationMatrix> matrix;
      if (!matrix_path.empty()) {
        matrix = load_matrix(matrix_path, space, run);
        in.matrix = &*matrix;
      }
      if (!competence_path.empty()) {
        run.input(competence_path);
        auto cin = open_input(competence_path);
        in.competence = mace::read_competence_csv(cin);
      }
      for (const auto& p : label_paths) {
        run.input(p);
        auto lin = open_input(p);
        auto items = read_labels_csv(lin, space);
        in.labels.insert(in.labels.end(), items.begin(), items.end());
      }
      in.baselines = !no_baselines;
      in.baseline_seed = baseline_seed;
      in.reference = reference;
      bootstrap.seed = seed;
      in.bootstrap = bootstrap;
      run.seed("seed", seed);
      run.seed("baseline_seed", baseline_seed);
      const auto report = pipeline::evaluate(in);
      run.write("eval.json", eval::to_json(report).dump(2) + "\n");
      run.write("eval.txt", eval::format_table(report, column));
    } else if (cmd == select) {
      const auto space = sel_space.resolve(run);
      run.input(entropy_path);
      run.input(classes_path);
      run.seed("seed", seed);
      auto ein = open_input(entropy_path);
      const auto rows = exemplars::read_entropy_csv(ein);
      const auto classes = pipeline::load_gold(classes_path, space);
      std::map<std::string, LabelId> class_of;
      for (std::size_t i = 0; i < classes.item_ids.size(); ++i)
        class_of[classes.item_ids[i]] = classes.labels[i];
      std::vector<exemplars::PoolEntry> entries;
      for (const auto& r : rows)
        if (auto it = class_of.find(r.item_id); it != class_of.end())
          entries.push_back({r.item_id, it->second, r.entropy});
      const auto pool = exemplars::make_pool(std::move(entries), pool_cap, seed);
      std::map<LabelId, std::vector<std::string>> chosen;
      try {
        chosen = exemplars::select(pool, k_per_class, exemplars::strategy_from_string(strategy), seed);
      } catch (const DataError& e) {
        // name the class rather than its index
        std::string msg = e.what();
        for (LabelId k = 0; k < space.size(); ++k)
          if (msg.rfind("class " + std::to_string(k) + " ", 0) == 0)
            msg = "class '" + space.name(k) + "'" + msg.substr(6 + std::to_string(k).size());
        throw DataError(msg);
      }
      run.write("exemplars.json", exemplars::to_json(chosen, space).dump(2) + "\n");
    } else if (cmd == render) {
      run.input(task_path);
      const auto task = prompts::TaskSpec::load(task_path);
      run.input(dataset_path);
      const auto dataset = load_dataset(dataset_path, format_from_path(dataset_path), task.label_space());
      std::vector<prompts::Exemplar> shots;
      if (!exemplars_path.empty()) {
        run.input(exemplars_path);
        const auto& pool_path = exemplar_dataset_path.empty() ? dataset_path : exemplar_dataset_path;
        const auto pool = pool_path == dataset_path
                              ? dataset
                              : load_dataset(pool_path, format_from_path(pool_path), task.label_space());
        if (pool_path != dataset_path) run.input(pool_path);
        json sel;
        try {
          sel = json::parse(read_file(exemplars_path));
        } catch (const json::parse_error& e) {
          throw DataError(exemplars_path.string() + ": " + e.what());
        }
        for (const auto& [label, ids] : exemplars::selection_from_json(sel, task.label_space()))
          for (const auto& id : ids) {
            const auto* inst = pool.find(id);
            if (!inst) throw DataError("exemplar '" + id + "' is not in the exemplar dataset");
            shots.push_back({inst->text, label});
          }
      }
      std::vector<prompts::Prompt> out;
      for (const auto& inst : dataset.instances)
        out.push_back({inst.id, prompts::render_prompt(task, inst, shots)});
      run.write("prompts.jsonl", to_csv([&](std::ostream& o) { prompts::write_prompts_jsonl(o, out); }));
    } else if (cmd == annotate) {
      run.input(prompts_path);
      auto pin = open_input(prompts_path);
      const auto ps = prompts::read_prompts_jsonl(pin);
      prompts::Endpoint ep;
      ep.id = annotator_id;
      ep.max_in_flight = in_flight;
      if (!replay_path.empty()) {
        run.input(replay_path);
        ep.transport = prompts::ReplayTransport{replay_path};
      } else if (!url.empty()) {
        ep.transport = prompts::HttpTransport{url, timeout, retries};
      } else {
        throw UsageError("one of --replay or --url is required");
      }
      const auto result = prompts::annotate(ep, ps, std::cerr);
      run.note("missing", result.missing);
      run.note("warnings", result.warnings);
      run.write("responses.jsonl",
                to_csv([&](std::ostream& o) { write_responses_jsonl(o, result.records); }));
    } else if (cmd == simulate) {
      sim::Config config;
      if (!sim_config_path.empty()) {
        run.input(sim_config_path);
        json j;
        try {
          j = json::parse(read_file(sim_config_path));
        } catch (const json::parse_error& e) {
          throw UsageError(sim_config_path.string() + ": " + e.what());
        }
        config = sim::Config::from_json(j);
        if (cmd->count("--seed")) config.seed = seed;
      } else {
        config = sim::Config::uniform(sim_items, sim_labels, sim_theta, seed);
        config.missing_rate = missing_rate;
      }
      run.seed("seed", config.seed);
      const auto s = sim::simulate(config);
      run.write("annotations.csv", to_csv([&](std::ostream& o) { write_matrix_csv(o, s.matrix); }));
      run.write("truth.csv", to_csv([&](std::ostream& o) { sim::write_truth_csv(o, s); }));
      run.write("sim_config.json", config.to_json().dump(2) + "\n");
    }
    run.finish();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 1;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    code = 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    code = 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 2;
  }
  if (code != 0) run.rollback();
  return code;
}
