// skgc: train, evaluate and analyse sparse latent-feature KG completion models.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "skgc/analysis.hpp"
#include "skgc/config.hpp"
#include "skgc/evaluator.hpp"
#include "skgc/kgstore.hpp"
#include "skgc/latent.hpp"
#include "skgc/trainer.hpp"

namespace fs = std::filesystem;
using namespace skgc;

namespace {

constexpr int kExitConfig = 2;

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SKGC_OUTPUT_DIR")) return env;
  return "runs";
}

fs::path resolve_dataset_or_throw(const std::string& name) {
  auto p = find_dataset(name, SKGC_SOURCE_DIR);
  if (!p) throw ConfigError("dataset not found: '" + name + "'");
  return *p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

KnowledgeGraph load_for(const TrainConfig& cfg) {
  LoadOptions lo;
  lo.with_descriptions = cfg.descriptions;
  lo.strict = cfg.strict;
  return load_dataset(cfg.data_path, lo);
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string output;
  std::string run_name;
  long long seed = -1;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  Config raw = a.config.empty() ? Config() : Config::load(a.config);
  for (const auto& o : a.overrides) raw.apply_override(o);
  if (!a.data.empty()) raw.set("data.path", a.data);
  if (a.seed >= 0) raw.set("train.seed", std::to_string(a.seed));
  TrainConfig cfg = TrainConfig::from_config(raw);
  if (cfg.data_path.empty()) throw ConfigError("missing dataset path (data.path)");
  cfg.data_path = resolve_dataset_or_throw(cfg.data_path).string();

  std::string name = a.run_name;
  if (name.empty()) {
    const std::string stem = a.config.empty() ? "run" : fs::path(a.config).stem().string();
    name = stem + "-" + head_kind_name(cfg.model.head) + "-seed" + std::to_string(cfg.seed);
  }
  const fs::path run_dir = output_root(a.output) / name;
  fs::create_directories(run_dir);

  const KnowledgeGraph kg = load_for(cfg);
  auto model = make_model(kg, cfg);
  TrainOptions opts;
  opts.run_dir = run_dir;
  if (!a.quiet) {
    opts.on_epoch = [](const EpochRecord& r) {
      std::cout << "epoch " << r.epoch << " loss " << r.train.total << " comp " << r.train.comp_total;
      if (r.validated) std::cout << " valid_comp " << r.valid_comp << " valid_mrr " << r.valid.mrr;
      std::cout << std::endl;
    };
  }
  const TrainResult result = train(kg, cfg, *model, opts);
  // Raw resolved config: keeps the user's spelling of every value.
  Config resolved = cfg.to_config();
  for (const auto& [k, v] : raw.values()) resolved.set(k, v);
  resolved.set("data.path", cfg.data_path);
  resolved.save(run_dir / "config.resolved.cfg");

  if (!kg.split(Split::test).empty()) {
    EvalOptions eo;
    eo.threads = cfg.threads;
    const RankingReport report = evaluate(*model, kg, Split::test, FilterIndex(kg), eo);
    write_text(run_dir / "reports" / "test.json", report_json(report) + "\n");
    write_text(run_dir / "reports" / "test.txt", report_text(report));
    if (!a.quiet) std::cout << report_text(report);
  }
  std::cout << "run directory: " << run_dir.string() << " (best epoch " << result.best_epoch << ")" << std::endl;
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string split = "test";
  std::string data;
  std::string out;
  std::string dump_ranks;
  int threads = 0;
};

fs::path reports_dir_for(const fs::path& checkpoint, const std::string& out) {
  if (!out.empty()) return out;
  const fs::path run = checkpoint.parent_path().parent_path();
  if (checkpoint.parent_path().filename() == "checkpoints" && fs::is_directory(run)) return run / "reports";
  return ".";
}

int cmd_eval(const EvalArgs& a) {
  LoadedModel lm = load_model(a.checkpoint, a.data.empty() ? "" : resolve_dataset_or_throw(a.data).string());
  const Split split = parse_split(a.split);
  EvalOptions eo;
  eo.threads = a.threads > 0 ? a.threads : lm.config.threads;
  const RankingReport report = evaluate(*lm.model, *lm.kg, split, FilterIndex(*lm.kg), eo);
  const fs::path dir = reports_dir_for(a.checkpoint, a.out);
  fs::create_directories(dir);
  const std::string stem = fs::path(a.checkpoint).stem().string() + "." + a.split;
  write_text(dir / (stem + ".json"), report_json(report) + "\n");
  write_text(dir / (stem + ".txt"), report_text(report));
  if (!a.dump_ranks.empty()) write_ranks_tsv(report, *lm.kg, a.dump_ranks);
  std::cout << report_text(report);
  return 0;
}

struct AnalyzeArgs {
  std::string which;
  std::string checkpoint;
  std::string dataset;
  std::string ranks;
  std::string split = "test";
  std::string out;
  double threshold = 0.5;
  double gamma = 1.0;
  long long seed = 1;
  int top = 5;
  int communities = 8;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
  fs::create_directories(out);
  if (a.which == "modularity") {
    if (a.dataset.empty()) throw ConfigError("analyze modularity needs --dataset");
    const KnowledgeGraph kg = load_dataset(resolve_dataset_or_throw(a.dataset), {false, false});
    const Graph g = train_graph(kg);
    const CommunityAssignment part = label_propagation(g, static_cast<std::uint64_t>(a.seed));
    const double q = modularity(g, part.labels, a.gamma);
    nlohmann::ordered_json j;
    j["dataset"] = a.dataset;
    j["nodes"] = g.num_nodes;
    j["edges"] = g.num_edges;
    j["communities"] = part.num_communities;
    j["rounds"] = part.rounds;
    j["gamma"] = a.gamma;
    j["seed"] = a.seed;
    j["modularity"] = q;
    write_text(out / "modularity.json", j.dump(2) + "\n");
    std::cout << "modularity " << q << " (" << part.num_communities << " communities)" << std::endl;
    return 0;
  }
  if (a.which == "geodesic") {
    if (a.ranks.empty()) throw ConfigError("analyze geodesic needs a ranks TSV (--ranks, from eval --dump-ranks)");
    if (!fs::exists(a.ranks)) throw ConfigError("missing ranks TSV: " + a.ranks);
    if (a.dataset.empty()) throw ConfigError("analyze geodesic needs --dataset");
    const KnowledgeGraph kg = load_dataset(resolve_dataset_or_throw(a.dataset), {false, false});
    const auto ranks = read_ranks_tsv(a.ranks, kg);
    const GeodesicBreakdown b = geodesic_breakdown(kg, kg.split(parse_split(a.split)), ranks);
    const std::string table = geodesic_table(b);
    write_text(out / "geodesic.txt", table);
    std::ofstream tsv(out / "geodesic.tsv");
    tsv << "distance\ttriples\tmrr\thit@1\thit@3\thit@10\n";
    for (const auto& bucket : b.buckets) {
      tsv << bucket.name << '\t' << bucket.triples.size() << '\t' << bucket.metrics.mrr << '\t'
          << bucket.metrics.hit1 << '\t' << bucket.metrics.hit3 << '\t' << bucket.metrics.hit10 << '\n';
    }
    std::cout << table;
    return 0;
  }
  if (a.which == "communities" || a.which == "latent") {
    if (a.checkpoint.empty()) throw ConfigError("analyze " + a.which + " needs --checkpoint");
    LoadedModel lm = load_model(a.checkpoint, a.dataset.empty() ? "" : resolve_dataset_or_throw(a.dataset).string());
    std::vector<int> all(static_cast<std::size_t>(lm.kg->num_entities()));
    for (int e = 0; e < lm.kg->num_entities(); ++e) all[static_cast<std::size_t>(e)] = e;
    const Model::Latents lat = lm.model->entity_latents(all);
    if (a.which == "communities") {
      if (lat.z.size() == 0) throw ConfigError("analyze communities needs a sparse-head checkpoint");
      const double avg = activated_communities(lat.z, a.threshold);
      nlohmann::ordered_json j;
      j["threshold"] = a.threshold;
      j["entities"] = lat.z.rows();
      j["K"] = lat.z.cols();
      j["activated_communities"] = avg;
      write_text(out / "communities.json", j.dump(2) + "\n");
      std::cout << "average activated communities " << avg << std::endl;
      return 0;
    }
    const LatentExport ex = export_latent_structure(lat.f, lm.kg.get(), a.top, a.communities);
    write_matrix_csv(ex.sorted, out / "F_ans.csv");
    const std::string table = communities_table(ex);
    write_text(out / "communities.txt", table);
    std::cout << table;
    return 0;
  }
  throw ConfigError("unknown analysis: " + a.which);
}

struct PriorArgs {
  double alpha = 5.0;
  int K = 128;
  long long rows = 100000;
  long long seed = 1;
  std::string role = "answer";
};

int cmd_sample_prior(const PriorArgs& a) {
  TruncationConfig cfg;
  cfg.K = a.K;
  cfg.alpha_qry = a.alpha;
  cfg.alpha_ans = a.alpha;
  cfg.validate();
  if (a.rows < 2) throw ConfigError("sample-prior needs --rows >= 2");
  const Role role = a.role == "query" ? Role::query : Role::answer;
  const NoiseStream noise(static_cast<std::uint64_t>(a.seed));
  double sum = 0.0, sq = 0.0;
  for (long long r = 0; r < a.rows; ++r) {
    const double n = sample_prior_row(cfg, role, noise, static_cast<std::uint64_t>(r)).z.sum();
    sum += n;
    sq += n * n;
  }
  const double n = static_cast<double>(a.rows);
  const double mean = sum / n;
  const double var = (sq - n * mean * mean) / (n - 1.0);
  const double expected = expected_active_communities(a.alpha, a.K);
  nlohmann::ordered_json j;
  j["alpha"] = a.alpha;
  j["K"] = a.K;
  j["rows"] = a.rows;
  j["mean_active"] = mean;
  j["std_error"] = std::sqrt(var / n);
  j["expected_active"] = expected;
  std::cout << j.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse latent-feature knowledge graph completion"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model and evaluate it on the test split");
  train_cmd->add_option("--config", ta.config, "key = value config file");
  train_cmd->add_option("--set", ta.overrides, "override, e.g. objective.beta=1e-2")->take_all();
  train_cmd->add_option("--data", ta.data, "dataset directory or name");
  train_cmd->add_option("--seed", ta.seed, "seed (overrides train.seed)");
  train_cmd->add_option("--output", ta.output, "output root (default $SKGC_OUTPUT_DIR or runs)");
  train_cmd->add_option("--name", ta.run_name, "run directory name");
  train_cmd->add_flag("--quiet", ta.quiet);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Filtered ranking evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--split", ea.split)->check(CLI::IsMember({"train", "valid", "test"}));
  eval_cmd->add_option("--data", ea.data, "dataset override");
  eval_cmd->add_option("--out", ea.out, "report directory");
  eval_cmd->add_option("--dump-ranks", ea.dump_ranks, "write per-query ranks TSV");
  eval_cmd->add_option("--threads", ea.threads);

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "Structural analyses");
  analyze_cmd->add_option("which", aa.which, "communities | modularity | geodesic | latent")
      ->required()
      ->check(CLI::IsMember({"communities", "modularity", "geodesic", "latent"}));
  analyze_cmd->add_option("--checkpoint", aa.checkpoint);
  analyze_cmd->add_option("--dataset", aa.dataset);
  analyze_cmd->add_option("--ranks", aa.ranks, "ranks TSV from eval --dump-ranks");
  analyze_cmd->add_option("--split", aa.split);
  analyze_cmd->add_option("--out", aa.out, "output directory");
  analyze_cmd->add_option("--threshold", aa.threshold);
  analyze_cmd->add_option("--gamma", aa.gamma, "modularity resolution");
  analyze_cmd->add_option("--seed", aa.seed);
  analyze_cmd->add_option("--top", aa.top);
  analyze_cmd->add_option("--communities", aa.communities);

  PriorArgs pa;
  auto* prior_cmd = app.add_subcommand("sample-prior", "Monte Carlo statistics of the stick-breaking prior");
  prior_cmd->add_option("--alpha", pa.alpha);
  prior_cmd->add_option("--K", pa.K);
  prior_cmd->add_option("--rows", pa.rows);
  prior_cmd->add_option("--seed", pa.seed);
  prior_cmd->add_option("--role", pa.role)->check(CLI::IsMember({"query", "answer"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_cmd) return cmd_train(ta);
    if (*eval_cmd) return cmd_eval(ea);
    if (*analyze_cmd) return cmd_analyze(aa);
    if (*prior_cmd) return cmd_sample_prior(pa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
