#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "skgc/analysis.hpp"
#include "skgc/distributions.hpp"
#include "skgc/latent.hpp"
#include "skgc/special_functions.hpp"
#include "skgc/trainer.hpp"

namespace py = pybind11;
using namespace skgc;

namespace {

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["mrr"] = m.mrr;
  d["hit1"] = m.hit1;
  d["hit3"] = m.hit3;
  d["hit10"] = m.hit10;
  d["count"] = m.count;
  return d;
}

py::dict report_dict(const RankingReport& r) {
  py::dict d;
  d["split"] = r.split;
  d["forward"] = metrics_dict(r.forward);
  d["backward"] = metrics_dict(r.backward);
  d["average"] = metrics_dict(r.average);
  return d;
}

TrainConfig config_from(const std::string& path, const std::map<std::string, std::string>& overrides) {
  Config c = Config::load(path);
  for (const auto& [k, v] : overrides) c.set(k, v);
  return TrainConfig::from_config(c);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse latent-feature knowledge graph completion";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("digamma", &digamma);
  m.def("log_beta", &log_beta_fn);
  m.def(
      "kl_beta", [](double qa, double qb, double pa, double pb) { return kl_beta({qa, qb}, {pa, pb}); },
      py::arg("q_a"), py::arg("q_b"), py::arg("p_a"), py::arg("p_b"));
  m.def(
      "kl_gaussian",
      [](double qm, double qs, double pm, double ps) { return kl_gaussian({qm, qs}, {pm, ps}); },
      py::arg("q_mu"), py::arg("q_sigma"), py::arg("p_mu") = 0.0, py::arg("p_sigma") = 1.0);

  m.def("stick_breaking", &stick_breaking, py::arg("v"));
  m.def("expected_active_communities", &expected_active_communities, py::arg("alpha"), py::arg("K"));
  m.def(
      "sample_prior",
      [](double alpha, int K, int rows, std::uint64_t seed) {
        const TruncationConfig cfg{K, alpha, alpha, 1.0};
        const NoiseStream noise(seed);
        Eigen::MatrixXd z(rows, K);
        for (int r = 0; r < rows; ++r)
          z.row(r) = sample_prior_row(cfg, Role::answer, noise, static_cast<std::uint64_t>(r)).z.transpose();
        return z;
      },
      py::arg("alpha"), py::arg("K"), py::arg("rows"), py::arg("seed") = 0,
      "Binary prior masks, one row per draw.");

  m.def(
      "rank_query",
      [](int gold, const Eigen::VectorXd& scores, const std::vector<int>& filtered) {
        return rank_query(gold, scores, filtered);
      },
      py::arg("gold"), py::arg("scores"), py::arg("filtered") = std::vector<int>{});

  m.def(
      "dataset_stats",
      [](const std::string& path) {
        LoadOptions opts;
        opts.with_descriptions = false;
        const auto kg = load_dataset(path, opts);
        py::dict d;
        d["entities"] = kg.num_entities();
        d["relations"] = kg.num_base_relations();
        d["train"] = kg.split(Split::train).size();
        d["valid"] = kg.split(Split::valid).size();
        d["test"] = kg.split(Split::test).size();
        return d;
      },
      py::arg("path"));

  m.def(
      "modularity",
      [](const std::string& path, std::uint64_t seed, double gamma) {
        LoadOptions opts;
        opts.with_descriptions = false;
        const auto kg = load_dataset(path, opts);
        const Graph g = train_graph(kg);
        const auto parts = label_propagation(g, seed);
        return py::make_tuple(modularity(g, parts.labels, gamma), parts.num_communities);
      },
      py::arg("path"), py::arg("seed") = 1, py::arg("gamma") = 1.0,
      "Label propagation on the training graph; returns (Q, number of communities).");

  m.def(
      "train",
      [](const std::string& config, const std::map<std::string, std::string>& overrides, const std::string& run_dir) {
        const TrainConfig cfg = config_from(config, overrides);
        TrainResult res;
        RankingReport report;
        {
          py::gil_scoped_release release;
          const auto kg = load_dataset(cfg.data_path);
          auto model = make_model(kg, cfg);
          res = train(kg, cfg, *model, {run_dir});
          report = evaluate(*model, kg, Split::test, FilterIndex(kg));
        }
        py::dict d;
        d["best_epoch"] = res.best_epoch;
        d["best_valid_mrr"] = res.best_valid_mrr;
        d["steps"] = res.total_steps;
        d["test"] = report_dict(report);
        return d;
      },
      py::arg("config"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("run_dir") = "",
      "Train from a config file and evaluate the result on the test split.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& split, const std::string& data) {
        RankingReport report;
        {
          py::gil_scoped_release release;
          const auto loaded = load_model(checkpoint, data);
          report = evaluate(*loaded.model, *loaded.kg, parse_split(split), FilterIndex(*loaded.kg));
        }
        return report_dict(report);
      },
      py::arg("checkpoint"), py::arg("split") = "test", py::arg("data") = "");
}
