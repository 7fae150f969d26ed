#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "gdsrec/error.hpp"
#include "gdsrec/experiment.hpp"
#include "gdsrec/metrics.hpp"
#include "gdsrec/synthetic.hpp"

namespace py = pybind11;
using namespace gdsrec;

namespace {

RunConfig to_config(const py::dict& d) {
  RunConfig c;
  for (const auto& [k, v] : d) {
    const auto key = py::str(k).cast<std::string>();
    std::string value;
    if (py::isinstance<py::bool_>(v))
      value = v.cast<bool>() ? "true" : "false";
    else
      value = py::str(v).cast<std::string>();
    c.set(key, value);
  }
  c.validate();
  return c;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["mae"] = r.mae;
  d["rmse"] = r.rmse;
  d["count"] = r.count;
  for (const auto& [f, m] : r.ranking) {
    d[py::str("recall5_f" + std::to_string(f))] = m.recall;
    d[py::str("ndcg5_f" + std::to_string(f))] = m.ndcg;
  }
  return d;
}

py::list history_list(const std::vector<EpochRecord>& h) {
  py::list out;
  for (const auto& e : h) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["train_loss"] = e.train_loss;
    d["val_mae"] = e.val_mae;
    d["val_rmse"] = e.val_rmse;
    out.append(d);
  }
  return out;
}

struct Dataset {
  RunConfig config;
  std::shared_ptr<PreparedData> data;
};

struct Model {
  RunConfig config;
  std::shared_ptr<PreparedData> data;
  std::shared_ptr<GdsRecModel> model;
  RunResult result;
  std::uint64_t seed = 0;

  py::array_t<double> predict(const std::vector<std::int64_t>& users, const std::vector<std::int64_t>& items) const {
    if (users.size() != items.size()) throw py::value_error("users and items must have the same length");
    const auto& vocab = *data->ratings.vocab;
    std::vector<RatingRecord> pairs;
    pairs.reserve(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) pairs.push_back({vocab.users.find(users[i]), vocab.items.find(items[i]), 0});
    std::vector<double> p;
    {
      py::gil_scoped_release release;
      p = predict_pairs(*model, data->context(), pairs, eval_sample_seed(seed), config.train.workers);
    }
    return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GDSRec social recommendation engine";
  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  (void)config_error;
  (void)data_error;

  m.def("config_keys", &run_config_keys);
  m.def("default_config", [] {
    py::dict d;
    for (const auto& [k, v] : RunConfig{}.to_map()) d[py::str(k)] = v;
    return d;
  });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("n_users", [](const Dataset& d) { return d.data->ratings.n_users(); })
      .def_property_readonly("n_items", [](const Dataset& d) { return d.data->ratings.n_items(); })
      .def_property_readonly("n_ratings", [](const Dataset& d) { return d.data->ratings.size(); })
      .def_property_readonly("split_sizes",
                             [](const Dataset& d) {
                               return py::make_tuple(d.data->split.train.size(), d.data->split.validation.size(),
                                                     d.data->split.test.size());
                             })
      .def_property_readonly("trust_loaded", [](const Dataset& d) { return d.data->trust_loaded; })
      .def_property_readonly("cache_keys", [](const Dataset& d) { return py::module_::import("json").attr("loads")(d.data->keys.dump()); })
      .def("user_average", [](const Dataset& d, std::int64_t raw) {
        return d.data->stats.user(d.data->ratings.vocab->users.find(raw));
      })
      .def("item_average", [](const Dataset& d, std::int64_t raw) {
        return d.data->stats.item(d.data->ratings.vocab->items.find(raw));
      })
      .def("social_neighbors", [](const Dataset& d, std::int64_t raw) {
        const auto& vocab = *d.data->ratings.vocab;
        const auto u = vocab.users.find(raw);
        py::list out;
        if (u < 0 || static_cast<std::size_t>(u) >= d.data->social.neighbors.size()) return out;
        for (const auto& n : d.data->social.neighbors[static_cast<std::size_t>(u)])
          out.append(py::make_tuple(vocab.users.raw(n.id), n.strength, n.lambda));
        return out;
      })
      .def(
          "train",
          [](const Dataset& d, std::optional<std::uint64_t> seed) {
            Model out{d.config, d.data, nullptr, {}, seed.value_or(d.config.seed)};
            std::optional<GdsRecModel> trained;
            {
              py::gil_scoped_release release;
              out.result = run_model(d.config, *d.data, out.seed, &trained);
            }
            out.model = std::make_shared<GdsRecModel>(std::move(*trained));
            return out;
          },
          py::arg("seed") = py::none());

  py::class_<Model>(m, "Model")
      .def_property_readonly("seed", [](const Model& x) { return x.seed; })
      .def_property_readonly("best_epoch", [](const Model& x) { return x.result.best_epoch; })
      .def_property_readonly("diverged", [](const Model& x) { return x.result.diverged; })
      .def_property_readonly("history", [](const Model& x) { return history_list(x.result.history); })
      .def_property_readonly("validation", [](const Model& x) { return report_dict(x.result.validation); })
      .def_property_readonly("test", [](const Model& x) { return report_dict(x.result.test); })
      .def("predict", &Model::predict, py::arg("users"), py::arg("items"));

  m.def(
      "prepare",
      [](const py::dict& cfg, bool use_cache) {
        Dataset d{to_config(cfg), nullptr};
        py::gil_scoped_release release;
        d.data = std::make_shared<PreparedData>(prepare_data(d.config, use_cache ? CacheMode::kBuild : CacheMode::kIgnore));
        return d;
      },
      py::arg("config"), py::arg("use_cache") = false);

  m.def(
      "run_command",
      [](const std::string& command, const py::dict& cfg, const std::string& arg) {
        const auto c = to_config(cfg);
        py::gil_scoped_release release;
        if (command == "prepare") return command_prepare(c);
        if (command == "train") return command_train(c);
        if (command == "eval") return command_eval(c, arg.empty() ? "out/model" : arg);
        if (command == "ablate") return command_ablate(c, parse_variant(arg));
        if (command == "sweep") return command_sweep(c, arg);
        if (command == "baseline") return command_baseline(c, parse_mf_kind(arg));
        throw ConfigError("unknown command '" + command + "'");
      },
      py::arg("command"), py::arg("config"), py::arg("arg") = "");

  m.def(
      "rating_metrics",
      [](const std::vector<double>& pred, const std::vector<double>& truth) {
        if (pred.size() != truth.size() || pred.empty()) throw py::value_error("need equal, non-empty inputs");
        const auto r = evaluate_rating(pred, truth);
        return py::make_tuple(r.mae, r.rmse);
      },
      py::arg("predictions"), py::arg("truth"));
  m.def(
      "ranking_metrics",
      [](const std::vector<std::int32_t>& users, const std::vector<std::int32_t>& items, const std::vector<double>& truth,
         const std::vector<double>& scores, double threshold, int k) {
        const auto n = users.size();
        if (items.size() != n || truth.size() != n || scores.size() != n)
          throw py::value_error("users, items, truth and scores must have the same length");
        std::vector<ScoredEntry> e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = {users[i], items[i], truth[i], scores[i]};
        const auto r = evaluate_ranking(e, threshold, k);
        return py::make_tuple(r.recall, r.ndcg);
      },
      py::arg("users"), py::arg("items"), py::arg("truth"), py::arg("scores"), py::arg("threshold"), py::arg("k") = 5);
  m.def("difference_level", &difference_level, py::arg("rating"), py::arg("average"));

  m.def(
      "synthetic",
      [](int n_users, int n_items, int ratings_per_user, int trust_per_user, std::uint64_t seed) {
        SyntheticConfig sc;
        sc.n_users = n_users;
        sc.n_items = n_items;
        sc.ratings_per_user = ratings_per_user;
        sc.trust_per_user = trust_per_user;
        sc.seed = seed;
        const auto d = generate_synthetic(sc);
        const auto& v = *d.ratings.vocab;
        std::vector<std::tuple<std::int64_t, std::int64_t, int>> ratings;
        for (const auto& r : d.ratings.records) ratings.emplace_back(v.users.raw(r.user), v.items.raw(r.item), r.rating);
        std::vector<std::pair<std::int64_t, std::int64_t>> trust;
        for (const auto& e : d.trust.edges) trust.emplace_back(v.users.raw(e.trustor), v.users.raw(e.trustee));
        return py::make_tuple(ratings, trust);
      },
      py::arg("n_users") = 200, py::arg("n_items") = 200, py::arg("ratings_per_user") = 25,
      py::arg("trust_per_user") = 5, py::arg("seed") = 0);

#ifdef VERSION_INFO
#define GDSREC_STR(x) #x
#define GDSREC_XSTR(x) GDSREC_STR(x)
  m.attr("__version__") = GDSREC_XSTR(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
