#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rfm/adaptation.hpp"
#include "rfm/bounds.hpp"
#include "rfm/corpus.hpp"
#include "rfm/error.hpp"
#include "rfm/experiment.hpp"
#include "rfm/model.hpp"
#include "rfm/population.hpp"
#include "rfm/stats.hpp"
#include "rfm/train.hpp"

namespace py = pybind11;
using namespace rfm;

namespace {

std::vector<double> to_list(const BaseFeatureVector& v) { return {v.begin(), v.end()}; }

BaseFeatureVector to_features(const std::vector<double>& v) {
  if (v.size() != kNumBaseFeatures) throw DataError("expected 13 base features");
  BaseFeatureVector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

UserVector to_user(const std::vector<int>& omega) {
  if (omega.size() != kNumBaseFeatures) throw DataError("omega needs 13 entries");
  UserVector u;
  for (std::size_t k = 0; k < kNumBaseFeatures; ++k) {
    if (omega[k] != 1 && omega[k] != -1) throw DataError("omega entries must be +1 or -1");
    u.omega[k] = omega[k];
  }
  return u;
}

BoundInput bound_input(std::size_t m, std::size_t n, double delta, double within, double between) {
  BoundInput b;
  b.m = m;
  b.n = n;
  b.delta = delta;
  b.within_var = within;
  b.between_var = between;
  return b;
}

py::dict report_dict(const AccuracyReport& r) {
  py::dict d;
  d["mean"] = r.mean;
  d["ci"] = py::make_tuple(r.ci.lo, r.ci.hi);
  d["per_pass"] = r.per_pass;
  d["scored"] = r.scored;
  d["skipped_ties"] = r.skipped_ties;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reward-feature models: simulation, training, adaptation, bounds";

  auto base = py::register_exception<Error>(m, "RfmError", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.attr("NUM_BASE_FEATURES") = kNumBaseFeatures;

  py::class_<PreferencePair>(m, "PreferencePair")
      .def(py::init([](std::string c, std::string a, std::string b) { return PreferencePair{c, a, b}; }),
           py::arg("context"), py::arg("response_a"), py::arg("response_b"))
      .def_readwrite("context", &PreferencePair::context)
      .def_readwrite("response_a", &PreferencePair::response_a)
      .def_readwrite("response_b", &PreferencePair::response_b)
      .def("__eq__", [](const PreferencePair& a, const PreferencePair& b) { return a == b; })
      .def("__repr__", [](const PreferencePair& p) { return "PreferencePair(context=" + py::repr(py::str(p.context)).cast<std::string>() + ", ...)"; });

  py::class_<PreferenceRecord>(m, "PreferenceRecord")
      .def(py::init([](std::string r, PreferencePair p, int z) { return PreferenceRecord{r, p, z}; }),
           py::arg("rater_id"), py::arg("pair"), py::arg("label"))
      .def_readwrite("rater_id", &PreferenceRecord::rater_id)
      .def_readwrite("pair", &PreferenceRecord::pair)
      .def_readwrite("label", &PreferenceRecord::label);

  m.def("generate_pairs",
        [](std::size_t count, std::uint64_t seed, double spread) {
          return generate_pairs(*Lexicon::bundled(), count, {seed, spread});
        },
        py::arg("count"), py::arg("seed") = 0, py::arg("spread") = 1.0);
  m.def("load_preference_pairs", &load_preference_pairs, py::arg("path"));
  m.def("save_preference_pairs",
        [](const std::filesystem::path& p, const std::vector<PreferencePair>& v) { save_preference_pairs(p, v); },
        py::arg("path"), py::arg("pairs"));
  m.def("load_preference_records", &load_preference_records, py::arg("path"));

  py::class_<FeatureNormalizer>(m, "FeatureNormalizer")
      .def("apply", [](const FeatureNormalizer& n, const std::vector<double>& raw) { return to_list(n.apply(to_features(raw))); })
      .def("fingerprint", &FeatureNormalizer::fingerprint)
      .def("to_json", [](const FeatureNormalizer& n) { return normalizer_to_json(n); })
      .def_static("from_json", [](const std::string& s) { return normalizer_from_json(s); })
      .def_readonly("fitted_on", &FeatureNormalizer::fitted_on);

  py::class_<FeatureExtractor, std::shared_ptr<FeatureExtractor>>(m, "FeatureExtractor")
      .def(py::init<>())
      .def("raw_features",
           [](const FeatureExtractor& f, const std::string& c, const std::string& r) {
             return to_list(f.extract_raw_features(c, r));
           },
           py::arg("context"), py::arg("response"))
      .def("fit_normalizer",
           [](const FeatureExtractor& f, const std::vector<PreferencePair>& pairs) { return fit_normalizer(pairs, f); },
           py::arg("pairs"));

  m.def("sample_users",
        [](std::size_t count, double p, std::uint64_t seed) {
          std::vector<std::vector<int>> out;
          for (const auto& u : sample_users({p, seed, count})) out.emplace_back(u.omega.begin(), u.omega.end());
          return out;
        },
        py::arg("count"), py::arg("p") = 0.5, py::arg("seed") = 0);
  m.def("utility",
        [](const std::vector<double>& features, const std::vector<int>& omega) {
          return utility(to_features(features), to_user(omega));
        },
        py::arg("features"), py::arg("omega"));
  m.def("label_preference",
        [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<int>& omega) {
          return label_preference(to_features(a), to_features(b), to_user(omega));
        },
        py::arg("features_a"), py::arg("features_b"), py::arg("omega"));
  m.def("oracle_policy_gain",
        [](const std::vector<double>& z, const std::vector<double>& w) {
          const auto g = oracle_policy_gain(z, w);
          return py::make_tuple(g.agnostic_reward, g.aware_reward);
        },
        py::arg("zbar"), py::arg("weights"));

  m.def("capped_log", &capped_log, py::arg("u"), py::arg("floor") = kDefaultLossFloor);
  m.def("sigmoid", &sigmoid, py::arg("s"));

  m.def("epsilon_single",
        [](std::size_t mm, std::size_t n, double delta, double within, double between) {
          return epsilon_single(bound_input(mm, n, delta, within, between));
        },
        py::arg("m"), py::arg("n"), py::arg("delta"), py::arg("within"), py::arg("between"));
  m.def("epsilon_limit_n",
        [](std::size_t mm, double delta, double between) {
          return epsilon_limit_n(bound_input(mm, 1, delta, 0.0, between));
        },
        py::arg("m"), py::arg("delta"), py::arg("between"));
  m.def("rademacher_excess_bound",
        [](std::size_t mm, std::size_t n, double delta, double within, double between, double weight_norm) {
          auto b = bound_input(mm, n, delta, within, between);
          b.weight_norm = weight_norm;
          return rademacher_excess_bound(b);
        },
        py::arg("m"), py::arg("n"), py::arg("delta"), py::arg("within"), py::arg("between"), py::arg("weight_norm"));
  m.def("covering_number_bound", &covering_number_bound, py::arg("alpha"), py::arg("h_size"), py::arg("k_size"));
  m.def("exact_moments",
        [](const std::filesystem::path& toy) {
          const auto e = exact_moments(load_toy_distribution(toy));
          return py::dict(py::arg("mean") = e.mean, py::arg("within") = e.within, py::arg("between") = e.between);
        },
        py::arg("toy_path"));
  m.def("exact_mean_loss_variance",
        [](const std::filesystem::path& toy, std::size_t n) { return exact_mean_loss_variance(load_toy_distribution(toy), n); },
        py::arg("toy_path"), py::arg("n"));
  m.def("monte_carlo_coverage",
        [](const std::filesystem::path& toy, std::size_t mm, std::size_t n, double delta, std::size_t trials,
           std::uint64_t seed) { return monte_carlo_coverage(load_toy_distribution(toy), mm, n, delta, trials, seed); },
        py::arg("toy_path"), py::arg("m"), py::arg("n"), py::arg("delta"), py::arg("trials") = 2000,
        py::arg("seed") = 0);
  m.def("confidence_interval",
        [](const std::vector<double>& s, double level) {
          const auto i = confidence_interval(s, level);
          return py::make_tuple(i.lo, i.hi);
        },
        py::arg("samples"), py::arg("level") = 0.99);

  m.def("adapt",
        [](const Eigen::MatrixXd& deltas, const std::vector<int>& labels, double l2, std::size_t max_iterations) {
          if (static_cast<std::size_t>(deltas.rows()) != labels.size()) throw DataError("one label per delta row");
          std::vector<AdaptationSample> samples;
          for (Eigen::Index i = 0; i < deltas.rows(); ++i) samples.push_back({deltas.row(i).transpose(), labels[i]});
          AdaptConfig cfg;
          cfg.l2_penalty = l2;
          cfg.max_iterations = max_iterations;
          const auto h = adapt(samples, cfg);
          return py::dict(py::arg("w") = h.w, py::arg("final_loss") = h.final_loss,
                          py::arg("iterations") = h.iterations, py::arg("converged") = h.converged);
        },
        py::arg("deltas"), py::arg("labels"), py::arg("l2") = 1e-4, py::arg("max_iterations") = 5000);

  py::class_<RfmModel>(m, "RfmModel")
      .def_property_readonly("feature_dim", &RfmModel::feature_dim)
      .def_property_readonly("raters", &RfmModel::raters)
      .def_property_readonly("shared_head", &RfmModel::shared_head)
      .def_property_readonly("heads", [](const RfmModel& r) { return r.heads(); })
      .def("encode", [](const RfmModel& r, const std::string& c, const std::string& y) { return encode(r, c, y); },
           py::arg("context"), py::arg("response"))
      .def("probability",
           [](const RfmModel& r, const std::string& rater, const PreferencePair& p) {
             return pairwise_probability(r, rater, p);
           },
           py::arg("rater"), py::arg("pair"));
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));
  m.def("train",
        [](const std::vector<PreferenceRecord>& records, const std::string& mode, std::vector<std::size_t> hidden,
           std::size_t feature_dim, double lr, std::size_t updates, bool baseline, std::uint64_t seed) {
          EncoderConfig enc;
          enc.mode = parse_encoder_mode(mode);
          enc.hidden_layers = std::move(hidden);
          enc.feature_dim = feature_dim;
          enc.seed = derive_seed(seed, "encoder");
          TrainConfig tc;
          tc.learning_rate = lr;
          tc.total_updates = updates;
          tc.baseline_mode = baseline;
          tc.seed = seed;
          FeatureContext fc{std::make_shared<const FeatureExtractor>(), std::nullopt};
          if (enc.mode == EncoderMode::OracleBaseFeatures) {
            std::vector<PreferencePair> pairs;
            for (const auto& r : records) pairs.push_back(r.pair);
            fc.normalizer = fit_normalizer(pairs, *fc.extractor);
          }
          auto result = train(records, tc, enc, fc);
          return py::make_tuple(std::move(result.model), result.report.selected().validation_accuracy);
        },
        py::arg("records"), py::arg("mode") = "hashed", py::arg("hidden") = std::vector<std::size_t>{64},
        py::arg("feature_dim") = 16, py::arg("learning_rate") = 0.5, py::arg("updates") = 2000,
        py::arg("baseline") = false, py::arg("seed") = 0);

  m.def("run_experiment",
        [](const std::string& config_text, std::optional<std::filesystem::path> output_dir) {
          auto cfg = parse_experiment_config(config_text);
          if (output_dir) cfg.output_dir = *output_dir;
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_experiment(cfg);
          }
          py::dict d;
          if (r.rfm) d["rfm"] = report_dict(*r.rfm);
          if (r.baseline) d["baseline"] = report_dict(*r.baseline);
          if (r.linear) d["linear"] = report_dict(*r.linear);
          if (r.intra) d["intra"] = report_dict(*r.intra);
          d["disagreement"] = r.disagreement;
          d["summary"] = format_summary(r);
          return d;
        },
        py::arg("config"), py::arg("output_dir") = py::none());
}
