#include "rfm/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "rfm/corpus.hpp"
#include "rfm/error.hpp"
#include "rfm/population.hpp"
#include "rfm/random.hpp"

namespace rfm {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
void write_text(const std::filesystem::path& path, const T& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text << '\n';
}

std::vector<AdaptedHead> adapt_users(const RfmModel& model, std::span<const NamedUser> users,
                                     const std::vector<std::vector<LabelledPair>>& data, const AdaptConfig& config) {
  std::vector<AdaptedHead> heads;
  for (std::size_t u = 0; u < users.size(); ++u) {
    auto h = adapt(build_adaptation_set(model, data[u]), config);
    h.user_id = users[u].id;
    heads.push_back(std::move(h));
  }
  return heads;
}

std::string row(const std::string& name, const AccuracyReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(22) << name << std::right << std::fixed << std::setprecision(4) << std::setw(8)
     << r.mean << "   [" << r.ci.lo << ", " << r.ci.hi << "]";
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (corpus_path.empty() && corpus_size < 10) throw ConfigError("corpus_size", "must be at least 10");
  if (!corpus_path.empty() && !std::filesystem::exists(corpus_path)) {
    throw ConfigError("corpus_path", "file not found: " + corpus_path.string());
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction", "must lie in (0, 1)");
  if (raters < 1) throw ConfigError("raters", "must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p", "must lie in [0, 1]");
  if (heldout_p && !(*heldout_p >= 0.0 && *heldout_p <= 1.0)) throw ConfigError("heldout_p", "must lie in [0, 1]");
  if (heldout_users < 1) throw ConfigError("heldout_users", "must be at least 1");
  if (visits < 1) throw ConfigError("visits", "must be at least 1");
  if (adaptation_examples < 1) throw ConfigError("adaptation_examples", "must be at least 1");
  if (eval.passes < 1) throw ConfigError("eval.passes", "must be at least 1");
  if (!(eval.level > 0.0 && eval.level < 1.0)) throw ConfigError("eval.level", "must lie in (0, 1)");
  if (!run_rfm && !run_baselines) throw ConfigError("run_rfm", "at least one of run_rfm and run_baselines must be set");
  if (best_of_n_sets > 0) {
    if (n_grid.empty()) throw ConfigError("best_of_n.n_grid", "must not be empty");
    for (auto n : n_grid) {
      if (n < 1) throw ConfigError("best_of_n.n_grid", "entries must be positive");
    }
    if (!run_rfm || !run_baselines) throw ConfigError("best_of_n.sets", "best-of-n needs both models");
  }
  if (!(candidate_spread > 0.0)) throw ConfigError("best_of_n.spread", "must be positive");
  encoder.validate();
  train.validate();
  adapt.validate();
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"corpus_path", [&](auto&, auto& v) { c.corpus_path = v; }},
      {"corpus_size", [&](auto& k, auto& v) { c.corpus_size = parse_uint(k, v); }},
      {"test_fraction", [&](auto& k, auto& v) { c.test_fraction = parse_double(k, v); }},
      {"raters", [&](auto& k, auto& v) { c.raters = parse_uint(k, v); }},
      {"p", [&](auto& k, auto& v) { c.p = parse_double(k, v); }},
      {"heldout_users", [&](auto& k, auto& v) { c.heldout_users = parse_uint(k, v); }},
      {"heldout_p", [&](auto& k, auto& v) {
         if (v == "none") c.heldout_p.reset(); else c.heldout_p = parse_double(k, v);
       }},
      {"visits", [&](auto& k, auto& v) { c.visits = parse_uint(k, v); }},
      {"encoder.mode", [&](auto&, auto& v) { c.encoder.mode = parse_encoder_mode(v); }},
      {"encoder.hash_dim", [&](auto& k, auto& v) { c.encoder.hash_dim = parse_uint(k, v); }},
      {"encoder.hidden_layers", [&](auto& k, auto& v) { c.encoder.hidden_layers = parse_list(k, v); }},
      {"encoder.feature_dim", [&](auto& k, auto& v) { c.encoder.feature_dim = parse_uint(k, v); }},
      {"train.learning_rate", [&](auto& k, auto& v) { c.train.learning_rate = parse_double(k, v); }},
      {"train.momentum", [&](auto& k, auto& v) { c.train.momentum = parse_double(k, v); }},
      {"train.batch_size", [&](auto& k, auto& v) { c.train.batch_size = parse_uint(k, v); }},
      {"train.total_updates", [&](auto& k, auto& v) { c.train.total_updates = parse_uint(k, v); }},
      {"train.validation_fraction", [&](auto& k, auto& v) { c.train.validation_fraction = parse_double(k, v); }},
      {"train.eval_interval", [&](auto& k, auto& v) { c.train.eval_interval = parse_uint(k, v); }},
      {"train.head_l2", [&](auto& k, auto& v) { c.train.head_l2 = parse_double(k, v); }},
      {"train.loss_floor", [&](auto& k, auto& v) { c.train.loss_floor = parse_double(k, v); }},
      {"adapt.l2_penalty", [&](auto& k, auto& v) { c.adapt.l2_penalty = parse_double(k, v); }},
      {"adapt.max_iterations", [&](auto& k, auto& v) { c.adapt.max_iterations = parse_uint(k, v); }},
      {"adapt.gradient_tolerance", [&](auto& k, auto& v) { c.adapt.gradient_tolerance = parse_double(k, v); }},
      {"adapt.learning_rate", [&](auto& k, auto& v) { c.adapt.learning_rate = parse_double(k, v); }},
      {"adaptation_examples", [&](auto& k, auto& v) { c.adaptation_examples = parse_uint(k, v); }},
      {"eval.passes", [&](auto& k, auto& v) { c.eval.passes = parse_uint(k, v); }},
      {"eval.level", [&](auto& k, auto& v) { c.eval.level = parse_double(k, v); }},
      {"run_rfm", [&](auto& k, auto& v) { c.run_rfm = parse_bool(k, v); }},
      {"run_baselines", [&](auto& k, auto& v) { c.run_baselines = parse_bool(k, v); }},
      {"best_of_n.sets", [&](auto& k, auto& v) { c.best_of_n_sets = parse_uint(k, v); }},
      {"best_of_n.n_grid", [&](auto& k, auto& v) { c.n_grid = parse_list(k, v); }},
      {"best_of_n.spread", [&](auto& k, auto& v) { c.candidate_spread = parse_double(k, v); }},
      {"output_dir", [&](auto&, auto& v) { c.output_dir = v; }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_uint(k, v); }},
  };
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n), "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown configuration key (line " + std::to_string(n) + ")");
    it->second(key, value);
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string format_experiment_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "corpus_path = " << c.corpus_path.string() << "\n"
     << "corpus_size = " << c.corpus_size << "\n"
     << "test_fraction = " << number(c.test_fraction) << "\n"
     << "raters = " << c.raters << "\n"
     << "p = " << number(c.p) << "\n"
     << "heldout_users = " << c.heldout_users << "\n"
     << "heldout_p = " << (c.heldout_p ? number(*c.heldout_p) : "none") << "\n"
     << "visits = " << c.visits << "\n"
     << "encoder.mode = " << to_string(c.encoder.mode) << "\n"
     << "encoder.hash_dim = " << c.encoder.hash_dim << "\n"
     << "encoder.hidden_layers = " << join(c.encoder.hidden_layers) << "\n"
     << "encoder.feature_dim = " << c.encoder.feature_dim << "\n"
     << "train.learning_rate = " << number(c.train.learning_rate) << "\n"
     << "train.momentum = " << number(c.train.momentum) << "\n"
     << "train.batch_size = " << c.train.batch_size << "\n"
     << "train.total_updates = " << c.train.total_updates << "\n"
     << "train.validation_fraction = " << number(c.train.validation_fraction) << "\n"
     << "train.eval_interval = " << c.train.eval_interval << "\n"
     << "train.head_l2 = " << number(c.train.head_l2) << "\n"
     << "train.loss_floor = " << number(c.train.loss_floor) << "\n"
     << "adapt.l2_penalty = " << number(c.adapt.l2_penalty) << "\n"
     << "adapt.max_iterations = " << c.adapt.max_iterations << "\n"
     << "adapt.gradient_tolerance = " << number(c.adapt.gradient_tolerance) << "\n"
     << "adapt.learning_rate = " << number(c.adapt.learning_rate) << "\n"
     << "adaptation_examples = " << c.adaptation_examples << "\n"
     << "eval.passes = " << c.eval.passes << "\n"
     << "eval.level = " << number(c.eval.level) << "\n"
     << "run_rfm = " << (c.run_rfm ? "true" : "false") << "\n"
     << "run_baselines = " << (c.run_baselines ? "true" : "false") << "\n"
     << "best_of_n.sets = " << c.best_of_n_sets << "\n"
     << "best_of_n.n_grid = " << join(c.n_grid) << "\n"
     << "best_of_n.spread = " << number(c.candidate_spread) << "\n"
     << "output_dir = " << c.output_dir.string() << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto lexicon = Lexicon::bundled();
  const auto extractor = std::make_shared<const FeatureExtractor>(lexicon);
  const std::uint64_t seed = config.seed;

  const auto pairs = config.corpus_path.empty()
                         ? generate_pairs(*lexicon, config.corpus_size, {derive_seed(seed, "corpus"), 1.0})
                         : load_preference_pairs(config.corpus_path);
  const auto split = split_dataset<PreferencePair>(pairs, config.test_fraction, derive_seed(seed, "test-split"));
  const auto& train_pairs = split.train;
  const auto& test_pairs = split.validation;
  if (train_pairs.size() < config.adaptation_examples) {
    throw ConfigError("adaptation_examples", "exceeds the number of training pairs");
  }

  const auto normalizer = fit_normalizer(train_pairs, *extractor);
  const auto train_features = compute_pair_features(train_pairs, *extractor, normalizer);
  const auto test_features = compute_pair_features(test_pairs, *extractor, normalizer);

  const auto raters = name_users(sample_users({config.p, derive_seed(seed, "raters"), config.raters}), "r");
  const auto heldout = name_users(
      sample_users({config.heldout_p.value_or(config.p), derive_seed(seed, "heldout"), config.heldout_users}), "u");
  Rng label_rng(derive_seed(seed, "labels"));
  const auto records = label_with_raters(train_pairs, train_features, raters, config.visits, label_rng);

  // n-hat adaptation pairs per held-out user, drawn without replacement from the training pairs.
  std::vector<std::vector<LabelledPair>> adapt_data(heldout.size());
  for (std::size_t u = 0; u < heldout.size(); ++u) {
    std::vector<std::size_t> idx(train_pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(derive_seed(seed, "adaptation-pairs"), u));
    rng.shuffle(idx);
    for (std::size_t k = 0; k < config.adaptation_examples; ++k) {
      const std::size_t i = idx[k];
      adapt_data[u].push_back(
          {train_pairs[i], label_preference(train_features[i].a, train_features[i].b, heldout[u].user)});
    }
  }

  FeatureContext fc{extractor, normalizer};
  EncoderConfig enc = config.encoder;
  enc.seed = derive_seed(seed, "encoder");
  TrainConfig tc = config.train;
  tc.seed = derive_seed(seed, "train");
  EvalOptions eo = config.eval;
  eo.seed = derive_seed(seed, "eval");

  ExperimentResult result;
  if (raters.size() >= 2) {
    std::vector<UserVector> omegas;
    for (const auto& r : raters) omegas.push_back(r.user);
    result.disagreement = pairwise_disagreement(omegas, test_features);
  }

  const bool out = !config.output_dir.empty();
  if (out) {
    std::filesystem::create_directories(config.output_dir);
    write_text(config.output_dir / "config.txt", format_experiment_config(config));
    save_normalizer(config.output_dir / "normalizer.json", normalizer);
    save_preference_pairs(config.output_dir / "train_pairs.jsonl", train_pairs);
    save_preference_pairs(config.output_dir / "test_pairs.jsonl", test_pairs);
    save_users(config.output_dir / "raters.jsonl", raters);
    save_users(config.output_dir / "heldout_users.jsonl", heldout);
    save_preference_records(config.output_dir / "train_records.jsonl", records);
  }

  std::optional<TrainResult> rfm_model, base_model;
  std::vector<AdaptedHead> rfm_heads;
  if (config.run_rfm) {
    tc.baseline_mode = false;
    rfm_model.emplace(train(records, tc, enc, fc));
    rfm_heads = adapt_users(rfm_model->model, heldout, adapt_data, config.adapt);
    result.rfm = inter_user_accuracy(rfm_model->model, rfm_heads, heldout, test_pairs, test_features, eo);
    result.intra = intra_user_accuracy(rfm_model->model, raters, test_pairs, test_features, eo);
    result.rfm_training = rfm_model->report;
    if (out) {
      save_model(config.output_dir / "model_rfm.json", rfm_model->model);
      save_heads(config.output_dir / "heads_rfm.jsonl", rfm_heads);
      save_training_report(config.output_dir / "training_rfm.json", rfm_model->report);
      write_text(config.output_dir / "eval_rfm.json", accuracy_report_to_json(*result.rfm));
      write_text(config.output_dir / "eval_intra.json", accuracy_report_to_json(*result.intra));
    }
  }
  if (config.run_baselines) {
    tc.baseline_mode = true;
    base_model.emplace(train(records, tc, enc, fc));
    result.baseline = intra_user_accuracy(base_model->model, heldout, test_pairs, test_features, eo);
    const auto linear_heads = adapt_users(base_model->model, heldout, adapt_data, config.adapt);
    result.linear = inter_user_accuracy(base_model->model, linear_heads, heldout, test_pairs, test_features, eo);
    result.baseline_training = base_model->report;
    if (out) {
      save_model(config.output_dir / "model_baseline.json", base_model->model);
      save_heads(config.output_dir / "heads_linear.jsonl", linear_heads);
      save_training_report(config.output_dir / "training_baseline.json", base_model->report);
      write_text(config.output_dir / "eval_baseline.json", accuracy_report_to_json(*result.baseline));
      write_text(config.output_dir / "eval_linear.json", accuracy_report_to_json(*result.linear));
    }
  }

  if (config.best_of_n_sets > 0) {
    std::size_t per_set = 0;
    for (auto n : config.n_grid) per_set = std::max(per_set, n);
    const auto sets = generate_candidate_sets(*lexicon, config.best_of_n_sets, per_set,
                                              {derive_seed(seed, "candidates"), config.candidate_spread});
    std::vector<std::vector<BaseFeatureVector>> truth(sets.size());
    std::vector<std::vector<Eigen::VectorXd>> phi_rfm(sets.size()), phi_base(sets.size());
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      sizes.push_back(sets[s].candidates.size());
      for (const auto& y : sets[s].candidates) {
        truth[s].push_back(normalizer.apply(extractor->extract_raw_features(sets[s].context, y)));
        phi_rfm[s].push_back(encode(rfm_model->model, sets[s].context, y));
        phi_base[s].push_back(encode(base_model->model, sets[s].context, y));
      }
    }
    const Eigen::VectorXd shared = base_model->model.heads().row(0).transpose();
    CandidateScorer a = [&](std::size_t u, std::size_t s, std::size_t c) { return phi_rfm[s][c].dot(rfm_heads[u].w); };
    CandidateScorer b = [&](std::size_t, std::size_t s, std::size_t c) { return phi_base[s][c].dot(shared); };
    CandidateScorer t = [&](std::size_t u, std::size_t s, std::size_t c) { return utility(truth[s][c], heldout[u].user); };
    result.best_of_n = best_of_n_compare(a, b, t, sizes, heldout.size(), config.n_grid, derive_seed(seed, "best-of-n"));
    if (out) {
      save_candidate_sets(config.output_dir / "candidates.jsonl", sets);
      write_text(config.output_dir / "best_of_n.json", best_of_n_report_to_json(*result.best_of_n));
    }
  }
  if (out) write_text(config.output_dir / "summary.txt", format_summary(result));
  return result;
}

std::string format_summary(const ExperimentResult& r) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "model" << std::right << std::setw(8) << "acc" << "   interval\n";
  if (r.rfm) os << row("rfm (adapted)", *r.rfm) << "\n";
  if (r.linear) os << row("linear baseline", *r.linear) << "\n";
  if (r.baseline) os << row("baseline", *r.baseline) << "\n";
  if (r.intra) os << row("rfm intra-user", *r.intra) << "\n";
  os << std::fixed << std::setprecision(4) << "rater disagreement    " << r.disagreement << "\n";
  if (r.best_of_n) {
    os << "\nbest-of-n (a = adapted rfm, b = baseline)\n"
       << std::setw(6) << "n" << std::setw(8) << "wins_a" << std::setw(8) << "wins_b" << std::setw(8) << "draws"
       << std::setw(10) << "relative\n";
    for (const auto& p : r.best_of_n->points) {
      os << std::setw(6) << p.n << std::setw(8) << p.wins_a << std::setw(8) << p.wins_b << std::setw(8) << p.draws
         << std::setw(10) << p.relative() << "\n";
    }
  }
  return os.str();
}

}  // namespace rfm
