#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "rfm/adaptation.hpp"
#include "rfm/bounds.hpp"
#include "rfm/corpus.hpp"
#include "rfm/error.hpp"
#include "rfm/eval.hpp"
#include "rfm/experiment.hpp"
#include "rfm/population.hpp"
#include "rfm/random.hpp"
#include "rfm/service.hpp"
#include "rfm/train.hpp"

namespace {

struct EncoderFlags {
  std::string mode = "hashed";
  std::size_t hash_dim = 2048;
  std::string hidden = "64";
  std::size_t feature_dim = 16;

  void add(CLI::App* app) {
    app->add_option("--encoder", mode, "oracle or hashed")->capture_default_str();
    app->add_option("--hash-dim", hash_dim)->capture_default_str();
    app->add_option("--hidden", hidden, "comma-separated hidden widths, or none")->capture_default_str();
    app->add_option("--feature-dim,-d", feature_dim)->capture_default_str();
  }
  rfm::EncoderConfig config(std::uint64_t seed) const {
    rfm::EncoderConfig c;
    c.mode = rfm::parse_encoder_mode(mode);
    c.hash_dim = hash_dim;
    c.hidden_layers.clear();
    if (hidden != "none" && !hidden.empty()) {
      std::stringstream ss(hidden);
      for (std::string w; std::getline(ss, w, ',');) {
        try {
          std::size_t used = 0;
          const auto v = std::stoull(w, &used);
          if (used != w.size()) throw std::invalid_argument(w);
          c.hidden_layers.push_back(v);
        } catch (const std::logic_error&) {
          throw rfm::ConfigError("--hidden", "expected comma-separated widths or none, got '" + hidden + "'");
        }
      }
    }
    c.feature_dim = feature_dim;
    c.seed = seed;
    return c;
  }
};

std::shared_ptr<const rfm::FeatureExtractor> extractor() {
  static auto e = std::make_shared<const rfm::FeatureExtractor>();
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-feature models: simulate, train, adapt, evaluate and serve"};
  app.require_subcommand(1);

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Generate a synthetic pair corpus or candidate sets");
  std::size_t corpus_count = 2000, per_set = 0;
  std::uint64_t corpus_seed = 0;
  double spread = 1.0;
  std::string corpus_out;
  corpus->add_option("--count", corpus_count, "pairs, or candidate sets with --per-set")->capture_default_str();
  corpus->add_option("--per-set", per_set, "candidates per set (writes candidate sets)");
  corpus->add_option("--spread", spread, "style spread")->capture_default_str();
  corpus->add_option("--seed", corpus_seed)->capture_default_str();
  corpus->add_option("--out,-o", corpus_out)->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Sample synthetic raters and label a pair corpus");
  simulate->alias("population");
  std::string sim_pairs, sim_out, sim_users, sim_norm;
  std::size_t sim_m = 40, sim_visits = 3;
  double sim_p = 0.5;
  std::uint64_t sim_seed = 0;
  std::string sim_prefix = "r";
  simulate->add_option("--pairs", sim_pairs)->required()->check(CLI::ExistingFile);
  simulate->add_option("--raters,-m", sim_m)->capture_default_str();
  simulate->add_option("--p", sim_p)->capture_default_str();
  simulate->add_option("--visits", sim_visits, "labels per pair (0 = every rater labels every pair)")
      ->capture_default_str();
  simulate->add_option("--prefix", sim_prefix)->capture_default_str();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  simulate->add_option("--out,-o", sim_out, "labelled records")->required();
  simulate->add_option("--users-out", sim_users);
  simulate->add_option("--normalizer", sim_norm, "normalizer file (fitted on --pairs and written here if absent)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a reward-feature model (or the baseline)");
  std::string tr_records, tr_out, tr_report, tr_norm;
  EncoderFlags tr_enc;
  rfm::TrainConfig tr_cfg;
  tr_enc.add(train_cmd);
  train_cmd->add_option("--records", tr_records)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--normalizer", tr_norm)->check(CLI::ExistingFile);
  train_cmd->add_option("--lr", tr_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", tr_cfg.momentum)->capture_default_str();
  train_cmd->add_option("--batch", tr_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--updates", tr_cfg.total_updates)->capture_default_str();
  train_cmd->add_option("--validation-fraction", tr_cfg.validation_fraction)->capture_default_str();
  train_cmd->add_option("--eval-interval", tr_cfg.eval_interval)->capture_default_str();
  train_cmd->add_option("--head-l2", tr_cfg.head_l2)->capture_default_str();
  train_cmd->add_option("--seed", tr_cfg.seed)->capture_default_str();
  train_cmd->add_flag("--baseline", tr_cfg.baseline_mode, "single shared head");
  train_cmd->add_option("--out,-o", tr_out)->required();
  train_cmd->add_option("--report", tr_report);

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "Fit one head per user on frozen model features");
  std::string ad_model, ad_records, ad_out, ad_norm;
  rfm::AdaptConfig ad_cfg;
  adapt_cmd->add_option("--model", ad_model)->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--records", ad_records, "labelled records; rater_id names the user")
      ->required()
      ->check(CLI::ExistingFile);
  adapt_cmd->add_option("--normalizer", ad_norm)->check(CLI::ExistingFile);
  adapt_cmd->add_option("--l2", ad_cfg.l2_penalty)->capture_default_str();
  adapt_cmd->add_option("--max-iterations", ad_cfg.max_iterations)->capture_default_str();
  adapt_cmd->add_option("--out,-o", ad_out)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Inter-user accuracy of adapted heads (or the model's own heads)");
  std::string ev_model, ev_heads, ev_users, ev_pairs, ev_norm, ev_out;
  rfm::EvalOptions ev_opts;
  eval_cmd->add_option("--model", ev_model)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--heads", ev_heads, "adapted heads; omit to use the model's heads");
  eval_cmd->add_option("--users", ev_users)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pairs", ev_pairs)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--normalizer", ev_norm, "ground-truth feature normalizer")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--passes", ev_opts.passes)->capture_default_str();
  eval_cmd->add_option("--level", ev_opts.level)->capture_default_str();
  eval_cmd->add_option("--seed", ev_opts.seed)->capture_default_str();
  eval_cmd->add_option("--out,-o", ev_out, "report file");

  // bound
  auto* bound = app.add_subcommand("bound", "Tabulate the generalisation bounds");
  std::vector<std::size_t> b_m{10, 100, 1000, 10000}, b_n{1, 10, 100};
  double b_delta = 0.05, b_within = 0.04, b_between = 0.01;
  std::string b_toy;
  std::size_t b_trials = 2000;
  std::uint64_t b_seed = 0;
  bound->add_option("--m", b_m)->delimiter(',')->capture_default_str();
  bound->add_option("--n", b_n)->delimiter(',')->capture_default_str();
  bound->add_option("--delta", b_delta)->capture_default_str();
  bound->add_option("--within", b_within)->capture_default_str();
  bound->add_option("--between", b_between)->capture_default_str();
  bound->add_option("--toy", b_toy, "toy distribution: use its exact variances and report coverage")
      ->check(CLI::ExistingFile);
  bound->add_option("--trials", b_trials)->capture_default_str();
  bound->add_option("--seed", b_seed)->capture_default_str();

  // best-of-n
  auto* bon = app.add_subcommand("best-of-n", "Adapted RFM vs baseline best-of-n comparison");
  std::string bon_config;
  std::size_t bon_sets = 200;
  bon->add_option("--config", bon_config)->required()->check(CLI::ExistingFile);
  bon->add_option("--sets", bon_sets)->capture_default_str();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Host interactive adaptation sessions over HTTP");
  std::string sv_model, sv_pool, sv_norm, sv_host = "127.0.0.1";
  int sv_port = 8080;
  std::uint64_t sv_seed = 0;
  serve_cmd->add_option("--model", sv_model)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--pool", sv_pool, "pairs offered to users")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--normalizer", sv_norm, "verify the model against this normalizer")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", sv_host)->capture_default_str();
  serve_cmd->add_option("--port", sv_port)->capture_default_str();
  serve_cmd->add_option("--seed", sv_seed)->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run a full experiment from a config file");
  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config,-c", run_config)->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", run_out, "overrides output_dir");
  run->add_option("--seed", run_seed, "overrides seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*corpus) {
      const auto lex = rfm::Lexicon::bundled();
      if (per_set > 0) {
        rfm::save_candidate_sets(corpus_out, rfm::generate_candidate_sets(*lex, corpus_count, per_set, {corpus_seed, spread}));
      } else {
        rfm::save_preference_pairs(corpus_out, rfm::generate_pairs(*lex, corpus_count, {corpus_seed, spread}));
      }
    } else if (*simulate) {
      const auto pairs = rfm::load_preference_pairs(sim_pairs);
      rfm::FeatureNormalizer norm;
      if (!sim_norm.empty() && std::filesystem::exists(sim_norm)) {
        norm = rfm::load_normalizer(sim_norm);
      } else {
        norm = rfm::fit_normalizer(pairs, *extractor());
        if (!sim_norm.empty()) rfm::save_normalizer(sim_norm, norm);
      }
      const auto features = rfm::compute_pair_features(pairs, *extractor(), norm);
      const auto users = rfm::name_users(rfm::sample_users({sim_p, rfm::derive_seed(sim_seed, "users"), sim_m}), sim_prefix);
      std::vector<rfm::PreferenceRecord> records;
      if (sim_visits == 0) {
        for (const auto& u : users) {
          auto part = rfm::label_all(pairs, features, u);
          records.insert(records.end(), part.begin(), part.end());
        }
      } else {
        rfm::Rng rng(rfm::derive_seed(sim_seed, "labels"));
        records = rfm::label_with_raters(pairs, features, users, sim_visits, rng);
      }
      rfm::save_preference_records(sim_out, records);
      if (!sim_users.empty()) rfm::save_users(sim_users, users);
      std::cout << records.size() << " records from " << users.size() << " users\n";
    } else if (*train_cmd) {
      const auto records = rfm::load_preference_records(tr_records);
      rfm::FeatureContext fc{extractor(), std::nullopt};
      if (!tr_norm.empty()) fc.normalizer = rfm::load_normalizer(tr_norm);
      const auto result = rfm::train(records, tr_cfg, tr_enc.config(rfm::derive_seed(tr_cfg.seed, "encoder")), fc);
      rfm::save_model(tr_out, result.model);
      if (!tr_report.empty()) rfm::save_training_report(tr_report, result.report);
      const auto& sel = result.report.selected();
      std::cout << "selected update " << sel.update << ": validation accuracy " << sel.validation_accuracy
                << ", validation loss " << sel.validation_loss << "\n";
    } else if (*adapt_cmd) {
      std::optional<rfm::FeatureNormalizer> norm;
      if (!ad_norm.empty()) norm = rfm::load_normalizer(ad_norm);
      const auto model = rfm::load_model(ad_model, norm ? &*norm : nullptr, extractor());
      std::map<std::string, std::vector<rfm::LabelledPair>> by_user;
      for (const auto& r : rfm::load_preference_records(ad_records)) by_user[r.rater_id].push_back({r.pair, r.label});
      std::vector<rfm::AdaptedHead> heads;
      for (const auto& [id, data] : by_user) {
        auto h = rfm::adapt(rfm::build_adaptation_set(model, data), ad_cfg);
        h.user_id = id;
        heads.push_back(std::move(h));
      }
      rfm::save_heads(ad_out, heads);
      std::cout << heads.size() << " heads adapted\n";
    } else if (*eval_cmd) {
      const auto norm = rfm::load_normalizer(ev_norm);
      const auto model = rfm::load_model(ev_model, nullptr, extractor());
      const auto users = rfm::load_users(ev_users);
      const auto pairs = rfm::load_preference_pairs(ev_pairs);
      const auto truth = rfm::compute_pair_features(pairs, *extractor(), norm);
      const auto report = ev_heads.empty()
                              ? rfm::intra_user_accuracy(model, users, pairs, truth, ev_opts)
                              : rfm::inter_user_accuracy(model, rfm::load_heads(ev_heads), users, pairs, truth, ev_opts);
      std::cout << std::fixed << std::setprecision(4) << "accuracy " << report.mean << "  " << ev_opts.level * 100
                << "% interval [" << report.ci.lo << ", " << report.ci.hi << "]  (" << report.scored
                << " scored, " << report.skipped_ties << " ties skipped)\n";
      if (!ev_out.empty()) {
        std::ofstream(ev_out) << rfm::accuracy_report_to_json(report) << "\n";
      }
    } else if (*bound) {
      rfm::BoundInput in;
      in.delta = b_delta;
      in.within_var = b_within;
      in.between_var = b_between;
      std::optional<rfm::ToyDistribution> toy;
      if (!b_toy.empty()) {
        toy = rfm::load_toy_distribution(b_toy);
        const auto ex = rfm::exact_moments(*toy);
        in.within_var = ex.within;
        in.between_var = ex.between;
        std::cout << "toy: L_D = " << ex.mean << ", within = " << ex.within << ", between = " << ex.between << "\n";
      }
      std::cout << std::setw(10) << "m";
      for (auto n : b_n) std::cout << std::setw(14) << ("n=" + std::to_string(n));
      std::cout << std::setw(14) << "n=inf";
      if (toy) std::cout << std::setw(14) << "violations";
      std::cout << "\n";
      for (auto m : b_m) {
        in.m = m;
        std::cout << std::setw(10) << m;
        for (auto n : b_n) {
          in.n = n;
          std::cout << std::setw(14) << std::setprecision(6) << rfm::epsilon_single(in);
        }
        std::cout << std::setw(14) << rfm::epsilon_limit_n(in);
        if (toy) {
          in.n = b_n.front();
          std::cout << std::setw(14) << rfm::monte_carlo_coverage(*toy, m, b_n.front(), b_delta, b_trials, b_seed);
        }
        std::cout << "\n";
      }
      if (toy) std::cout << "(violations use n = " << b_n.front() << ")\n";
    } else if (*bon) {
      auto cfg = rfm::load_experiment_config(bon_config);
      cfg.best_of_n_sets = bon_sets;
      cfg.run_rfm = cfg.run_baselines = true;
      std::cout << rfm::format_summary(rfm::run_experiment(cfg));
    } else if (*serve_cmd) {
      std::optional<rfm::FeatureNormalizer> norm;
      if (!sv_norm.empty()) norm = rfm::load_normalizer(sv_norm);
      auto model = std::make_shared<const rfm::RfmModel>(rfm::load_model(sv_model, norm ? &*norm : nullptr, extractor()));
      rfm::SessionManager manager(model, rfm::load_preference_pairs(sv_pool), sv_seed);
      std::cout << "listening on " << sv_host << ":" << sv_port << std::endl;
      rfm::serve(manager, sv_host, sv_port);
    } else if (*run) {
      auto cfg = rfm::load_experiment_config(run_config);
      if (!run_out.empty()) cfg.output_dir = run_out;
      if (run_seed) cfg.seed = *run_seed;
      std::cout << rfm::format_summary(rfm::run_experiment(cfg));
    }
  } catch (const rfm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
