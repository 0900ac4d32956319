// Command-line front end: dataset ingestion, training, evaluation, the
// social-force baseline, batch simulations, session analysis and the
// HTTP session service.

#include "proxilab/analysis.hpp"
#include "proxilab/dialogue.hpp"
#include "proxilab/errors.hpp"
#include "proxilab/http_service.hpp"
#include "proxilab/network.hpp"
#include "proxilab/session.hpp"
#include "proxilab/simlab.hpp"
#include "proxilab/socialforce.hpp"
#include "proxilab/socnav.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>

using namespace proxilab;

namespace {

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
}

const std::vector<LabeledExample>& pick_split(const DatasetSplit& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "validation") return s.validation;
  if (name == "test") return s.test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proxilab: personalized proxemics modeling toolkit"};
  app.require_subcommand(1);
  std::cout << std::fixed << std::setprecision(4);

  // make-fixture
  auto* fixture = app.add_subcommand("make-fixture", "Write the synthetic SocNav1-format fixture");
  int fx_count = 300;
  std::uint64_t fx_seed = 7;
  std::string fx_out;
  fixture->add_option("--count", fx_count, "Number of scenarios")->capture_default_str();
  fixture->add_option("--seed", fx_seed, "Generator seed")->capture_default_str();
  fixture->add_option("--out", fx_out, "Output JSON path")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse, filter, encode and split a SocNav1 file");
  std::string in_socnav, in_out, in_ratios = "0.8,0.1,0.1";
  std::uint64_t in_seed = 0;
  ingest->add_option("--socnav", in_socnav, "SocNav1 JSON file")->required();
  ingest->add_option("--out", in_out, "Output JSONL with split tags")->required();
  ingest->add_option("--seed", in_seed, "Split seed")->capture_default_str();
  ingest->add_option("--ratios", in_ratios, "train,validation,test")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the discomfort network");
  std::string tr_data, tr_out, tr_config = "default";
  std::uint64_t tr_seed = 0;
  std::optional<double> tr_lr, tr_wd, tr_momentum;
  std::optional<int> tr_epochs, tr_batch;
  train_cmd->add_option("--data", tr_data, "Labeled JSONL from ingest")->required();
  train_cmd->add_option("--out", tr_out, "Model JSON path")->required();
  train_cmd->add_option("--seed", tr_seed, "Initialization and shuffling seed")->capture_default_str();
  train_cmd
      ->add_option("--config", tr_config,
                   "default: lr 0.5e-3, weight decay 0.1; fixture-fit: lr 0.01, weight decay 0")
      ->check(CLI::IsMember({"default", "fixture-fit"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", tr_lr, "Override learning rate");
  train_cmd->add_option("--weight-decay", tr_wd, "Override weight decay");
  train_cmd->add_option("--momentum", tr_momentum, "Override momentum");
  train_cmd->add_option("--epochs", tr_epochs, "Override epoch count");
  train_cmd->add_option("--batch-size", tr_batch, "Override mini-batch size");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Print the MAE of a model on labeled data");
  std::string ev_model, ev_data, ev_split = "validation";
  bool ev_no_smooth = false;
  eval_cmd->add_option("--model", ev_model, "Model JSON")->required();
  eval_cmd->add_option("--data", ev_data, "Labeled JSONL")->required();
  eval_cmd->add_option("--split", ev_split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  eval_cmd->add_flag("--no-smooth", ev_no_smooth, "Skip Savitzky-Golay smoothing");

  // fit-sf
  auto* sf_cmd = app.add_subcommand("fit-sf", "Fit the social-force baseline with a genetic algorithm");
  std::string sf_data, sf_out;
  std::uint64_t sf_seed = 0;
  int sf_pop = 50, sf_gens = 100;
  sf_cmd->add_option("--data", sf_data, "Labeled JSONL")->required();
  sf_cmd->add_option("--out", sf_out, "SFParams JSON path")->required();
  sf_cmd->add_option("--seed", sf_seed, "GA seed")->capture_default_str();
  sf_cmd->add_option("--population", sf_pop, "Population size")->capture_default_str();
  sf_cmd->add_option("--generations", sf_gens, "Generations")->capture_default_str();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Run the synthetic-user experiments");
  std::string sim_model, sim_out, sim_preset = "angled";
  int sim_users = 20, sim_threads = 0, sim_rounds = 3;
  std::uint64_t sim_seed = 11;
  bool sim_replica = false, sim_no_smooth = false;
  sim_cmd->add_option("--model", sim_model, "Base model JSON (not needed with --replica)");
  sim_cmd->add_option("--users", sim_users, "Synthetic users")->capture_default_str();
  sim_cmd->add_option("--preset", sim_preset, "flat, angled or shifted")
      ->check(CLI::IsMember({"flat", "angled", "shifted"}))
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed, "Experiment seed")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "Report JSON path")->required();
  sim_cmd->add_option("--threads", sim_threads, "Worker threads, 0 = all cores")->capture_default_str();
  sim_cmd->add_option("--rounds", sim_rounds, "ATL rounds per user")->capture_default_str();
  sim_cmd->add_flag("--replica", sim_replica, "Run the AR/physical analysis replica instead");
  sim_cmd->add_flag("--no-smooth", sim_no_smooth, "Evaluate without smoothing");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "Outliers, KDE modes, GPR and t-tests over session logs");
  std::string an_dir, an_report, an_physical = "physical";
  an_cmd->add_option("--session-dir", an_dir, "Directory of session-<id>.jsonl files")->required();
  an_cmd->add_option("--report", an_report, "Report JSON path")->required();
  an_cmd->add_option("--physical-condition", an_physical, "Condition tag of physical-robot sessions")
      ->capture_default_str();

  // serve
  auto* srv_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  std::string srv_model, srv_dialogue, srv_store, srv_host = "127.0.0.1";
  int srv_port = 8080;
  double srv_latency = 0.0;
  bool srv_no_smooth = false;
  srv_cmd->add_option("--model", srv_model, "Base model JSON")->required();
  srv_cmd->add_option("--dialogue", srv_dialogue, "dialogue.json")->required();
  srv_cmd->add_option("--store", srv_store, "Session store directory")->required();
  srv_cmd->add_option("--port", srv_port, "TCP port, 0 = any free port")->capture_default_str();
  srv_cmd->add_option("--host", srv_host, "Bind address")->capture_default_str();
  srv_cmd->add_option("--latency", srv_latency, "Stop reaction latency in seconds")->capture_default_str();
  srv_cmd->add_flag("--no-smooth", srv_no_smooth, "Predict without smoothing");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fixture) {
      const auto scenarios = simlab::make_socnav_fixture(fx_count, fx_seed);
      ensure_parent(fx_out);
      write_dataset(fx_out, scenarios);
      std::cout << "wrote " << scenarios.size() << " scenarios to " << fx_out << '\n';
    } else if (*ingest) {
      const auto all = parse_dataset(in_socnav);
      const auto single = filter_single_human(all);
      const auto labeled = to_labeled_examples(single);
      for (const auto& w : labeled.warnings) std::cerr << "warning: " << w << '\n';
      const auto sp = split(labeled.examples, parse_ratios(in_ratios), in_seed);
      ensure_parent(in_out);
      write_examples_jsonl(in_out, sp);
      std::cout << "records " << all.size() << ", single-human " << single.size() << ", encoded "
                << labeled.examples.size() << " (train " << sp.train.size() << ", validation "
                << sp.validation.size() << ", test " << sp.test.size() << ")\n";
    } else if (*train_cmd) {
      const auto sp = split_from_tagged(read_examples_jsonl(tr_data), tr_seed);
      TrainConfig tc;
      if (tr_config == "fixture-fit") {
        tc.learning_rate = 0.01;
        tc.weight_decay = 0.0;
      }
      if (tr_lr) tc.learning_rate = *tr_lr;
      if (tr_wd) tc.weight_decay = *tr_wd;
      if (tr_momentum) tc.momentum = *tr_momentum;
      if (tr_epochs) tc.epochs = *tr_epochs;
      if (tr_batch) tc.batch_size = *tr_batch;
      tc.seed = tr_seed;
      const auto net = train(sp, NetworkConfig{}, tc, SordConfig{});
      ensure_parent(tr_out);
      save_model(net, tr_out);
      std::cout << "trained " << net.meta.epochs_run << " epochs, best epoch " << net.meta.best_epoch << '\n';
      if (!sp.validation.empty()) {
        std::cout << "validation MAE " << mean_absolute_error(net, sp.validation, false) << " (smoothed "
                  << mean_absolute_error(net, sp.validation, true) << ")\n";
      }
    } else if (*eval_cmd) {
      const auto net = load_model(ev_model);
      const auto tagged = read_examples_jsonl(ev_data);
      std::vector<LabeledExample> data;
      if (ev_split == "all") {
        for (const auto& t : tagged) data.push_back(t.example);
      } else {
        data = pick_split(split_from_tagged(tagged, net.meta.seed), ev_split);
      }
      if (data.empty()) throw std::invalid_argument("no examples in split '" + ev_split + "'");
      std::cout << "MAE " << mean_absolute_error(net, data, !ev_no_smooth) << " on " << data.size() << " "
                << ev_split << " examples" << (ev_no_smooth ? "" : " (smoothed)") << '\n';
    } else if (*sf_cmd) {
      const auto sp = split_from_tagged(read_examples_jsonl(sf_data), sf_seed);
      GAConfig gc;
      gc.population_size = sf_pop;
      gc.generations = sf_gens;
      gc.seed = sf_seed;
      const auto fit = ga_fit(sp.train, SFBounds{}, gc);
      write_text(sf_out, sf_params_to_json(fit.params));
      std::cout << "train MAE " << fit.fitness;
      if (!sp.validation.empty()) std::cout << ", validation MAE " << fitness(fit.params, sp.validation);
      std::cout << '\n';
    } else if (*sim_cmd) {
      const auto preset = simlab::preset_from_string(sim_preset);
      const auto seeds = simlab::derive_seeds(sim_seed, sim_users);
      if (sim_replica) {
        simlab::ReplicaConfig rc;
        rc.preset = preset;
        const auto rep = simlab::run_ar_physical_replica(sim_users, rc, seeds);
        write_text(sim_out, simlab::replica_to_json(rep));
        std::cout << "outlier recall " << rep.outlier_recall << ", held-out error GPR " << rep.heldout_gpr_error
                  << " vs naive " << rep.heldout_naive_error << '\n';
      } else {
        if (sim_model.empty()) throw std::invalid_argument("--model is required unless --replica is given");
        const auto base = load_model(sim_model);
        simlab::Study1Config cfg;
        cfg.preset = preset;
        cfg.threads = sim_threads;
        cfg.rounds = sim_rounds;
        cfg.smooth = !sim_no_smooth;
        const auto rep = simlab::run_study1(base, sim_users, atl::SamplerGrid::defaults(), cfg, seeds);
        write_text(sim_out, simlab::report_to_json(rep));
        std::cout << "MAE ATL " << rep.mean_atl << ", RS " << rep.mean_rs << ", not fine-tuned " << rep.mean_base
                  << ", mean relative reduction " << rep.mean_relative_reduction << '\n';
        for (const auto& c : rep.test_matrix) {
          std::cout << "  " << c.a << " < " << c.b << ": t " << c.test.statistic << ", p " << c.test.p_value
                    << ", df " << c.test.df.value_or(0) << '\n';
        }
      }
    } else if (*an_cmd) {
      analysis::AnalysisConfig ac;
      ac.physical_condition = an_physical;
      const auto rep = analysis::analyze_sessions(analysis::load_session_dir(an_dir), ac);
      write_text(an_report, analysis::analysis_to_json(rep));
      std::cout << "analyzed " << rep.sessions.size() << " sessions in " << rep.groups.size() << " groups\n";
      if (!rep.gpr_note.empty()) std::cout << "gpr: " << rep.gpr_note << '\n';
      if (!rep.test_matrix_note.empty()) std::cout << "test matrix: " << rep.test_matrix_note << '\n';
    } else if (*srv_cmd) {
      auto base = std::make_shared<const ProxemicsNetwork>(load_model(srv_model));
      service::ServiceConfig sc;
      sc.store = srv_store;
      sc.stop_latency_s = srv_latency;
      sc.smooth = !srv_no_smooth;
      service::SessionManager sessions(base, load_dialogue(srv_dialogue), sc);
      const auto restored = sessions.load_store();
      service::HttpServer server(sessions);
      const int port = server.bind(srv_host, srv_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "restored " << restored << " sessions; listening on " << srv_host << ":" << port << std::endl;
      const bool ok = server.listen();
      g_server = nullptr;
      if (!ok) throw IoError("HTTP accept loop failed");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
