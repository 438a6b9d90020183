// SPDX-License-Identifier: Apache-2.0
//
// vnfscale command-line entry point: dataset generation, training, evaluation,
// timing, deployment dumps, embedding export and single decisions.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vnfscale/error.hpp"
#include "vnfscale/train.hpp"

namespace fs = std::filesystem;
using namespace vnfscale;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

io::Json run_manifest(const std::string& command, const io::Json& args) {
  return io::Json{{"command", command}, {"software_version", kVersion}, {"timestamp", utc_now()}, {"args", args}};
}

bool on_off(const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw Error(Errc::InvalidArgument, "expected on|off, got '" + v + "'");
}

NetworkTopology topology_arg(const std::string& s) {
  if (s == "internet2") return build_internet2();
  if (s == "mec") return build_mec();
  NetworkTopology t = io::read_topology(s);
  validate_topology(t);
  return t;
}

const std::vector<DatasetEntry>& split_arg(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "val") return ds.val;
  if (split == "test") return ds.test;
  throw Error(Errc::InvalidArgument, "unknown split '" + split + "'");
}

double dataset_alpha(const Dataset& ds, double alpha) { return alpha >= 0.0 ? alpha : ds.spec.solver.alpha; }

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct CommonModel {
  std::string dataset;
  std::string checkpoint;
  double alpha = -1.0;
};

void add_common(CLI::App* sub, CommonModel& m, bool need_checkpoint) {
  sub->add_option("--dataset", m.dataset, "dataset directory")->required();
  auto* c = sub->add_option("--checkpoint", m.checkpoint, "checkpoint file");
  if (need_checkpoint) c->required();
  sub->add_option("--alpha", m.alpha, "resource-cost coefficient (default: dataset's)");
}

Deployment decide_for(const Agent& agent, const NetworkTopology& t, const DatasetEntry& e, InitMode init,
                      ScalingGrid* grid_out = nullptr) {
  const Deployment start = initial_deployment(t, e, init);
  const ScalingGrid g = greedy_grid(agent, t, start, e.requests);
  if (grid_out) *grid_out = g;
  return apply_scaling(t, start, g);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VNF scaling simulator, dataset generator and RL trainer"};
  app.set_config("--config", "", "read flags from a config file");
  app.require_subcommand(1);

  // gen-dataset
  std::string topo = "internet2", out_dir, solver_mode = "local_search";
  std::size_t entries = 100, per_entry = 10, budget = 20000;
  double alpha = 0.2, slack = 0.95, penalty = 20.0;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-dataset", "generate a dataset of reference deployments and requests");
  gen->add_option("--topology", topo, "internet2 | mec | path to a topology file");
  gen->add_option("--entries", entries);
  gen->add_option("--requests-per-entry", per_entry);
  gen->add_option("--alpha", alpha);
  gen->add_option("--slack", slack);
  gen->add_option("--solver", solver_mode, "exact | local_search");
  gen->add_option("--search-budget", budget);
  gen->add_option("--unroutable-penalty", penalty);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_dir)->required();

  // train
  CommonModel tm;
  std::string algo = "ppg", encoder = "gat", pe = "on", ne = "on", train_cfg_file;
  std::size_t episodes = 2000, eval_every = 100, pretrain_steps = 200;
  std::uint64_t train_seed = 0;
  bool no_pretrain = false, freeze = false;
  auto* train = app.add_subcommand("train", "pretrain the encoder and train a scaling policy");
  train->add_option("--dataset", tm.dataset)->required();
  train->add_option("--algo", algo, "reinforce | ppo | ppg");
  train->add_option("--encoder", encoder, "gat | ggnn");
  train->add_option("--pe", pe, "positional encoding on|off");
  train->add_option("--ne", ne, "node embeddings on|off");
  train->add_option("--alpha", tm.alpha);
  train->add_option("--episodes", episodes);
  train->add_option("--eval-every", eval_every);
  train->add_option("--seed", train_seed);
  train->add_option("--train-config", train_cfg_file, "JSON file with training hyper-parameters");
  train->add_option("--pretrain-steps", pretrain_steps);
  train->add_flag("--no-pretrain", no_pretrain);
  train->add_flag("--freeze-encoder", freeze);
  train->add_option("--out", out_dir)->required();

  // eval
  CommonModel em;
  std::string init = "perturbed", split = "test";
  auto* eval = app.add_subcommand("eval", "greedy evaluation over a split");
  add_common(eval, em, false);
  eval->add_option("--init", init, "perturbed | random | zero | reference");
  eval->add_option("--split", split);
  std::string eval_policy = "greedy";
  std::size_t random_samples = 20;
  std::uint64_t eval_seed = 0;
  eval->add_option("--policy", eval_policy, "greedy | random (uniform actions from the stored initial deployment)");
  eval->add_option("--random-samples", random_samples, "grids per entry for --policy random");
  eval->add_option("--seed", eval_seed, "seed for --policy random");
  eval->add_option("--out", out_dir, "directory for metrics.csv and manifest");

  // bench-time
  CommonModel bm;
  std::size_t bench_n = 10;
  std::string bench_solver = "exact";
  auto* bench = app.add_subcommand("bench-time", "time policy decisions against the reference solver");
  add_common(bench, bm, true);
  bench->add_option("--n", bench_n);
  bench->add_option("--solver", bench_solver, "exact | local_search");
  bench->add_option("--split", split);

  // dump-deployment / export-embeddings / decide
  CommonModel dm;
  int entry_id = 0;
  std::string out_file;
  auto* dump = app.add_subcommand("dump-deployment", "instances and paths produced for one entry");
  add_common(dump, dm, true);
  dump->add_option("--entry", entry_id)->required();
  dump->add_option("--init", init);
  dump->add_option("--out", out_file);
  auto* exp = app.add_subcommand("export-embeddings", "write averaged node representations as CSV");
  add_common(exp, dm, true);
  exp->add_option("--entry", entry_id)->required();
  exp->add_option("--init", init);
  exp->add_option("--out", out_file);
  auto* decide = app.add_subcommand("decide", "print the greedy scaling grid for one entry");
  add_common(decide, dm, true);
  decide->add_option("--entry", entry_id)->required();
  decide->add_option("--init", init);
  decide->add_option("--out", out_file);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  auto emit = [&](const std::string& text) {
    if (out_file.empty()) {
      std::cout << text;
    } else {
      io::write_text(out_file, text);
    }
  };

  try {
    if (*gen) {
      DatasetSpec spec;
      spec.entries = entries;
      spec.requests_per_entry = per_entry;
      spec.slack = slack;
      spec.seed = seed;
      spec.solver.alpha = alpha;
      spec.solver.mode = parse_solver_mode(solver_mode);
      spec.solver.search_budget = budget;
      spec.solver.routing.unroutable_penalty = penalty;
      const Dataset ds = make_dataset(topology_arg(topo), spec);
      save_dataset(out_dir, ds, run_manifest("gen-dataset", {{"topology", topo}}));
      std::cout << "wrote " << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size() << " entries to "
                << out_dir << "\n";
      return 0;
    }

    if (*train) {
      const Dataset ds = load_dataset(tm.dataset);
      TrainConfig tc;
      if (!train_cfg_file.empty()) tc = train_config_from_json(io::read_json(train_cfg_file));
      tc.algorithm = parse_algorithm(algo);
      tc.alpha = dataset_alpha(ds, tm.alpha);
      tc.episodes = episodes;
      tc.eval_every = eval_every;
      tc.seed = train_seed;
      tc.routing = ds.spec.solver.routing;
      tc.validate();

      PolicyConfig pc;
      pc.encoder.kind = parse_encoder_kind(encoder);
      pc.encoder.use_node_embedding = on_off(ne);
      pc.encoder.frozen = freeze;
      pc.positional_encoding = on_off(pe);
      Agent agent = make_agent(pc, ds.topology, mix_seed(train_seed, 1));

      io::Json pre = nullptr;
      if (!no_pretrain) {
        PretrainConfig pcfg;
        pcfg.steps = pretrain_steps;
        pcfg.seed = mix_seed(train_seed, 2);
        const PretrainReport rep = pretrain_encoder(ds.topology, ds.train, pc.encoder, agent.policy, pcfg, tc.routing);
        pre = {{"steps", pretrain_steps}, {"final_loss", rep.final_loss}, {"train_accuracy", rep.train_accuracy}};
        std::cerr << "pretrain loss " << fmt(rep.final_loss) << " accuracy " << fmt(rep.train_accuracy) << "\n";
      }
      const TrainResult res = train_loop(std::move(agent), ds, tc, [](const std::string& s) { std::cerr << s << "\n"; });

      const fs::path out(out_dir);
      io::Json evals = io::Json::array();
      for (const auto& e : res.evals) evals.push_back({{"episode", e.episode}, {"val_reward", e.val_reward}});
      Checkpoint best{res.best, res.rng_state,
                      {{"train_config", to_json(tc)}, {"best_episode", res.best_episode},
                       {"val_reward", res.best_val_reward}}};
      Checkpoint last{res.last, res.rng_state,
                      {{"train_config", to_json(tc)}, {"episode", tc.episodes}, {"val_reward", res.last_val_reward}}};
      save_checkpoint(out / "checkpoint.json", best);
      save_checkpoint(out / "last.json", last);
      io::write_text(out / "curves_episodes.csv", episode_curve_csv(res));
      io::write_text(out / "curves_updates.csv", update_curve_csv(res));
      io::Json m = run_manifest("train", {{"dataset", tm.dataset}, {"algo", algo}, {"encoder", encoder}, {"pe", pe},
                                          {"ne", ne}, {"pretrain", !no_pretrain}, {"freeze_encoder", freeze}});
      m["config_hash"] = config_hash(res.best.config);
      m["seeds"] = {{"train", train_seed}, {"dataset", ds.spec.seed}};
      m["train_config"] = to_json(tc);
      m["pretrain"] = pre;
      m["evals"] = evals;
      m["best_episode"] = res.best_episode;
      m["best_val_reward"] = res.best_val_reward;
      m["outputs"] = {"checkpoint.json", "last.json", "curves_episodes.csv", "curves_updates.csv"};
      io::write_json(out / "manifest.json", m);
      std::cout << "best val reward " << fmt(res.best_val_reward) << " at episode " << res.best_episode << "\n";
      return 0;
    }

    if (*eval) {
      const Dataset ds = load_dataset(em.dataset);
      const InitMode mode = parse_init_mode(init);
      const double a = dataset_alpha(ds, em.alpha);
      Metrics m;
      std::string hash = "";
      if (eval_policy == "random") {
        m = evaluate_random_policy(ds.topology, split_arg(ds, split), a, random_samples, eval_seed,
                                   ds.spec.solver.routing);
      } else if (eval_policy != "greedy") {
        throw Error(Errc::InvalidArgument, "unknown policy '" + eval_policy + "'");
      } else if (mode == InitMode::Reference) {
        m = evaluate_agent(Agent{}, ds.topology, split_arg(ds, split), a, mode, ds.spec.solver.routing);
      } else {
        if (em.checkpoint.empty()) throw Error(Errc::InvalidArgument, "--checkpoint is required unless --init reference");
        const Checkpoint c = load_checkpoint(em.checkpoint);
        hash = config_hash(c.agent.config);
        m = evaluate_agent(c.agent, ds.topology, split_arg(ds, split), a, mode, ds.spec.solver.routing);
      }
      const std::string table = std::string(kMetricsHeader) + "\n" + metrics_csv_row(m) + "\n";
      std::cout << table;
      if (!out_dir.empty()) {
        io::write_text(fs::path(out_dir) / "metrics.csv", table);
        io::Json man = run_manifest("eval", {{"dataset", em.dataset}, {"checkpoint", em.checkpoint}, {"init", init},
                                             {"split", split}, {"alpha", a}, {"policy", eval_policy}});
        man["config_hash"] = hash;
        man["outputs"] = {"metrics.csv"};
        io::write_json(fs::path(out_dir) / "manifest.json", man);
      }
      return 0;
    }

    if (*bench) {
      const Dataset ds = load_dataset(bm.dataset);
      const Checkpoint c = load_checkpoint(bm.checkpoint);
      const auto& es = split_arg(ds, split);
      if (es.empty()) throw Error(Errc::InvalidArgument, "split is empty");
      SolverConfig sc = ds.spec.solver;
      sc.mode = parse_solver_mode(bench_solver);
      sc.alpha = dataset_alpha(ds, bm.alpha);
      const Router router(ds.topology, sc.routing);
      using clock = std::chrono::steady_clock;
      double policy_s = 0.0, solver_s = 0.0;
      std::cout << "run,entry,policy_s,solver_s\n";
      for (std::size_t k = 0; k < bench_n; ++k) {
        const DatasetEntry& e = es[k % es.size()];
        auto t0 = clock::now();
        const Deployment d = decide_for(c.agent, ds.topology, e, InitMode::Perturbed);
        (void)router.reward(d, e.requests, sc.alpha);
        auto t1 = clock::now();
        (void)solve_reference(ds.topology, e.requests, sc);
        auto t2 = clock::now();
        const double p = std::chrono::duration<double>(t1 - t0).count();
        const double s = std::chrono::duration<double>(t2 - t1).count();
        policy_s += p;
        solver_s += s;
        std::cout << k << ',' << e.id << ',' << fmt(p, "%.6g") << ',' << fmt(s, "%.6g") << "\n";
      }
      policy_s /= static_cast<double>(bench_n);
      solver_s /= static_cast<double>(bench_n);
      std::cout << "mean_policy_s,mean_solver_s,speedup\n"
                << fmt(policy_s, "%.6g") << ',' << fmt(solver_s, "%.6g") << ',' << fmt(solver_s / policy_s, "%.3f")
                << "\n";
      return 0;
    }

    if (*dump || *exp || *decide) {
      const Dataset ds = load_dataset(dm.dataset);
      const Checkpoint c = load_checkpoint(dm.checkpoint);
      const DatasetEntry& e = ds.find(entry_id);
      const NetworkTopology& t = ds.topology;
      const InitMode mode = parse_init_mode(init);
      std::ostringstream os;
      if (*exp) {
        diff::NoGradGuard ng;
        const auto reps = encode_state(t, initial_deployment(t, e, mode), e.requests, c.agent.config.encoder,
                                       c.agent.policy);
        os << "node_id";
        for (std::size_t j = 0; j < reps.mean.cols(); ++j) os << ",h" << j;
        os << "\n";
        for (std::size_t i = 0; i < reps.mean.rows(); ++i) {
          os << i;
          for (std::size_t j = 0; j < reps.mean.cols(); ++j) os << ',' << fmt(reps.mean(i, j), "%.9g");
          os << "\n";
        }
        emit(os.str());
        return 0;
      }
      ScalingGrid g;
      const Deployment d = decide_for(c.agent, t, e, mode, &g);
      if (*decide) {
        os << "node_id,vnf,action\n";
        for (std::size_t r = 0; r < g.nodes.size(); ++r)
          for (std::size_t v = 0; v < kNumVnfTypes; ++v)
            os << g.nodes[r] << ',' << vnf_name(kAllVnfTypes[v]) << ',' << action_name(g.at(r, v)) << "\n";
        emit(os.str());
        return 0;
      }
      const double a = dataset_alpha(ds, dm.alpha);
      const Router router(t, ds.spec.solver.routing);
      os << "# entry " << e.id << " (" << to_string(mode) << " start)\n";
      os << "node_id,vnf,count\n";
      for (std::size_t i = 0; i < t.size(); ++i)
        for (VnfType v : kAllVnfTypes)
          if (d.at(static_cast<int>(i), v) > 0) os << i << ',' << vnf_name(v) << ',' << d.at(static_cast<int>(i), v) << "\n";
      os << "request_id,path,delay_ms,sla_ms,violated\n";
      for (const auto& r : e.requests) {
        const PathResult p = router.route(d, r);
        std::string path;
        for (std::size_t k = 0; k < p.hops.size(); ++k) path += (k ? "-" : "") + std::to_string(p.hops[k]);
        const bool violated = !p.routable || p.delay_ms > r.sla_ms;
        os << r.id << ',' << (p.routable ? path : "unroutable") << ',' << (p.routable ? fmt(p.delay_ms, "%.4f") : "inf")
           << ',' << fmt(r.sla_ms, "%.4f") << ',' << (violated ? 1 : 0) << "\n";
      }
      os << kMetricsHeader << "\n" << metrics_csv_row(evaluate(router, d, e.requests, a)) << "\n";
      emit(os.str());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
