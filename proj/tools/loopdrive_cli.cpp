// Copyright 2026 The loopdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "loopdrive/config.hpp"
#include "loopdrive/datagen.hpp"
#include "loopdrive/harness.hpp"
#include "loopdrive/planner.hpp"
#include "loopdrive/scenario.hpp"
#include "loopdrive/scoring.hpp"
#include "loopdrive/suite.hpp"
#include "loopdrive/text_metrics.hpp"
#include "loopdrive/wire.hpp"

namespace fs = std::filesystem;
using namespace loopdrive;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPlanner = 2;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string attention;  // "", "on", "off"
  std::optional<std::uint64_t> seed;
};

HarnessConfig resolve_config(const CommonOptions& o) {
  HarnessConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  std::vector<std::string> ov = o.overrides;
  if (o.attention == "on") ov.push_back("attention_prefix=true");
  if (o.attention == "off") ov.push_back("attention_prefix=false");
  if (o.seed) ov.push_back("seed=" + std::to_string(*o.seed));
  return apply_overrides(cfg, ov);
}

std::vector<Scenario> resolve_routes(const std::string& routes) {
  if (routes == "builtin:smoke") return suite::smoke_suite();
  if (routes == "builtin:faults") {
    std::vector<Scenario> v;
    for (const auto* f : {"red-light-runner", "collider", "stopper"}) v.push_back(suite::fault_scenario(f));
    return v;
  }
  if (fs::is_regular_file(routes)) return {load_scenario(routes)};
  return load_scenario_dir(routes);
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << content;
}

std::string jsonl(const std::vector<nlohmann::json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open '" + p.string() + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw InputError("MalformedRecord: " + p.string() + ":" + std::to_string(n));
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::string g_invocation;

std::string invocation_string(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// ---------------------------------------------------------------------------

int cmd_eval(const CommonOptions& common, const std::string& routes, const std::string& planner_sel,
             const std::string& endpoint, const std::string& out_dir, bool sequential, int connect_timeout_ms) {
  const HarnessConfig cfg = resolve_config(common);
  const auto scenarios = resolve_routes(routes);

  BenchmarkRun run;
  if (planner_sel == "external") {
    if (endpoint.empty()) throw ConfigError("--planner external needs --endpoint");
    wire::ExternalPlanner ext(wire::Endpoint::parse(endpoint));
    std::cerr << "listening on " << ext.endpoint().str() << std::endl;
    const HarnessConfig r = cfg.resolved();
    ext.accept({wire::kProtocolVersion, r.dt, r.waypoint_dt, r.attention_prefix}, connect_timeout_ms);
    struct Borrowed : Planner {
      Planner* inner;
      explicit Borrowed(Planner* p) : inner(p) {}
      PlannerResponse plan(const PlannerRequest& q) override { return inner->plan(q); }
    };
    run = run_benchmark(scenarios, [&] { return std::make_unique<Borrowed>(&ext); }, cfg, false);
  } else {
    run = run_benchmark(scenarios, make_planner_factory(planner_sel, cfg.resolved().oracle), cfg, !sequential);
  }

  const fs::path out(out_dir);
  nlohmann::json results = to_json(run.report);
  results["config"] = to_json(cfg);
  results["planner"] = planner_sel;
  results["invocation"] = g_invocation;
  write_file(out / "results.json", results.dump(2) + "\n");
  write_file(out / "report.txt", "# " + g_invocation + "\n" + render_table(run.report));
  for (const auto& t : run.traces) write_file(out / "traces" / (t.episode_id + ".json"), to_json(t).dump() + "\n");
  std::cout << render_table(run.report);

  bool planner_failed = false;
  for (const auto& r : run.report.rows) {
    if (!r.error.empty()) {
      std::cerr << "episode '" << r.route_id << "': " << r.error << "\n";
      planner_failed = true;
    }
  }
  return planner_failed ? kExitPlanner : kExitOk;
}

int cmd_score_qa(const std::string& predictions, const std::string& references, const std::string& out_path,
                 double cider_scale, const std::string& bleu_mode) {
  const auto preds = read_jsonl(predictions);
  const auto refs = read_jsonl(references);
  std::map<std::string, std::vector<std::string>> ref_by_id;
  std::size_t line = 0;
  for (const auto& r : refs) {
    ++line;
    if (!r.contains("id") || !r.contains("references") || !r.at("references").is_array()) {
      throw InputError("MalformedRecord: " + references + ":" + std::to_string(line));
    }
    ref_by_id[r.at("id").get<std::string>()] = r.at("references").get<std::vector<std::string>>();
  }
  std::vector<text::ScoredPair> corpus;
  std::set<std::string> seen;
  line = 0;
  for (const auto& p : preds) {
    ++line;
    if (!p.contains("id") || !p.contains("hypothesis") || !p.at("hypothesis").is_string()) {
      throw InputError("MalformedRecord: " + predictions + ":" + std::to_string(line));
    }
    const auto id = p.at("id").get<std::string>();
    const auto it = ref_by_id.find(id);
    if (it == ref_by_id.end()) throw InputError("IdMismatch: prediction id '" + id + "' has no references");
    seen.insert(id);
    corpus.push_back(text::make_pair(id, p.at("hypothesis").get<std::string>(), it->second));
  }
  for (const auto& [id, _] : ref_by_id) {
    if (!seen.count(id)) throw InputError("IdMismatch: reference id '" + id + "' has no prediction");
  }
  const double b = bleu_mode == "sentence" ? text::sentence_bleu_mean(corpus) : text::bleu(corpus);
  nlohmann::json out{{"count", corpus.size()}, {"bleu", b}, {"bleu_mode", bleu_mode}, {"cider_scale", cider_scale}};
  if (corpus.size() >= 2) {
    const auto c = text::cider_d(corpus);
    out["cider_d"] = c.mean * cider_scale;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < corpus.size(); ++i) per.push_back({{"id", corpus[i].id}, {"cider_d", c.per_pair[i] * cider_scale}});
    out["per_pair"] = per;
  } else {
    out["cider_d"] = nullptr;
    out["note"] = "CIDEr-D needs at least two records";
  }
  const std::string text = out.dump(2) + "\n";
  if (out_path.empty()) std::cout << text;
  else write_file(out_path, text);
  return kExitOk;
}

int cmd_gen_data(const CommonOptions& common, const std::string& routes, const std::string& mixture_path,
                 const std::string& out_dir) {
  const HarnessConfig cfg = resolve_config(common).resolved();
  const auto scenarios = resolve_routes(routes);
  const auto factory = make_planner_factory("oracle", cfg.oracle);

  std::vector<datagen::QAPair> pairs;
  for (const auto& sc : scenarios) {
    auto planner = factory();
    const auto run = run_episode(sc, *planner, cfg);
    const auto trace = datagen::autopilot_trace(sc, run.trace, cfg);
    const datagen::TrajectoryPairOptions opt{cfg.waypoint_dt, cfg.lookahead, cfg.prompt_style};
    for (std::size_t i = 0; i < trace.samples.size(); i += static_cast<std::size_t>(cfg.planner_cadence)) {
      try {
        pairs.push_back(datagen::make_trajectory_pair(sc.route, trace, i, opt));
      } catch (const datagen::InsufficientFuture&) {
        break;
      }
    }
  }

  const fs::path out(out_dir);
  std::vector<nlohmann::json> rows;
  for (const auto& p : pairs) rows.push_back(datagen::to_json(p));
  write_file(out / "carla_pairs.jsonl", jsonl(rows));

  datagen::MixtureSpec spec{{{"carla", 2}}, cfg.seed};
  std::map<std::string, std::vector<datagen::QAPair>> datasets{{"carla", pairs}};
  if (!mixture_path.empty()) {
    std::ifstream in(mixture_path);
    if (!in) throw ConfigError("cannot open mixture spec '" + mixture_path + "'");
    nlohmann::json mj;
    try {
      mj = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("mixture spec '" + mixture_path + "': " + e.what());
    }
    spec.sources.clear();
    spec.seed = common.seed ? *common.seed : mj.value("seed", cfg.seed);
    const fs::path base = fs::path(mixture_path).parent_path();
    for (const auto& s : mj.at("sources")) {
      const auto tag = s.at("tag").get<std::string>();
      spec.sources.push_back({tag, s.value("repeat", std::size_t{1})});
      if (s.contains("path") && !datasets.count(tag)) {
        const auto kind = s.value("kind", tag);
        std::vector<datagen::QAPair> ds;
        std::size_t line = 0;
        for (const auto& r : read_jsonl(base / s.at("path").get<std::string>())) {
          ++line;
          try {
            ds.push_back(datagen::reformulate(kind, datagen::source_from_json(r)));
          } catch (const nlohmann::json::exception&) {
            throw InputError("MalformedRecord: " + (base / s.at("path").get<std::string>()).string() + ":" +
                               std::to_string(line));
          }
        }
        datasets[tag] = std::move(ds);
      }
    }
  }
  const auto stream = datagen::build_mixture(spec, datasets);
  rows.clear();
  for (const auto& p : stream) rows.push_back(datagen::to_json(p));
  write_file(out / "mixture.jsonl", jsonl(rows));

  nlohmann::json counts = nlohmann::json::object();
  for (const auto& p : stream) counts[p.source] = counts.value(p.source, 0) + 1;
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& s : spec.sources) {
    sources.push_back({{"tag", s.tag}, {"repeat", s.repeat}, {"size", datasets.at(s.tag).size()}});
  }
  const nlohmann::json manifest{{"invocation", g_invocation},
                                {"seed", spec.seed},
                                {"trajectory_pairs", pairs.size()},
                                {"stream_length", stream.size()},
                                {"sources", sources},
                                {"counts", counts}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << manifest.dump(2) << "\n";
  return kExitOk;
}

int cmd_replay(const std::string& trace_path, const std::string& responses_path) {
  std::ifstream in(trace_path);
  if (!in) throw ConfigError("cannot open trace '" + trace_path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("trace '" + trace_path + "': " + e.what());
  }
  const EpisodeTrace trace = trace_from_json(j);
  std::vector<TranscriptEntry> transcript = trace.transcript();
  if (!responses_path.empty()) {
    transcript.clear();
    for (const auto& r : read_jsonl(responses_path)) {
      transcript.push_back({r.at("tick").get<std::int64_t>(), r.value("response", std::string{}), r.value("timeout", false)});
    }
  }
  const auto outcome = replay(trace, transcript);
  nlohmann::json out{{"episode_id", trace.episode_id}, {"identical", outcome.identical}, {"result", to_json(outcome.result)}};
  if (outcome.first_divergent_tick) out["first_divergent_tick"] = *outcome.first_divergent_tick;
  std::cout << out.dump(2) << "\n";
  return outcome.identical ? kExitOk : kExitConfig;
}

int cmd_serve(const std::string& endpoint, const std::string& planner_sel, const CommonOptions& common) {
  const HarnessConfig cfg = resolve_config(common).resolved();
  auto planner = make_planner_factory(planner_sel, cfg.oracle)();
  auto client = wire::PlannerClient::connect(wire::Endpoint::parse(endpoint));
  const auto summary = client.serve([&](const PlannerRequest& req) { return planner->plan(req).text; });
  std::cerr << "served " << summary.served << " requests, " << summary.failed << " failed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loopdrive: closed-loop driving evaluation harness"};
  app.require_subcommand(1);

  CommonOptions common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Harness config file (JSON)");
    sub->add_option("--set", common.overrides, "Config override key=value (repeatable)");
    sub->add_option("--attention-prefix", common.attention, "Prepend the attention prefix to prompts")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--seed", common.seed, "Seed override");
  };

  std::string routes = "builtin:smoke";
  std::string planner = "oracle";
  std::string endpoint;
  std::string out_dir = "out";
  bool sequential = false;
  int connect_timeout_ms = 60000;
  auto* eval = app.add_subcommand("eval", "Run a closed-loop benchmark");
  add_common(eval);
  eval->add_option("--routes", routes, "Scenario directory, file, builtin:smoke or builtin:faults");
  eval->add_option("--planner", planner, "oracle | faults:<name> | external");
  eval->add_option("--endpoint", endpoint, "tcp://host:port or unix:///path for --planner external");
  eval->add_option("--out", out_dir, "Output directory");
  eval->add_flag("--sequential", sequential, "Run episodes on one thread");
  eval->add_option("--connect-timeout-ms", connect_timeout_ms, "Wait for the external planner to connect");

  std::string predictions;
  std::string references;
  std::string scores_out;
  double cider_scale = 1.0;
  std::string bleu_mode = "corpus";
  auto* score = app.add_subcommand("score-qa", "Score predictions with BLEU and CIDEr-D");
  score->add_option("--predictions", predictions, "JSON-lines {id, hypothesis}")->required();
  score->add_option("--references", references, "JSON-lines {id, references[]}")->required();
  score->add_option("--out", scores_out, "Scores file (stdout if omitted)");
  score->add_option("--cider-scale", cider_scale, "Multiplier applied to reported CIDEr-D");
  score->add_option("--bleu-mode", bleu_mode, "corpus | sentence")->check(CLI::IsMember({"corpus", "sentence"}));

  std::string mixture;
  auto* gen = app.add_subcommand("gen-data", "Generate trajectory QA pairs and a mixture stream");
  add_common(gen);
  gen->add_option("--routes", routes, "Scenario directory, file, builtin:smoke or builtin:faults");
  gen->add_option("--mixture", mixture, "Mixture spec file (default: carla x2)");
  gen->add_option("--out", out_dir, "Output directory");

  std::string trace_path;
  std::string responses_path;
  auto* rep = app.add_subcommand("replay", "Re-run a trace from its recorded planner responses");
  rep->add_option("--trace", trace_path, "Trace file from eval")->required();
  rep->add_option("--responses", responses_path, "JSON-lines {tick, response, timeout} replacing the transcript");

  auto* serve = app.add_subcommand("serve-planner-endpoint", "Connect to a harness endpoint and answer with a planner");
  add_common(serve);
  serve->add_option("--endpoint", endpoint, "Harness endpoint")->required();
  serve->add_option("--planner", planner, "oracle | faults:<name>");

  g_invocation = invocation_string(argc, argv);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*eval) return cmd_eval(common, routes, planner, endpoint, out_dir, sequential, connect_timeout_ms);
    if (*score) return cmd_score_qa(predictions, references, scores_out, cider_scale, bleu_mode);
    if (*gen) return cmd_gen_data(common, routes, mixture, out_dir);
    if (*rep) return cmd_replay(trace_path, responses_path);
    if (*serve) return cmd_serve(endpoint, planner, common);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ScenarioInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FingerprintMismatch& e) {
    std::cerr << "error: FingerprintMismatch: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wire::HandshakeVersionMismatch& e) {
    std::cerr << "error: HandshakeVersionMismatch: " << e.what() << "\n";
    return kExitPlanner;
  } catch (const PlannerTimeout& e) {
    std::cerr << "error: planner timeout: " << e.what() << "\n";
    return kExitPlanner;
  } catch (const PlannerDisconnected& e) {
    std::cerr << "error: planner disconnected: " << e.what() << "\n";
    return kExitPlanner;
  } catch (const wire::WireError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPlanner;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
