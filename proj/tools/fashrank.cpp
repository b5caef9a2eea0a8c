// fashrank: annotation service, campaign simulator, exports, reports and
// guidance runs.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "fashrank/analysis.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/guidance.hpp"
#include "fashrank/http_server.hpp"
#include "fashrank/judgment_store.hpp"
#include "fashrank/service.hpp"
#include "fashrank/simulation.hpp"
#include "nlohmann/json.hpp"

namespace {

using namespace fashrank;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

std::uint64_t env_seed() {
  return std::stoull(env_or("FASHRANK_SEED", "0"));
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
}

Timestamp wall_clock() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise fashionability rating and guidance toolkit"};
  app.require_subcommand(1);
  const std::string default_log = env_or("FASHRANK_LOG", "events.jsonl");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  std::string serve_log = default_log, host = "127.0.0.1", static_dir;
  int port = 8080;
  bool allow_draw = false;
  double ttl_seconds = 120.0;
  serve->add_option("--log", serve_log, "Event log path")->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_flag("--allow-draw", allow_draw, "Accept draw judgments");
  serve->add_option("--ttl", ttl_seconds, "Pair reservation lifetime in seconds")
      ->capture_default_str();
  serve->add_option("--static", static_dir, "Directory served under /ui");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Register items into the event log");
  std::string items_path, ingest_log = default_log;
  ingest->add_option("--items", items_path, "JSON list of {item_id, image_uri}")->required();
  ingest->add_option("--log", ingest_log)->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic annotation campaign");
  CampaignConfig campaign;
  campaign.seed = 0;
  std::string sim_out, summary_out, truth_path, rho_csv;
  double temperature = 2.0, draw_band = 0.0;
  bool run_to_target = false;
  simulate->add_option("--items", campaign.n_items)->capture_default_str();
  simulate->add_option("--per-item", campaign.per_item_target)->capture_default_str();
  auto* seed_opt = simulate->add_option("--seed", campaign.seed);
  simulate->add_option("--out", sim_out, "Event log to write")->required();
  simulate->add_option("--summary", summary_out, "Campaign summary JSON (default stdout)");
  simulate->add_option("--rho-csv", rho_csv, "Write the inter-group rho history as CSV");
  simulate->add_option("--truth", truth_path, "JSON map item_id -> true score");
  simulate->add_option("--temperature", temperature)->capture_default_str();
  simulate->add_option("--draw-band", draw_band)->capture_default_str();
  simulate->add_option("--checkpoint", campaign.checkpoint_every)->capture_default_str();
  simulate->add_flag("--run-to-target", run_to_target,
                     "Ignore saturation and run until every item reaches the target");

  // export
  auto* exporter = app.add_subcommand("export", "Export scores from the event log");
  std::string export_dim = "overall", export_format = "csv", export_log = default_log,
              export_out, export_table = "merged";
  int classes = 0;
  exporter->add_option("--dimension", export_dim)->capture_default_str();
  exporter->add_option("--classes", classes, "Attach 3- or 5-way class labels")
      ->check(CLI::IsMember({3, 5}));
  exporter->add_option("--format", export_format)
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  exporter->add_option("--log", export_log)->capture_default_str();
  exporter->add_option("--table", export_table)
      ->check(CLI::IsMember({"A", "B", "merged"}))
      ->capture_default_str();
  exporter->add_option("--out", export_out);

  // report
  auto* report = app.add_subcommand("report", "Compare class files before/after");
  std::string before_path, after_path, evaluator = "OpenSkill-based", method = "Ours";
  bool report_json = false;
  report->add_option("--before", before_path)->required();
  report->add_option("--after", after_path)->required();
  report->add_option("--evaluator", evaluator)->capture_default_str();
  report->add_option("--method", method)->capture_default_str();
  report->add_flag("--json", report_json);

  // guide
  auto* guide = app.add_subcommand("guide", "Run the latent guidance loop");
  std::string clf_path, latent_path, schedule = "geometric:1.0:0.1", guide_out;
  std::size_t steps = 50;
  GuidanceConfig guidance;
  guide->add_option("--classifier", clf_path, "Linear classifier JSON {W, b, dim}")->required();
  guide->add_option("--latent", latent_path, "JSON list with the initial latent")->required();
  guide->add_option("--steps", steps)->capture_default_str();
  guide->add_option("--lambda", guidance.lambda)->capture_default_str();
  guide->add_option("--schedule", schedule)->capture_default_str();
  guide->add_option("--out", guide_out, "Trajectory JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      ServiceConfig cfg;
      cfg.log_path = serve_log;
      cfg.allow_draw = allow_draw;
      cfg.seed = env_seed();
      cfg.reservation_ttl =
          std::chrono::milliseconds(static_cast<std::int64_t>(ttl_seconds * 1000.0));
      AnnotationService service(cfg);
      HttpServer server(service);
      if (!static_dir.empty() && !server.mount_static(static_dir)) {
        std::cerr << "cannot serve static directory " << static_dir << "\n";
        return 1;
      }
      if (!server.bind(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << serve_log << " on http://" << host << ":" << port
                << " (presentation seed " << cfg.seed << ")\n";
      server.listen_after_bind();
      g_server = nullptr;
      return 0;
    }

    if (*ingest) {
      const auto doc = read_json_file(items_path);
      if (!doc.is_array()) {
        throw Error(ErrorCode::kInvalidArgument, "items file must be a JSON list");
      }
      auto store = JudgmentStore::open(ingest_log);
      std::vector<ItemRegistration> batch;
      std::set<ItemId> seen;
      for (const auto& entry : doc) {
        ItemRegistration item{entry.at("item_id").get<std::string>(),
                              entry.at("image_uri").get<std::string>()};
        // Reject the whole file before anything is appended.
        if (store.tables().contains(item.item_id) || !seen.insert(item.item_id).second) {
          throw Error(ErrorCode::kDuplicateItem,
                      "item '" + item.item_id + "' already registered");
        }
        batch.push_back(std::move(item));
      }
      const Timestamp ts = wall_clock();
      for (const auto& item : batch) store.register_item(item.item_id, item.image_uri, ts);
      std::cerr << "registered " << batch.size() << " items into " << ingest_log << "\n";
      return 0;
    }

    if (*simulate) {
      if (seed_opt->count() == 0) campaign.seed = env_seed();
      campaign.stop_on_saturation = !run_to_target;
      GroundTruth truth;
      if (!truth_path.empty()) truth = read_truth_file(truth_path, temperature, draw_band);
      truth.noise_temperature = temperature;
      truth.draw_band = draw_band;
      const CampaignResult result = run_campaign(campaign, truth);
      std::ofstream out(sim_out, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::kIo, "cannot write '" + sim_out + "'");
      result.store.write(out);
      if (!rho_csv.empty()) write_output(rho_csv, rho_history_csv(result.rho_history()));
      write_output(summary_out, campaign_summary_json(campaign, result));
      return 0;
    }

    if (*exporter) {
      const auto events = read_log_file(export_log);
      const RatingTables tables = replay(events, RatingConfig{});
      ExportOptions opts;
      opts.kind = export_table == "A"   ? TableKind::kGroupA
                  : export_table == "B" ? TableKind::kGroupB
                                        : TableKind::kMerged;
      if (classes) opts.arity = classes;
      write_output(export_out,
                   export_scores(tables, export_dim,
                                 export_format == "csv" ? ExportFormat::kCsv
                                                        : ExportFormat::kJson,
                                 opts));
      return 0;
    }

    if (*report) {
      const ReportRow row{evaluator, method,
                          comparison_report(read_class_file(before_path),
                                            read_class_file(after_path))};
      std::cout << (report_json ? render_comparison_json({&row, 1})
                                : render_comparison_table({&row, 1}));
      return 0;
    }

    if (*guide) {
      const LinearClassifier clf = read_linear_classifier(clf_path);
      const auto latent_doc = read_json_file(latent_path);
      GuidanceState initial;
      initial.latent = latent_doc.is_object() ? latent_doc.at("latent").get<std::vector<double>>()
                                              : latent_doc.get<std::vector<double>>();
      const auto sigmas = parse_schedule(schedule, steps);
      initial.sigma_step = sigmas.front();
      const auto trajectory = run_guidance(initial, clf, guidance, sigmas);
      write_output(guide_out, trajectory_json(trajectory));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
