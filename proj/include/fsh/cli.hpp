#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fsh/data_model.hpp"
#include "fsh/decomposition.hpp"
#include "fsh/error.hpp"
#include "fsh/probe.hpp"
#include "fsh/rda.hpp"
#include "fsh/report.hpp"
#include "fsh/spread.hpp"
#include "fsh/stats.hpp"
#include "fsh/synthetic.hpp"

/**
 * @file cli.hpp
 *
 * @brief The `fsh` command line: check, spread, rda, probe, correlate,
 * cross-model, decompose, synth and time.
 *
 * Exit codes: 0 success, 2 usage error, 3 validation failure, 4 computation
 * failure. Reports go to `--out`, defaulting to $FSH_OUT_DIR, then ".".
 */

namespace fsh::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_validation = 3;
inline constexpr int exit_computation = 4;

inline constexpr const char* sign_convention = "metric correlated with -IFH; higher metric means harder";
inline constexpr const char* probe_note = "method 'probe' is a linear softmax probe standing in for few-shot adaptation";

namespace detail {

struct Common {
  std::vector<std::string> data;
  std::size_t shots = 64;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct ProbeFlags {
  std::string config_file;
  ProbeConfig config;
  CLI::Option* lr = nullptr;
  CLI::Option* epochs = nullptr;
  CLI::Option* l2 = nullptr;
  CLI::Option* tol = nullptr;

  void add_to(CLI::App* app) {
    app->add_option("--probe-config", config_file, "key = value file with probe settings");
    lr = app->add_option("--lr", config.learning_rate, "probe learning rate");
    epochs = app->add_option("--epochs", config.epochs, "probe epochs");
    l2 = app->add_option("--l2", config.l2_penalty, "probe L2 penalty");
    tol = app->add_option("--tol", config.convergence_tol, "probe convergence tolerance on loss delta");
  }

  /// Config file first, explicit flags override it.
  ProbeConfig resolve(std::uint64_t seed) const {
    ProbeConfig out = config;
    if (!config_file.empty()) {
      out = load_probe_config(config_file);
      if (lr->count()) out.learning_rate = config.learning_rate;
      if (epochs->count()) out.epochs = config.epochs;
      if (l2->count()) out.l2_penalty = config.l2_penalty;
      if (tol->count()) out.convergence_tol = config.convergence_tol;
    }
    out.seed = seed;
    out.validate();
    return out;
  }
};

inline void add_probe_entries(ConfigEntries& entries, const ProbeConfig& p) {
  entries.emplace_back("probe.learning_rate", format_double(p.learning_rate));
  entries.emplace_back("probe.epochs", std::to_string(p.epochs));
  entries.emplace_back("probe.l2_penalty", format_double(p.l2_penalty));
  entries.emplace_back("probe.convergence_tol", format_double(p.convergence_tol));
}

inline std::string join(const std::vector<std::string>& xs, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

inline std::filesystem::path output_dir(const Common& c) {
  std::filesystem::path dir = c.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("FSH_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail_validation("cannot create output directory '" + dir.string() + "'");
  return dir;
}

inline ConfigEntries base_entries(const Common& c, bool with_data = true) {
  ConfigEntries e;
  if (with_data) e.emplace_back("data", join(c.data));
  e.emplace_back("shots", std::to_string(c.shots));
  e.emplace_back("seed", std::to_string(c.seed));
  return e;
}

inline std::vector<FeatureDataset> load_all(const std::vector<std::string>& paths) {
  std::vector<FeatureDataset> out;
  for (const auto& p : paths) out.push_back(load_feature_dataset(p));
  return out;
}

inline void write_scores(const std::filesystem::path& path, std::string_view command, const ConfigEntries& cfg,
                         const std::string& method, const std::vector<std::pair<std::string, double>>& scores) {
  ReportWriter w(path, command, cfg);
  w.row("dataset", "method", "score");
  for (const auto& [ds, v] : scores) w.row(ds, method, v);
}

inline std::map<std::string, std::string> load_categories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open category file '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (fsh::detail::is_comment_or_blank(line)) continue;
    const auto f = fsh::detail::split_csv_line(line);
    if (!header) {
      if (f != std::vector<std::string>{"method", "category"}) fail_validation(path.string() + ": expected header 'method,category'");
      header = true;
      continue;
    }
    if (f.size() != 2) fail_validation(path.string() + ": expected 'method,category' rows");
    out[f[0]] = f[1];
  }
  return out;
}

inline void write_matrix(const std::filesystem::path& wide, const std::filesystem::path& long_form,
                         std::string_view command, const ConfigEntries& cfg, const CorrelationMatrix& cm,
                         const std::vector<std::string>& notes) {
  {
    ReportWriter w(wide, command, cfg, notes);
    std::vector<std::string> header{"name"};
    header.insert(header.end(), cm.names.begin(), cm.names.end());
    w.row(header);
    for (std::size_t i = 0; i < cm.names.size(); ++i) {
      std::vector<std::string> row{cm.names[i]};
      for (std::size_t j = 0; j < cm.names.size(); ++j) row.push_back(format_optional(cm.values[i][j]));
      w.row(row);
    }
  }
  ReportWriter w(long_form, command, cfg, notes);
  w.row("row", "col", "value", "n");
  for (std::size_t i = 0; i < cm.names.size(); ++i) {
    for (std::size_t j = 0; j < cm.names.size(); ++j) {
      w.row(cm.names[i], cm.names[j], cm.values[i][j], cm.n_shared[i][j]);
    }
  }
}

}  // namespace detail

/// Parses `argv` and executes one subcommand. Messages go to `out` / `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Few-shot hardness toolkit: spread, loss-curve hardness, correlations and decomposition", "fsh"};
  app.require_subcommand(1, 1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool data_required = true) {
    auto* d = sub->add_option("--data", common.data, "feature file(s), one JSON record per line");
    if (data_required) d->required();
    sub->add_option("--shots", common.shots, "shots per label")->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "root seed");
    sub->add_option("--out", common.out_dir, "output directory (default $FSH_OUT_DIR or .)");
  };

  auto* check = app.add_subcommand("check", "validate feature files and summarize label counts");
  add_common(check);

  bool normalize = false, skip_unmatched = false;
  auto* spread_cmd = app.add_subcommand("spread", "mean distance of test examples to the nearest same-label shot");
  add_common(spread_cmd);
  spread_cmd->add_flag("--normalize", normalize, "L2-normalize features first");
  spread_cmd->add_flag("--skip-unmatched", skip_unmatched, "drop test examples whose label has no shot");

  ProbeFlags rda_probe;
  std::size_t seeds_per_slice = 3;
  std::string auc_mode = "mean";
  auto* rda_cmd = app.add_subcommand("rda", "area under the test-loss curve over growing slices (--shots = max slice)");
  add_common(rda_cmd);
  rda_probe.add_to(rda_cmd);
  rda_cmd->add_option("--seeds-per-slice", seeds_per_slice, "probes per slice size")->check(CLI::PositiveNumber);
  rda_cmd->add_option("--auc-mode", auc_mode)->check(CLI::IsMember({"mean", "trapezoid_log"}));

  ProbeFlags probe_flags;
  std::string mfh_mode = "difference", majority_from = "test", method_name = "probe";
  auto* probe_cmd = app.add_subcommand("probe", "few-shot probe accuracy and MFH against the majority baseline");
  add_common(probe_cmd);
  probe_flags.add_to(probe_cmd);
  probe_cmd->add_option("--mfh-mode", mfh_mode)->check(CLI::IsMember({"difference", "ratio"}));
  probe_cmd->add_option("--majority-from", majority_from)->check(CLI::IsMember({"test", "train"}));
  probe_cmd->add_option("--method-name", method_name, "method column written to the score table");

  std::string scores_path, categories_path;
  std::vector<std::string> metric_paths;
  std::size_t min_methods = 0;
  auto* corr_cmd = app.add_subcommand("correlate", "method x method correlations and metric-vs-IFH correlation");
  corr_cmd->add_option("--scores", scores_path, "MFH score table (dataset,method,score)")->required();
  corr_cmd->add_option("--metrics", metric_paths, "metric score table(s); each method column is one metric");
  corr_cmd->add_option("--categories", categories_path, "method,category CSV for category averages");
  corr_cmd->add_option("--min-methods", min_methods, "methods required per dataset for IFH (0 = all)");
  corr_cmd->add_option("--out", common.out_dir, "output directory");

  std::string table_a, table_b;
  auto* cross_cmd = app.add_subcommand("cross-model", "per-method correlation between two score tables");
  cross_cmd->add_option("--a", table_a, "score table from the first model")->required();
  cross_cmd->add_option("--b", table_b, "score table from the second model")->required();
  cross_cmd->add_option("--out", common.out_dir, "output directory");

  ProbeFlags dec_probe;
  std::size_t clusters = 2, restarts = 10, max_iter = 100;
  std::string dec_mode = "both", reference_path;
  auto* dec_cmd = app.add_subcommand("decompose", "k-means decomposition with per-cluster probes");
  add_common(dec_cmd);
  dec_probe.add_to(dec_cmd);
  dec_cmd->add_option("--clusters", clusters, "number of clusters P")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
  dec_cmd->add_option("--max-iter", max_iter)->check(CLI::PositiveNumber);
  dec_cmd->add_option("--mode", dec_mode)->check(CLI::IsMember({"ours", "control", "both"}));
  dec_cmd->add_option("--reference", reference_path, "example_id,group CSV for Jaccard overlap");

  SyntheticSpec syn;
  ModesSpec modes;
  std::string kind = "shift", syn_output;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic feature file");
  synth_cmd->add_option("--kind", kind)->check(CLI::IsMember({"shift", "modes"}));
  synth_cmd->add_option("--labels", syn.n_labels, "labels (shift)");
  synth_cmd->add_option("--train-per-label", syn.train_per_label, "train points per label (per mode/label cell for modes)");
  synth_cmd->add_option("--test-per-label", syn.test_per_label, "test points per label (per cell for modes)");
  synth_cmd->add_option("--dim", syn.dim, "feature dimension");
  synth_cmd->add_option("--shift", syn.test_shift, "test displacement (shift)");
  synth_cmd->add_option("--overlap", syn.overlap, "blob noise norm (shift) / per-coordinate noise (modes)");
  synth_cmd->add_option("--separation", modes.separation, "mode separation (modes)");
  synth_cmd->add_option("--seed", syn.seed, "seed");
  synth_cmd->add_option("--output", syn_output, "feature file to write")->required();
  synth_cmd->add_option("--out", common.out_dir, "directory for the generation report");

  ProbeFlags time_probe;
  std::vector<std::string> time_metrics{"spread", "rda"};
  auto* time_cmd = app.add_subcommand("time", "wall-clock timing of metrics (dataset load excluded)");
  add_common(time_cmd);
  time_probe.add_to(time_cmd);
  time_cmd->add_option("--metrics", time_metrics, "comma-separated metrics")->delimiter(',')->check(
      CLI::IsMember({"spread", "rda"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << '\n';
    return exit_usage;
  }

  try {
    if (check->parsed()) {
      const auto dir = output_dir(common);
      const auto datasets = load_all(common.data);
      ReportWriter w(dir / "check.csv", "check", {{"data", join(common.data)}});
      w.row("dataset", "split", "label", "count");
      for (const auto& ds : datasets) {
        std::size_t n_train = 0;
        for (Split s : {Split::train, Split::test}) {
          for (const auto& [label, members] : fsh::detail::group_by_label(ds, s)) {
            w.row(ds.name, to_string(s), label, members.size());
            if (s == Split::train) n_train += members.size();
          }
        }
        out << ds.name << ": " << ds.examples.size() << " examples (" << n_train << " train), dim " << ds.dim
            << ", " << ds.labels.size() << " labels\n";
      }
      return exit_ok;
    }

    if (spread_cmd->parsed()) {
      const auto dir = output_dir(common);
      const auto datasets = load_all(common.data);
      auto cfg = base_entries(common);
      cfg.emplace_back("normalize", normalize ? "true" : "false");
      cfg.emplace_back("skip_unmatched", skip_unmatched ? "true" : "false");
      ReportWriter summary(dir / "spread.csv", "spread", cfg);
      summary.row("dataset", "spread", "n_test", "n_skipped", "normalized");
      std::vector<std::pair<std::string, double>> scores;
      for (const auto& ds : datasets) {
        const auto split = sample_few_shot(ds, common.shots, common.seed);
        const auto rep = spread(ds, split, {normalize, skip_unmatched});
        summary.row(ds.name, rep.spread, rep.per_example.size(), rep.skipped.size(), rep.normalized);
        ReportWriter dump(dir / ("spread_distances_" + ds.name + ".csv"), "spread", cfg);
        dump.row("test_id", "distance", "nearest_train_id");
        for (const auto& e : rep.per_example) dump.row(e.test_id, e.distance, e.nearest_train_id);
        scores.emplace_back(ds.name, rep.spread);
        out << (datasets.size() > 1 ? ds.name + " " : std::string()) << format_double(rep.spread) << '\n';
      }
      write_scores(dir / "spread_scores.csv", "spread", cfg, "spread", scores);
      return exit_ok;
    }

    if (rda_cmd->parsed()) {
      const auto dir = output_dir(common);
      const auto datasets = load_all(common.data);
      const auto probe = rda_probe.resolve(common.seed);
      auto schedule = default_schedule(common.shots);
      schedule.seeds_per_slice = seeds_per_slice;
      const auto mode = auc_mode == "mean" ? AucMode::mean : AucMode::trapezoid_log;
      auto cfg = base_entries(common);
      add_probe_entries(cfg, probe);
      std::vector<std::string> sizes;
      for (auto s : schedule.sizes) sizes.push_back(std::to_string(s));
      cfg.emplace_back("schedule", join(sizes));
      cfg.emplace_back("seeds_per_slice", std::to_string(seeds_per_slice));
      cfg.emplace_back("auc_mode", auc_mode);
      cfg.emplace_back("loss", "mean test log-loss");
      ReportWriter summary(dir / "rda.csv", "rda", cfg);
      summary.row("dataset", "auc", "auc_mode");
      std::vector<std::pair<std::string, double>> scores;
      for (const auto& ds : datasets) {
        const auto rep = rda_score(ds, schedule, probe, common.seed, mode);
        summary.row(ds.name, rep.auc, to_string(rep.auc_mode));
        ReportWriter curve(dir / ("rda_curve_" + ds.name + ".csv"), "rda", cfg, {"auc=" + format_double(rep.auc)});
        curve.row("slice", "mean_loss", "std");
        for (const auto& p : rep.curve) curve.row(p.slice, p.mean_loss, p.std_loss);
        scores.emplace_back(ds.name, rep.auc);
        out << (datasets.size() > 1 ? ds.name + " " : std::string()) << format_double(rep.auc) << '\n';
      }
      write_scores(dir / "rda_scores.csv", "rda", cfg, "rda", scores);
      return exit_ok;
    }

    if (probe_cmd->parsed()) {
      const auto dir = output_dir(common);
      const auto datasets = load_all(common.data);
      const auto probe = probe_flags.resolve(common.seed);
      auto cfg = base_entries(common);
      add_probe_entries(cfg, probe);
      cfg.emplace_back("mfh_mode", mfh_mode);
      cfg.emplace_back("majority_from", majority_from);
      cfg.emplace_back("method_name", method_name);
      ReportWriter w(dir / "probe.csv", "probe", cfg, {probe_note});
      w.row("dataset", "method", "accuracy", "log_loss", "majority", "mfh");
      std::vector<std::pair<std::string, double>> scores;
      for (const auto& ds : datasets) {
        const auto split = sample_few_shot(ds, common.shots, common.seed);
        const auto model = train_probe(split, ds, probe);
        const auto eval = evaluate_probe(model, ds, split.test);
        const auto maj = majority_baseline(ds, split, majority_from == "test" ? MajoritySource::test : MajoritySource::train);
        const auto score = fsh::mfh(eval.accuracy, maj, mfh_mode == "difference" ? MfhMode::difference : MfhMode::ratio);
        w.row(ds.name, method_name, eval.accuracy, eval.mean_log_loss, maj, score);
        scores.emplace_back(ds.name, score);
        out << (datasets.size() > 1 ? ds.name + " " : std::string()) << format_double(score) << '\n';
      }
      write_scores(dir / "mfh_scores.csv", "probe", cfg, method_name, scores);
      return exit_ok;
    }

    if (corr_cmd->parsed()) {
      const auto dir = output_dir(common);
      const auto table = load_score_table(scores_path);
      ConfigEntries cfg{{"scores", scores_path}, {"metrics", join(metric_paths)},
                        {"categories", categories_path}, {"min_methods", std::to_string(min_methods)}};
      const std::vector<std::string> notes{"spearman with average ranks; missing cells are left empty"};
      const auto cm = method_correlation_matrix(table);
      write_matrix(dir / "method_correlation.csv", dir / "method_correlation_long.csv", "correlate", cfg, cm, notes);
      if (!categories_path.empty()) {
        const auto cat = category_average(cm, load_categories(categories_path));
        write_matrix(dir / "category_correlation.csv", dir / "category_correlation_long.csv", "correlate", cfg, cat,
                     {"cell = mean of defined off-diagonal method pairs; n = pairs averaged"});
      }
      const auto ifhs = ifh_by_dataset(table, min_methods);
      {
        ReportWriter w(dir / "ifh.csv", "correlate", cfg);
        w.row("dataset", "ifh");
        for (const auto& [ds, v] : ifhs) w.row(ds, v);
      }
      if (auto avg = mean_off_diagonal(cm)) out << "mean method correlation " << format_double(*avg) << '\n';
      if (!metric_paths.empty()) {
        ReportWriter w(dir / "metric_vs_ifh.csv", "correlate", cfg, {sign_convention});
        w.row("metric", "rho", "abs_rho", "n");
        for (const auto& mp : metric_paths) {
          const auto metrics = load_score_table(mp);
          for (std::size_t c = 0; c < metrics.cols().size(); ++c) {
            std::map<std::string, double> per_dataset;
            for (std::size_t r = 0; r < metrics.rows().size(); ++r) {
              if (auto v = metrics.get(r, c)) per_dataset[metrics.rows()[r]] = *v;
            }
            const auto mc = metric_vs_ifh(per_dataset, table, min_methods);
            w.row(metrics.cols()[c], mc.rho, mc.abs_rho, mc.n);
            out << metrics.cols()[c] << " rho " << format_double(mc.rho) << '\n';
          }
        }
      }
      return exit_ok;
    }

    if (cross_cmd->parsed()) {
      const auto dir = output_dir(common);
      const auto a = load_score_table(table_a);
      const auto b = load_score_table(table_b);
      const auto rows = cross_model_correlation(a, b);
      ReportWriter w(dir / "cross_model.csv", "cross-model", {{"a", table_a}, {"b", table_b}});
      w.row("method", "rho", "n");
      for (const auto& r : rows) {
        w.row(r.method, r.rho, r.n_shared);
        out << r.method << ' ' << format_optional(r.rho) << '\n';
      }
      return exit_ok;
    }

    if (dec_cmd->parsed()) {
      const auto dir = output_dir(common);
      if (common.data.size() != 1) fail_validation("decompose takes exactly one --data file");
      const auto ds = load_feature_dataset(common.data.front());
      DecomposeOptions opts;
      opts.clusters = clusters;
      opts.shots = common.shots;
      opts.probe = dec_probe.resolve(common.seed);
      opts.seed = common.seed;
      opts.restarts = restarts;
      opts.max_iter = max_iter;
      auto cfg = base_entries(common);
      add_probe_entries(cfg, opts.probe);
      cfg.emplace_back("clusters", std::to_string(clusters));
      cfg.emplace_back("restarts", std::to_string(restarts));
      cfg.emplace_back("max_iter", std::to_string(max_iter));
      cfg.emplace_back("mode", dec_mode);
      cfg.emplace_back("kmeans_fit", "train split only");
      std::vector<RoutingMode> run_modes;
      if (dec_mode != "control") run_modes.push_back(RoutingMode::ours);
      if (dec_mode != "ours") run_modes.push_back(RoutingMode::control);

      ReportWriter summary(dir / "decompose.csv", "decompose", cfg, {probe_note});
      summary.row("mode", "accuracy", "majority", "mfh");
      ReportWriter per_cluster(dir / "decompose_clusters.csv", "decompose", cfg);
      per_cluster.row("mode", "cluster", "train_members", "test_routed", "test_correct", "fallback_labels");
      std::optional<Clustering> clustering;
      for (auto m : run_modes) {
        opts.mode = m;
        auto res = evaluate_decomposed(ds, opts);
        summary.row(to_string(m), res.accuracy, res.majority, res.mfh);
        for (const auto& c : res.clusters) {
          per_cluster.row(to_string(m), c.cluster, c.train_members, c.test_routed, c.test_correct, join(c.fallback_labels));
        }
        out << to_string(m) << " accuracy " << format_double(res.accuracy) << " mfh " << format_double(res.mfh) << '\n';
        if (!clustering) clustering = std::move(res.clustering);
      }
      {
        ReportWriter w(dir / "assignments.csv", "decompose", cfg);
        w.row("example_id", "cluster");
        for (std::size_t i = 0; i < clustering->ids.size(); ++i) w.row(clustering->ids[i], clustering->assignments[i]);
      }
      if (!reference_path.empty()) {
        const auto jm = jaccard_overlap(*clustering, load_reference_groups(reference_path));
        auto jcfg = cfg;
        jcfg.emplace_back("reference", reference_path);
        ReportWriter w(dir / "jaccard.csv", "decompose", jcfg);
        std::vector<std::string> header{"cluster"};
        header.insert(header.end(), jm.col_names.begin(), jm.col_names.end());
        w.row(header);
        for (std::size_t i = 0; i < jm.row_names.size(); ++i) {
          std::vector<std::string> row{jm.row_names[i]};
          for (double v : jm.values[i]) row.push_back(format_double(v));
          w.row(row);
        }
      }
      return exit_ok;
    }

    if (synth_cmd->parsed()) {
      const auto dir = output_dir(common);
      const std::filesystem::path path = syn_output;
      ConfigEntries cfg{{"kind", kind}, {"seed", std::to_string(syn.seed)}, {"dim", std::to_string(syn.dim)},
                        {"train_per_label", std::to_string(syn.train_per_label)},
                        {"test_per_label", std::to_string(syn.test_per_label)}, {"overlap", format_double(syn.overlap)},
                        {"output", syn_output}};
      FeatureDataset ds;
      if (kind == "shift") {
        cfg.emplace_back("labels", std::to_string(syn.n_labels));
        cfg.emplace_back("shift", format_double(syn.test_shift));
        ds = generate_synthetic(syn, path.stem().string());
        write_feature_dataset(path, ds);
      } else {
        modes.train_per_cell = syn.train_per_label;
        modes.test_per_cell = syn.test_per_label;
        modes.dim = syn.dim;
        modes.noise = syn.overlap;
        modes.seed = syn.seed;
        cfg.emplace_back("separation", format_double(modes.separation));
        auto md = generate_conflicting_modes(modes, path.stem().string());
        ds = std::move(md.dataset);
        write_feature_dataset(path, ds);
        auto groups_path = path;
        groups_path.replace_filename(path.stem().string() + "_modes.csv");
        ReportWriter w(groups_path, "synth", cfg);
        w.row("example_id", "group");
        for (const auto& ex : ds.examples) w.row(ex.id, md.mode_of.at(ex.id));
      }
      ReportWriter w(dir / "synth.csv", "synth", cfg);
      w.row("dataset", "examples", "dim", "labels");
      w.row(ds.name, ds.examples.size(), ds.dim, ds.labels.size());
      out << "wrote " << ds.examples.size() << " records to " << path.string() << '\n';
      return exit_ok;
    }

    if (time_cmd->parsed()) {
      const auto dir = output_dir(common);
      if (common.data.size() != 1) fail_validation("time takes exactly one --data file");
      const auto ds = load_feature_dataset(common.data.front());
      const auto probe = time_probe.resolve(common.seed);
      auto cfg = base_entries(common);
      add_probe_entries(cfg, probe);
      cfg.emplace_back("metrics", join(time_metrics, ','));
      std::vector<TimingRecord> records;
      for (const auto& metric : time_metrics) {
        if (metric == "spread") {
          records.push_back(time_metric("spread", ds.name, [&] {
            spread(ds, sample_few_shot(ds, common.shots, common.seed));
          }));
        } else {
          records.push_back(time_metric("rda", ds.name, [&] {
            rda_score(ds, default_schedule(common.shots), probe, common.seed);
          }));
        }
      }
      ReportWriter w(dir / "timing.csv", "time", cfg, {"wall-clock values vary between runs; dataset load excluded"});
      w.row("metric", "dataset", "wall_seconds", "hardware");
      for (const auto& r : records) {
        w.row(r.metric, r.dataset, r.wall_seconds, r.hardware);
        out << r.metric << ' ' << format_double(r.wall_seconds) << " s\n";
      }
      if (records.size() == 2) {
        const double ratio = records[1].wall_seconds / records[0].wall_seconds;
        w.row("ratio:" + records[1].metric + "/" + records[0].metric, ds.name, ratio, records[0].hardware);
        out << "ratio " << records[1].metric << '/' << records[0].metric << ' ' << format_double(ratio) << '\n';
      }
      return exit_ok;
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.kind() == ErrorKind::validation ? exit_validation : exit_computation;
  } catch (const std::exception& e) {
    err << "error[computation]: " << e.what() << '\n';
    return exit_computation;
  }
  return exit_usage;
}

}  // namespace fsh::cli
