#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "otchart/checkpoint.hpp"
#include "otchart/dataset_io.hpp"
#include "otchart/id_estimator.hpp"
#include "otchart/koopman.hpp"
#include "otchart/tangent.hpp"
#include "otchart/transport.hpp"

namespace otchart {

// ---------------------------------------------------------------------------
// Configuration

/// Arithmetic sequence written as "first:last:step" or an explicit "a,b,c" list.
struct RangeSpec {
  std::vector<double> values;

  static RangeSpec parse(std::string_view text) {
    RangeSpec r;
    text = trim(text);
    if (text.find(':') != std::string_view::npos) {
      std::vector<double> parts;
      std::size_t start = 0;
      while (true) {
        const auto colon = text.find(':', start);
        parts.push_back(parse_double(text.substr(start, colon == std::string_view::npos ? colon : colon - start)));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
      }
      if (parts.size() != 3) throw Error(ErrorCode::InvalidConfig, "range must be first:last:step");
      r.values = arithmetic_range(parts[0], parts[1], parts[2]);
    } else {
      for (const auto& cell : csv::split(text)) r.values.push_back(parse_double(cell));
    }
    if (r.values.empty()) throw Error(ErrorCode::InvalidConfig, "empty range '" + std::string(text) + "'");
    return r;
  }
};

struct PipelineConfig {
  // dataset: either an input matrix or the Gaussian generator
  std::optional<std::filesystem::path> input;
  MatrixLayout layout = MatrixLayout::GridHeader;
  std::optional<std::filesystem::path> grid_file;
  std::string means = "350:650:50";
  std::string sigmas = "20:100:20";
  std::string grid = "0:1000:1";
  double max_clamped_fraction = 0.01;

  int k = 6;
  Metric metric = Metric::Wasserstein2;
  double ot_tolerance = 5e-2;
  PlanOrientation orientation = PlanOrientation::NeighborSource;

  double rel_tol = 0.05;
  Aggregation aggregation = Aggregation::Mode;

  std::optional<int> m;  // overrides the estimated global ID
  ModelConfig model;
  OptimizerConfig optimizer;

  std::filesystem::path out = "otchart-out";
  std::uint64_t seed = 0;

  /// Applies one documented key. Unknown keys are rejected.
  void set(std::string_view key, std::string_view value) {
    const std::string v(trim(value));
    auto as_int = [&] { return static_cast<int>(parse_int(v)); };
    if (key == "input") input = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
    else if (key == "layout") {
      if (v == "grid-header") layout = MatrixLayout::GridHeader;
      else if (v == "separate-grid") layout = MatrixLayout::SeparateGrid;
      else throw Error(ErrorCode::InvalidConfig, "layout must be grid-header or separate-grid");
    }
    else if (key == "grid_file") grid_file = v.empty() ? std::nullopt : std::optional<std::filesystem::path>(v);
    else if (key == "means") means = v;
    else if (key == "sigmas") sigmas = v;
    else if (key == "grid") grid = v;
    else if (key == "max_clamped_fraction") max_clamped_fraction = parse_double(v);
    else if (key == "k") k = as_int();
    else if (key == "metric") metric = parse_metric(v);
    else if (key == "ot_tolerance") ot_tolerance = parse_double(v);
    else if (key == "plan_orientation") orientation = parse_orientation(v);
    else if (key == "rel_tol") rel_tol = parse_double(v);
    else if (key == "aggregate") aggregation = parse_aggregation(v);
    else if (key == "m") m = v.empty() || v == "auto" ? std::nullopt : std::optional<int>(as_int());
    else if (key == "hidden_width") model.hidden_width = as_int();
    else if (key == "scale_floor") model.scale_floor = parse_double(v);
    else if (key == "steps") optimizer.steps = as_int();
    else if (key == "step_size") optimizer.step_size = parse_double(v);
    else if (key == "final_step_fraction") optimizer.final_step_fraction = parse_double(v);
    else if (key == "barrier_beta") optimizer.beta = parse_double(v);
    else if (key == "barrier_eps") optimizer.eps = parse_double(v);
    else if (key == "barrier_decay") optimizer.beta_decay = parse_double(v);
    else if (key == "barrier_interval") optimizer.beta_interval = as_int();
    else if (key == "alpha_update") optimizer.alpha_update = parse_alpha_update(v);
    else if (key == "out") out = v;
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(v));
    else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  }

  /// Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto body = std::string_view(line);
      if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
      body = trim(body);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
      set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    }
  }

  void validate() const {
    if (input && !std::filesystem::exists(*input))
      throw Error(ErrorCode::InvalidConfig, "input " + input->string() + " does not exist");
    if (grid_file && !std::filesystem::exists(*grid_file))
      throw Error(ErrorCode::InvalidConfig, "grid file " + grid_file->string() + " does not exist");
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
    if (!(ot_tolerance > 0.0)) throw Error(ErrorCode::InvalidConfig, "ot_tolerance must be positive");
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw Error(ErrorCode::InvalidConfig, "rel_tol must lie in (0, 1)");
    if (m && *m < 1) throw Error(ErrorCode::InvalidConfig, "m must be at least 1");
    if (model.hidden_width < 0 || !(model.scale_floor >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "model settings out of range");
    if (!(max_clamped_fraction >= 0.0 && max_clamped_fraction < 1.0))
      throw Error(ErrorCode::InvalidConfig, "max_clamped_fraction must lie in [0, 1)");
    detail::check_config(optimizer);
  }
};

// ---------------------------------------------------------------------------
// Stages and artifacts

enum class Stage { Generate = 0, Transport = 1, Tangents = 2, Id = 3, Coords = 4 };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::Generate: return "generate";
    case Stage::Transport: return "transport";
    case Stage::Tangents: return "tangents";
    case Stage::Id: return "id";
    case Stage::Coords: return "coords";
  }
  return "generate";
}
inline Stage parse_stage(std::string_view s) {
  for (int i = 0; i <= 4; ++i)
    if (to_string(static_cast<Stage>(i)) == s) return static_cast<Stage>(i);
  throw Error(ErrorCode::InvalidConfig, "unknown stage '" + std::string(s) + "'");
}

/// Error raised inside a stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), "stage " + to_string(stage) + ": " + cause.message()), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

/// File names under the output directory.
struct Artifacts {
  std::filesystem::path root;

  std::filesystem::path dataset() const { return root / "dataset.csv"; }
  std::filesystem::path neighbors() const { return root / "neighbors.csv"; }
  std::filesystem::path plan_dir() const { return root / "plans"; }
  std::filesystem::path plan_index() const { return plan_dir() / "index.csv"; }
  std::filesystem::path plan_file(std::size_t s, std::size_t t) const {
    return plan_dir() / ("plan_" + std::to_string(s) + "_" + std::to_string(t) + ".csv");
  }
  std::filesystem::path bundles() const { return root / "bundles.csv"; }
  std::filesystem::path spectrum() const { return root / "spectrum.csv"; }
  std::filesystem::path id() const { return root / "id.json"; }
  std::filesystem::path checkpoint() const { return root / "checkpoint.json"; }
  std::filesystem::path alphas() const { return root / "alphas.csv"; }
  std::filesystem::path embedding() const { return root / "embedding.csv"; }
  std::filesystem::path fit() const { return root / "fit.json"; }
  std::filesystem::path report() const { return root / "report.json"; }
  std::filesystem::path plot_dir() const { return root / "plot"; }
};

inline void require_artifact(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingArtifact, p.string() + " not found");
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent seed per stage derived from the run seed.
inline std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stage) + 1));
}

// --- neighbor graph and plan persistence -----------------------------------

inline void write_graph_csv(const NeighborGraph& g, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.cell("anchor").cell("rank").cell("neighbor").cell("distance").end_row();
  for (std::size_t a = 0; a < g.edges.size(); ++a)
    for (std::size_t r = 0; r < g.edges[a].size(); ++r)
      out.cell(a).cell(r).cell(g.edges[a][r]).cell(g.distances[a][r]).end_row();
  out.close();
}

inline NeighborGraph read_graph_csv(const std::filesystem::path& path, Metric metric) {
  NeighborGraph g;
  g.metric = metric;
  const auto rows = csv::read(path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw Error(ErrorCode::RaggedRows, path.string() + ": expected 4 columns");
    const auto a = static_cast<std::size_t>(parse_int(rows[i][0]));
    if (a >= g.edges.size()) {
      g.edges.resize(a + 1);
      g.distances.resize(a + 1);
    }
    g.edges[a].push_back(static_cast<std::size_t>(parse_int(rows[i][2])));
    g.distances[a].push_back(parse_double(rows[i][3]));
  }
  g.k = g.edges.empty() ? 0 : static_cast<int>(g.edges.front().size());
  return g;
}

inline void write_plans(const std::vector<TransportPlan>& plans, const Artifacts& art) {
  std::filesystem::create_directories(art.plan_dir());
  csv::Writer index(art.plan_index());
  index.cell("source").cell("target").cell("cost").cell("residual").cell("support_begin").cell("support_end")
      .cell("file").end_row();
  for (const auto& p : plans) {
    const auto file = art.plan_file(p.source_index, p.target_index);
    write_plan_csv(p, file);
    index.cell(p.source_index).cell(p.target_index).cell(p.cost).cell(p.residual)
        .cell(static_cast<long long>(p.support_begin)).cell(static_cast<long long>(p.support_end))
        .cell(file.filename().string()).end_row();
  }
  index.close();
}

inline PlanSet read_plans(const Artifacts& art, const GridPtr& grid) {
  require_artifact(art.plan_index());
  std::vector<TransportPlan> plans;
  const auto index = csv::read(art.plan_index());
  for (std::size_t i = 1; i < index.size(); ++i) {
    const auto& row = index[i];
    if (row.size() != 7) throw Error(ErrorCode::RaggedRows, art.plan_index().string() + ": expected 7 columns");
    TransportPlan p;
    p.source_index = static_cast<std::size_t>(parse_int(row[0]));
    p.target_index = static_cast<std::size_t>(parse_int(row[1]));
    p.cost = parse_double(row[2]);
    p.residual = parse_double(row[3]);
    p.support_begin = parse_int(row[4]);
    p.support_end = parse_int(row[5]);
    p.grid = grid;
    const auto body = csv::read(art.plan_dir() / row[6]);
    if (static_cast<Eigen::Index>(body.size()) != grid->size() + 1)
      throw Error(ErrorCode::GridMismatch, row[6] + " does not match the dataset grid");
    p.map.resize(grid->size());
    p.derivative.resize(grid->size());
    for (Eigen::Index j = 0; j < grid->size(); ++j) {
      const auto& cells = body[static_cast<std::size_t>(j) + 1];
      if (cells.size() != 3) throw Error(ErrorCode::RaggedRows, row[6] + ": expected 3 columns");
      p.map[j] = parse_double(cells[1]);
      p.derivative[j] = parse_double(cells[2]);
    }
    plans.push_back(std::move(p));
  }
  return make_plan_set(std::move(plans));
}

// --- reports ---------------------------------------------------------------

namespace detail {
inline nlohmann::json number_or_text(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}
inline double number_from(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

inline nlohmann::json to_json(const IdEstimate& est) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : est.per_point)
    per.push_back({{"anchor", r.anchor_index},
                   {"singular_values", r.singular_values},
                   {"local_id", r.local_id},
                   {"gap_ratio", detail::number_or_text(r.gap_ratio)}});
  return {{"global_id", est.global_id}, {"aggregation", to_string(est.aggregation)}, {"per_point", per}};
}

inline IdEstimate id_estimate_from_json(const nlohmann::json& j) {
  IdEstimate est;
  est.global_id = j.at("global_id").get<int>();
  est.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
  for (const auto& r : j.at("per_point")) {
    SpectrumReport rep;
    rep.anchor_index = r.at("anchor").get<std::size_t>();
    rep.singular_values = r.at("singular_values").get<std::vector<double>>();
    rep.local_id = r.at("local_id").get<int>();
    rep.gap_ratio = detail::number_from(r.at("gap_ratio"));
    est.per_point.push_back(std::move(rep));
  }
  return est;
}

inline nlohmann::json to_json(const FitReport& r) {
  return {{"objective", to_string(r.objective)},
          {"loss_history", r.loss_history},
          {"barrier_weights", r.barrier_weights},
          {"best_step", r.best_step},
          {"final_residual", r.final_residual},
          {"min_jacobian_sv", detail::number_or_text(r.min_jacobian_sv)},
          {"success", r.success},
          {"warnings", r.warnings}};
}

inline FitReport fit_report_from_json(const nlohmann::json& j) {
  FitReport r;
  r.objective = j.at("objective") == "unit_velocity" ? Objective::UnitVelocity : Objective::Coordinates;
  r.loss_history = j.at("loss_history").get<std::vector<double>>();
  r.barrier_weights = j.at("barrier_weights").get<std::vector<double>>();
  r.best_step = j.at("best_step").get<int>();
  r.final_residual = j.at("final_residual").get<double>();
  r.min_jacobian_sv = detail::number_from(j.at("min_jacobian_sv"));
  r.success = j.at("success").get<bool>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  double best = std::numeric_limits<double>::infinity();
  for (double v : r.loss_history) r.best_history.push_back(best = std::min(best, v));
  return r;
}

struct PipelineReport {
  std::optional<IdEstimate> id_estimate;
  std::optional<FitReport> fit;
  std::string embedding_path;
  std::map<std::string, double> stage_seconds;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["id_estimate"] = id_estimate ? otchart::to_json(*id_estimate) : nlohmann::json(nullptr);
    j["fit"] = fit ? otchart::to_json(*fit) : nlohmann::json(nullptr);
    j["embedding_path"] = embedding_path;
    j["stage_seconds"] = stage_seconds;
    return j;
  }

  static PipelineReport from_json(const nlohmann::json& j) {
    PipelineReport r;
    try {
      if (!j.at("id_estimate").is_null()) r.id_estimate = id_estimate_from_json(j.at("id_estimate"));
      if (!j.at("fit").is_null()) r.fit = fit_report_from_json(j.at("fit"));
      r.embedding_path = j.at("embedding_path").get<std::string>();
      r.stage_seconds = j.at("stage_seconds").get<std::map<std::string, double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseFailure, std::string("report: ") + e.what());
    }
    return r;
  }
};

// ---------------------------------------------------------------------------
// Stage runners. Each reads its inputs from the output directory, so any
// stage can be rerun on its own once the earlier artifacts exist.

inline DataSet load_stage_dataset(const Artifacts& art, const PipelineConfig& config) {
  require_artifact(art.dataset());
  return load_matrix(art.dataset(), MatrixLayout::GridHeader, std::nullopt, {config.max_clamped_fraction});
}

inline void run_generate(const PipelineConfig& config) {
  const Artifacts art{config.out};
  std::filesystem::create_directories(art.root);
  DataSet ds;
  if (config.input) {
    ds = load_matrix(*config.input, config.layout, config.grid_file, {config.max_clamped_fraction});
  } else {
    const auto g = RangeSpec::parse(config.grid).values;
    if (g.size() < 2) throw Error(ErrorCode::InvalidConfig, "grid needs at least two nodes");
    const auto grid = Grid::uniform(g.front(), g.back(), g[1] - g[0]);
    ds = gaussian_family(RangeSpec::parse(config.means).values, RangeSpec::parse(config.sigmas).values, grid);
  }
  save_matrix(ds, art.dataset());
}

inline void run_transport(const PipelineConfig& config) {
  const Artifacts art{config.out};
  const DataSet ds = load_stage_dataset(art, config);
  TransportOptions options;
  options.residual_tolerance = config.ot_tolerance;
  const NeighborGraph graph = build_graph(ds, config.k, config.metric, options);
  write_graph_csv(graph, art.neighbors());
  const auto plans = pairwise_plans(ds, edge_pairs(graph, config.orientation), options);
  write_plans(plans, art);
  for (const auto& p : plans)
    if (p.residual > options.residual_tolerance)
      throw Error(ErrorCode::PushForwardResidual, "plan (" + std::to_string(p.source_index) + "," +
                                                      std::to_string(p.target_index) + ") residual " +
                                                      format_double(p.residual) + " exceeds " +
                                                      format_double(options.residual_tolerance));
}

inline void run_tangents(const PipelineConfig& config) {
  const Artifacts art{config.out};
  const DataSet ds = load_stage_dataset(art, config);
  require_artifact(art.neighbors());
  const NeighborGraph graph = read_graph_csv(art.neighbors(), config.metric);
  if (graph.edges.size() != ds.size())
    throw Error(ErrorCode::DimensionMismatch, "neighbor graph does not match the dataset");
  const PlanSet plans = read_plans(art, ds.grid);
  write_bundles_csv(all_bundles(ds, graph, plans, {config.orientation}), art.bundles());
}

inline IdEstimate run_id(const PipelineConfig& config) {
  const Artifacts art{config.out};
  require_artifact(art.bundles());
  const auto est = estimate_id(read_bundles_csv(art.bundles()), config.rel_tol, config.aggregation);
  write_spectrum_csv(est.per_point, art.spectrum());
  write_json(to_json(est), art.id());
  return est;
}

inline void write_embedding_csv(const std::vector<Eigen::VectorXd>& points, const DataSet& ds,
                                const std::filesystem::path& path) {
  std::vector<std::string> keys;
  for (const auto& s : ds.samples)
    for (const auto& [k, v] : s.label)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  csv::Writer out(path);
  out.cell("sample_index");
  const Eigen::Index m = points.empty() ? 0 : points.front().size();
  for (Eigen::Index j = 1; j <= m; ++j) out.cell("phi_" + std::to_string(j));
  for (const auto& k : keys) out.cell(k);
  out.end_row();
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.cell(i).cells(points[i]);
    for (const auto& k : keys) {
      const auto it = ds.samples[i].label.find(k);
      out.cell(it == ds.samples[i].label.end() ? std::string_view{} : std::string_view{it->second});
    }
    out.end_row();
  }
  out.close();
}

inline FitReport run_coords(const PipelineConfig& config) {
  const Artifacts art{config.out};
  const DataSet ds = load_stage_dataset(art, config);
  require_artifact(art.bundles());
  const auto bundles = read_bundles_csv(art.bundles());
  int m = 0;
  if (config.m) {
    m = *config.m;
  } else {
    require_artifact(art.id());
    m = read_json(art.id()).at("global_id").get<int>();
  }
  if (m < 1) throw Error(ErrorCode::DimensionMismatch, "estimated intrinsic dimension is 0; set m explicitly");

  ModelConfig model = config.model;
  model.output_dim = m;
  OptimizerConfig opt = config.optimizer;
  opt.seed = stage_seed(config.seed, Stage::Coords);
  const auto result = optimize_coordinates(ds, bundles, model, opt);

  save_model(result.model, art.checkpoint());
  write_alphas_csv(TangentRows::from_bundles(bundles), result.alphas, art.alphas());
  write_embedding_csv(embed(result.model, ds), ds, art.embedding());
  write_json(to_json(result.report), art.fit());
  if (!result.report.success)
    throw Error(ErrorCode::SingularJacobian, "fitted Jacobian is rank deficient at a data point (min singular value " +
                                                 format_double(result.report.min_jacobian_sv) + ")");
  return result.report;
}

/// Runs one stage, tagging any failure with the stage name.
template <typename Fn>
auto run_stage(Stage stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(stage, Error(ErrorCode::IoFailure, e.what()));
  }
}

/// dataset -> transport -> tangents -> ID -> coordinates -> embedding.
inline PipelineReport run_pipeline(const PipelineConfig& config, Stage from = Stage::Generate) {
  config.validate();
  const Artifacts art{config.out};
  std::filesystem::create_directories(art.root);
  PipelineReport report;
  auto timed = [&](Stage stage, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    run_stage(stage, fn);
    report.stage_seconds[to_string(stage)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  if (from <= Stage::Generate) timed(Stage::Generate, [&] { run_generate(config); });
  if (from <= Stage::Transport) timed(Stage::Transport, [&] { run_transport(config); });
  if (from <= Stage::Tangents) timed(Stage::Tangents, [&] { run_tangents(config); });
  if (from <= Stage::Id) {
    timed(Stage::Id, [&] { report.id_estimate = run_id(config); });
  } else if (std::filesystem::exists(art.id())) {
    report.id_estimate = id_estimate_from_json(read_json(art.id()));
  }
  timed(Stage::Coords, [&] { report.fit = run_coords(config); });
  report.embedding_path = art.embedding().string();
  write_json(report.to_json(), art.report());
  return report;
}

// ---------------------------------------------------------------------------
// Plot data

enum class PlotKind { Dataset, Spectrum, Embedding };

inline PlotKind parse_plot_kind(std::string_view s) {
  if (s == "dataset") return PlotKind::Dataset;
  if (s == "spectrum") return PlotKind::Spectrum;
  if (s == "embedding") return PlotKind::Embedding;
  throw Error(ErrorCode::InvalidConfig, "plot data must be dataset, spectrum or embedding");
}

/// Writes plain-text columns for external plotting tools; returns the file written.
inline std::filesystem::path emit_plot_data(const std::filesystem::path& out_dir, PlotKind kind) {
  const Artifacts art{out_dir};
  std::filesystem::create_directories(art.plot_dir());
  switch (kind) {
    case PlotKind::Dataset: {
      require_artifact(art.dataset());
      const auto ds = load_matrix(art.dataset());
      const auto path = art.plot_dir() / "dataset.csv";
      csv::Writer out(path);
      out.cell("series").cell("x").cell("y").end_row();
      const auto& x = ds.grid->nodes();
      for (std::size_t i = 0; i < ds.size(); ++i)
        for (Eigen::Index j = 0; j < x.size(); ++j) out.cell(i).cell(x[j]).cell(ds.samples[i].values[j]).end_row();
      out.close();
      return path;
    }
    case PlotKind::Spectrum: {
      require_artifact(art.spectrum());
      const auto rows = csv::read(art.spectrum());
      const auto path = art.plot_dir() / "spectrum.csv";
      csv::Writer out(path);
      out.cell("anchor");
      for (std::size_t c = 1; c + 1 < rows.front().size(); ++c) out.cell("ratio_" + std::to_string(c));
      out.end_row();
      for (std::size_t r = 1; r < rows.size(); ++r) {
        out.cell(rows[r][0]);
        const double lead = parse_double(rows[r][1]);
        for (std::size_t c = 1; c + 1 < rows[r].size(); ++c)
          out.cell(lead > 0.0 ? parse_double(rows[r][c]) / lead : 0.0);
        out.end_row();
      }
      out.close();
      return path;
    }
    case PlotKind::Embedding: {
      require_artifact(art.embedding());
      const auto rows = csv::read(art.embedding());
      const auto& header = rows.front();
      std::vector<std::size_t> coord_cols, label_cols;
      for (std::size_t c = 1; c < header.size(); ++c)
        (header[c].rfind("phi_", 0) == 0 ? coord_cols : label_cols).push_back(c);
      const auto path = art.plot_dir() / "embedding.csv";
      csv::Writer out(path);
      for (auto c : coord_cols) out.cell(header[c]);
      out.cell("label").end_row();
      for (std::size_t r = 1; r < rows.size(); ++r) {
        for (auto c : coord_cols) out.cell(rows[r][c]);
        std::string label;
        for (auto c : label_cols) label += (label.empty() ? "" : ";") + header[c] + "=" + rows[r][c];
        out.cell(label.empty() ? rows[r][0] : label).end_row();
      }
      out.close();
      return path;
    }
  }
  return {};
}

}  // namespace otchart
