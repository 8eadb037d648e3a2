// Command-line front end: one subcommand per pipeline stage plus the full
// pipeline and plot-data export. Exit codes: 0 success, 1 validation error,
// 2 numerical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "otchart/pipeline.hpp"

namespace {

using otchart::PipelineConfig;

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

/// Command-line values; only flags the user actually passed override the config file.
struct Overrides {
  std::string config_path, out, from_stage, input, layout, grid_file, means, sigmas, grid, metric, orientation,
      aggregate, alpha_update;
  std::optional<std::uint64_t> seed;
  std::optional<int> k, m, steps, hidden;
  std::optional<double> ot_tolerance, rel_tol, step_size, barrier_beta, barrier_eps;
  std::string plot_what;
};

void add_global(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "run seed");
  app.add_option("--from-stage", o.from_stage, "first stage to run (generate|transport|tangents|id|coords)");
}

void add_dataset(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--input", o.input, "CSV matrix (rows = samples) instead of the Gaussian generator");
  cmd.add_option("--layout", o.layout, "grid-header | separate-grid");
  cmd.add_option("--grid-file", o.grid_file, "grid nodes for the separate-grid layout");
  cmd.add_option("--means", o.means, "Gaussian means, first:last:step or a,b,c");
  cmd.add_option("--sigmas", o.sigmas, "Gaussian widths, first:last:step or a,b,c");
  cmd.add_option("--grid", o.grid, "grid first:last:step");
}

void add_transport(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--k", o.k, "neighbors per point");
  cmd.add_option("--metric", o.metric, "euclidean | wasserstein2");
  cmd.add_option("--ot-tolerance", o.ot_tolerance, "push-forward residual tolerance");
  cmd.add_option("--plan-orientation", o.orientation, "anchor-source | neighbor-source");
}

void add_id(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--rel-tol", o.rel_tol, "relative singular value threshold");
  cmd.add_option("--aggregate", o.aggregate, "mode | max | median");
}

void add_coords(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--m", o.m, "number of intrinsic coordinates (default: estimated ID)");
  cmd.add_option("--steps", o.steps, "optimizer steps");
  cmd.add_option("--step-size", o.step_size, "initial optimizer step size");
  cmd.add_option("--barrier-beta", o.barrier_beta, "initial barrier weight");
  cmd.add_option("--barrier-eps", o.barrier_eps, "barrier regularization");
  cmd.add_option("--hidden", o.hidden, "hidden layer width (0 = affine)");
  cmd.add_option("--alpha-update", o.alpha_update, "least-squares | gradient");
}

PipelineConfig build_config(const Overrides& o) {
  PipelineConfig c;
  if (!o.config_path.empty()) c.load_file(o.config_path);
  auto set = [&](const char* key, const std::string& v) {
    if (!v.empty()) c.set(key, v);
  };
  set("out", o.out);
  set("input", o.input);
  set("layout", o.layout);
  set("grid_file", o.grid_file);
  set("means", o.means);
  set("sigmas", o.sigmas);
  set("grid", o.grid);
  set("metric", o.metric);
  set("plan_orientation", o.orientation);
  set("aggregate", o.aggregate);
  set("alpha_update", o.alpha_update);
  if (o.seed) c.seed = *o.seed;
  if (o.k) c.k = *o.k;
  if (o.m) c.m = *o.m;
  if (o.steps) c.optimizer.steps = *o.steps;
  if (o.hidden) c.model.hidden_width = *o.hidden;
  if (o.ot_tolerance) c.ot_tolerance = *o.ot_tolerance;
  if (o.rel_tol) c.rel_tol = *o.rel_tol;
  if (o.step_size) c.optimizer.step_size = *o.step_size;
  if (o.barrier_beta) c.optimizer.beta = *o.barrier_beta;
  if (o.barrier_eps) c.optimizer.eps = *o.barrier_eps;
  c.validate();
  return c;
}

void print_id(const otchart::IdEstimate& est) {
  std::cout << "global intrinsic dimension: " << est.global_id << " (" << otchart::to_string(est.aggregation)
            << " of " << est.per_point.size() << " local estimates)\n";
}

void print_fit(const otchart::FitReport& fit) {
  std::cout << "coordinate fit: residual " << fit.final_residual << ", min Jacobian singular value "
            << fit.min_jacobian_sv << ", best step " << fit.best_step << "\n";
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic dimension and intrinsic coordinates from optimal-transport tangents"};
  app.require_subcommand(1);
  Overrides o;
  add_global(app, o);

  auto* generate = app.add_subcommand("generate", "write the dataset (generated or loaded) to <out>/dataset.csv");
  auto* transport = app.add_subcommand("transport", "build the neighbor graph and solve edge transport plans");
  auto* tangents = app.add_subcommand("tangents", "compute tangent bundles from the stored plans");
  auto* id = app.add_subcommand("id", "estimate local and global intrinsic dimension");
  auto* coords = app.add_subcommand("coords", "fit intrinsic coordinates and write the embedding");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage (optionally from --from-stage)");
  auto* plot = app.add_subcommand("plot-data", "export plot-ready columns");
  for (auto* cmd : {generate, transport, tangents, id, coords, pipeline, plot}) cmd->fallthrough();
  for (auto* cmd : {generate, pipeline}) add_dataset(*cmd, o);
  for (auto* cmd : {transport, pipeline}) add_transport(*cmd, o);
  add_transport(*tangents, o);
  for (auto* cmd : {id, coords, pipeline}) add_id(*cmd, o);
  for (auto* cmd : {coords, pipeline}) add_coords(*cmd, o);
  plot->add_option("what", o.plot_what, "dataset | spectrum | embedding")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const PipelineConfig config = build_config(o);
    if (plot->parsed()) {
      std::cout << otchart::emit_plot_data(config.out, otchart::parse_plot_kind(o.plot_what)).string() << "\n";
    } else if (pipeline->parsed()) {
      const auto from = o.from_stage.empty() ? otchart::Stage::Generate : otchart::parse_stage(o.from_stage);
      const auto report = otchart::run_pipeline(config, from);
      if (report.id_estimate) print_id(*report.id_estimate);
      if (report.fit) print_fit(*report.fit);
      std::cout << "embedding: " << report.embedding_path << "\n";
    } else {
      std::filesystem::create_directories(config.out);
      if (generate->parsed()) otchart::run_stage(otchart::Stage::Generate, [&] { otchart::run_generate(config); });
      if (transport->parsed()) otchart::run_stage(otchart::Stage::Transport, [&] { otchart::run_transport(config); });
      if (tangents->parsed()) otchart::run_stage(otchart::Stage::Tangents, [&] { otchart::run_tangents(config); });
      if (id->parsed()) print_id(otchart::run_stage(otchart::Stage::Id, [&] { return otchart::run_id(config); }));
      if (coords->parsed())
        print_fit(otchart::run_stage(otchart::Stage::Coords, [&] { return otchart::run_coords(config); }));
    }
  } catch (const otchart::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return otchart::is_numerical(e.code()) ? kExitNumerical : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return EXIT_SUCCESS;
}
