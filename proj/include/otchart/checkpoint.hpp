#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "otchart/coordinate_model.hpp"
#include "otchart/csv.hpp"
#include "otchart/koopman.hpp"

namespace otchart {

namespace detail {
inline nlohmann::json to_json_array(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}
inline Eigen::VectorXd from_json_array(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}
}  // namespace detail

inline nlohmann::json model_to_json(const CoordinateModel& model) {
  const auto& arch = model.architecture();
  return {
      {"format", "otchart-coordinate-model"},
      {"version", 1},
      {"architecture",
       {{"input_dim", arch.input_dim},
        {"output_dim", arch.output_dim},
        {"hidden_width", arch.hidden_width},
        {"activation", arch.activation},
        {"layout", arch.linear() ? "W[M,N] col-major, b[M]" : "W1[H,N] col-major, b1[H], W2[M,H] col-major, b2[M]"}}},
      {"standardization",
       {{"mean", detail::to_json_array(model.standardization().mean)},
        {"scale", detail::to_json_array(model.standardization().scale)}}},
      {"parameters", detail::to_json_array(model.parameters())},
  };
}

inline CoordinateModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "otchart-coordinate-model")
      throw Error(ErrorCode::ParseFailure, "not a coordinate model checkpoint");
    const auto& a = j.at("architecture");
    Architecture arch{a.at("input_dim").get<Eigen::Index>(), a.at("output_dim").get<Eigen::Index>(),
                      a.at("hidden_width").get<Eigen::Index>(), a.at("activation").get<std::string>()};
    Standardization s{detail::from_json_array(j.at("standardization").at("mean")),
                      detail::from_json_array(j.at("standardization").at("scale"))};
    return CoordinateModel(arch, std::move(s), detail::from_json_array(j.at("parameters")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("checkpoint: ") + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
  }
}

inline void save_model(const CoordinateModel& model, const std::filesystem::path& path) {
  write_json(model_to_json(model), path);
}

inline CoordinateModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

/// anchor, neighbor, alpha_1..alpha_M
inline void write_alphas_csv(const TangentRows& rows, const AlphaTable& alphas, const std::filesystem::path& path) {
  csv::Writer out(path);
  out.cell("anchor").cell("neighbor");
  for (Eigen::Index m = 1; m <= alphas.cols(); ++m) out.cell("alpha_" + std::to_string(m));
  out.end_row();
  for (Eigen::Index r = 0; r < alphas.rows(); ++r) {
    out.cell(rows.anchor[static_cast<std::size_t>(r)]).cell(rows.neighbor[static_cast<std::size_t>(r)]);
    for (Eigen::Index m = 0; m < alphas.cols(); ++m) out.cell(alphas(r, m));
    out.end_row();
  }
  out.close();
}

}  // namespace otchart
