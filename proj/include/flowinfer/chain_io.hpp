#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "flowinfer/samplers.hpp"
#include "json.hpp"

namespace flowinfer {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// Writes via a temporary file and rename, so readers never see a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Header `step,c0,c1,...`; one row per recorded (thinned) sample.
std::string samples_csv(const ChainRecord& record);
/// Header `step,phi,accept`; one row per step.
std::string trace_csv(const ChainRecord& record);

struct TraceRow {
  int step = 0;
  double phi = 0.0;
  int accept = 0;
};

/// Optionally returns the step column through `steps`.
std::vector<Eigen::VectorXd> read_samples_csv(const std::filesystem::path& path, std::vector<int>* steps = nullptr);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Chain summary: seed, kernel, steps, acceptance, solve counters, wall time.
nlohmann::json chain_manifest(const ChainRecord& record);

nlohmann::json checkpoint_to_json(const ChainCheckpoint& cp);
ChainCheckpoint checkpoint_from_json(const nlohmann::json& j);

/// Observation data: header `t,x,y,value`.
std::string data_csv(const ObservationSpec& spec, const Eigen::VectorXd& y);
struct DataSet {
  ObservationSpec spec;
  Eigen::VectorXd y;
};
DataSet read_data_csv(const std::filesystem::path& path);

}  // namespace flowinfer
