#include "flowinfer/chain_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "flowinfer/errors.hpp"

namespace flowinfer {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::string samples_csv(const ChainRecord& record) {
  std::string out = "step";
  const Eigen::Index d = record.samples.empty() ? 0 : record.samples.front().size();
  for (Eigen::Index i = 0; i < d; ++i) out += ",c" + std::to_string(i);
  out += '\n';
  for (std::size_t r = 0; r < record.samples.size(); ++r) {
    out += std::to_string((r + 1) * static_cast<std::size_t>(record.thin));
    for (double v : record.samples[r]) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string trace_csv(const ChainRecord& record) {
  std::string out = "step,phi,accept\n";
  for (std::size_t i = 0; i < record.phis.size(); ++i) {
    out += std::to_string(i + 1) + ',' + format_double(record.phis[i]) + ',' + std::to_string(record.accepts[i]) + '\n';
  }
  return out;
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::string* header) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw IoError("malformed number in " + path.string());
      row.push_back(v);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw IoError("malformed row in " + path.string());
      ++p;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<Eigen::VectorXd> read_samples_csv(const fs::path& path, std::vector<int>* steps) {
  std::vector<Eigen::VectorXd> out;
  if (steps) steps->clear();
  for (const auto& row : read_numeric_csv(path, nullptr)) {
    if (row.size() < 2) throw IoError("sample row without components in " + path.string());
    if (steps) steps->push_back(static_cast<int>(row[0]));
    out.push_back(Eigen::Map<const Eigen::VectorXd>(row.data() + 1, static_cast<Eigen::Index>(row.size() - 1)));
  }
  return out;
}

std::vector<TraceRow> read_trace_csv(const fs::path& path) {
  std::vector<TraceRow> out;
  for (const auto& row : read_numeric_csv(path, nullptr)) {
    if (row.size() != 3) throw IoError("trace rows need 3 columns in " + path.string());
    out.push_back({static_cast<int>(row[0]), row[1], static_cast<int>(row[2])});
  }
  return out;
}

namespace {

json counters_json(const SolveCounters& c) {
  return {{"forward", c.forward}, {"adjoint", c.adjoint}, {"failures", c.failures}};
}

SolveCounters counters_from_json(const json& j) {
  return {j.at("forward").get<long long>(), j.at("adjoint").get<long long>(), j.at("failures").get<long long>()};
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json chain_manifest(const ChainRecord& record) {
  return json{{"seed", record.seed},
              {"kernel", record.params.to_json()},
              {"steps", record.steps_done},
              {"thin", record.thin},
              {"samples", record.samples.size()},
              {"acceptance_rate", record.acceptance_rate()},
              {"solves", counters_json(record.counters)},
              {"initial_solves", counters_json(record.init_counters)},
              {"wall_seconds", record.wall_seconds}};
}

json checkpoint_to_json(const ChainCheckpoint& cp) {
  const ChainRecord& r = cp.record;
  json samples = json::array();
  for (const Eigen::VectorXd& q : r.samples) samples.push_back(vec_json(q));
  json state{{"q", vec_json(cp.state.q)}, {"phi", cp.state.phi}};
  if (cp.state.grad) state["grad"] = vec_json(*cp.state.grad);
  return json{{"seed", r.seed},
              {"kernel", r.params.to_json()},
              {"thin", r.thin},
              {"steps_done", r.steps_done},
              {"solves", counters_json(r.counters)},
              {"initial_solves", counters_json(r.init_counters)},
              {"wall_seconds", r.wall_seconds},
              {"phis", r.phis},
              {"accepts", r.accepts},
              {"samples", samples},
              {"state", state},
              {"rng", cp.rng.serialize()}};
}

ChainCheckpoint checkpoint_from_json(const json& j) {
  try {
    ChainCheckpoint cp;
    ChainRecord& r = cp.record;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.params = KernelParams::from_json(j.at("kernel"));
    r.thin = j.at("thin").get<int>();
    r.steps_done = j.at("steps_done").get<int>();
    r.counters = counters_from_json(j.at("solves"));
    r.init_counters = counters_from_json(j.at("initial_solves"));
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.phis = j.at("phis").get<std::vector<double>>();
    r.accepts = j.at("accepts").get<std::vector<std::uint8_t>>();
    for (const json& q : j.at("samples")) r.samples.push_back(vec_from_json(q));
    const json& s = j.at("state");
    cp.state.q = vec_from_json(s.at("q"));
    cp.state.phi = s.at("phi").get<double>();
    if (s.contains("grad")) cp.state.grad = vec_from_json(s.at("grad"));
    cp.rng = Rng::deserialize(j.at("rng").get<std::string>());
    return cp;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::string data_csv(const ObservationSpec& spec, const Eigen::VectorXd& y) {
  if (static_cast<std::size_t>(y.size()) != spec.size()) throw IndexMismatch("data length does not match spec");
  std::string out = "t,x,y,value\n";
  for (std::size_t j = 0; j < spec.size(); ++j) {
    out += format_double(spec[j].t) + ',' + format_double(spec[j].x[0]) + ',' + format_double(spec[j].x[1]) + ',' +
           format_double(y[static_cast<Eigen::Index>(j)]) + '\n';
  }
  return out;
}

DataSet read_data_csv(const fs::path& path) {
  DataSet d;
  const auto rows = read_numeric_csv(path, nullptr);
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != 4) throw IoError("data rows need 4 columns in " + path.string());
    d.spec.push_back({rows[j][0], {rows[j][1], rows[j][2]}});
    d.y[static_cast<Eigen::Index>(j)] = rows[j][3];
  }
  return d;
}

}  // namespace flowinfer
