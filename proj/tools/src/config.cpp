#include "meanfield_cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "meanfield/error.hpp"

namespace meanfield::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw Error(ErrorCode::kConfig, "unknown key '" + item.key() + "' in " + where);
    }
  }
}

int positive_int(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0 || j.get<long long>() > 1'000'000'000) {
    throw Error(ErrorCode::kConfig, what + " must be a nonnegative integer");
  }
  return j.get<int>();
}

Vector vector_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kConfig, what + " must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kConfig, what + " entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

ModelSpec load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open model file " + path.string());
  try {
    return model_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, "model file " + path.string() + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  reject_unknown(j,
                 {"model", "model_file", "steps", "seed", "kinds", "resolution", "box", "ensemble_size",
                  "write_densities", "sweep", "output_dir"},
                 "config");
  ExperimentConfig c;
  try {
    if (j.contains("model") && j.contains("model_file")) {
      throw Error(ErrorCode::kConfig, "give either 'model' or 'model_file', not both");
    }
    if (j.contains("model")) c.model = model_from_json(j["model"]);
    if (j.contains("model_file")) {
      if (!j["model_file"].is_string()) throw Error(ErrorCode::kConfig, "'model_file' must be a string");
      std::filesystem::path p = j["model_file"].get<std::string>();
      c.model = load_model_file(p.is_absolute() ? p : base_dir / p);
    }
    if (j.contains("steps")) c.steps = positive_int(j["steps"], "'steps'");
    if (j.contains("seed")) {
      if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) throw Error(ErrorCode::kConfig, "'seed' must be an unsigned integer");
      c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("kinds")) {
      if (!j["kinds"].is_array() || j["kinds"].empty()) {
        throw Error(ErrorCode::kConfig, "'kinds' must be a non-empty array of names");
      }
      c.kinds.clear();
      for (const json& k : j["kinds"]) {
        if (!k.is_string()) throw Error(ErrorCode::kConfig, "'kinds' entries must be strings");
        c.kinds.push_back(filter_kind_from_string(k.get<std::string>()));
      }
    }
    if (j.contains("resolution")) {
      const json& r = j["resolution"];
      if (!r.is_object()) throw Error(ErrorCode::kConfig, "'resolution' must be an object");
      reject_unknown(r, {"state", "data"}, "resolution");
      if (r.contains("state")) c.grid.state_nodes = positive_int(r["state"], "'resolution.state'");
      if (r.contains("data")) c.grid.data_nodes = positive_int(r["data"], "'resolution.data'");
    }
    if (j.contains("box")) {
      const json& b = j["box"];
      if (!b.is_object()) throw Error(ErrorCode::kConfig, "'box' must be an object");
      reject_unknown(b, {"state_lo", "state_hi", "data_lo", "data_hi"}, "box");
      if (b.contains("state_lo")) c.grid.state_lo = vector_of(b["state_lo"], "'box.state_lo'");
      if (b.contains("state_hi")) c.grid.state_hi = vector_of(b["state_hi"], "'box.state_hi'");
      if (b.contains("data_lo")) c.grid.data_lo = vector_of(b["data_lo"], "'box.data_lo'");
      if (b.contains("data_hi")) c.grid.data_hi = vector_of(b["data_hi"], "'box.data_hi'");
    }
    if (j.contains("ensemble_size")) c.ensemble_size = positive_int(j["ensemble_size"], "'ensemble_size'");
    if (j.contains("write_densities")) {
      if (!j["write_densities"].is_boolean()) throw Error(ErrorCode::kConfig, "'write_densities' must be a boolean");
      c.write_densities = j["write_densities"].get<bool>();
    }
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      if (!s.is_object()) throw Error(ErrorCode::kConfig, "'sweep' must be an object");
      reject_unknown(s, {"family", "deltas", "scale"}, "sweep");
      if (s.contains("family")) {
        if (!s["family"].is_string()) throw Error(ErrorCode::kConfig, "'sweep.family' must be a string");
        c.sweep.family = sweep_family_from_string(s["family"].get<std::string>());
      }
      if (s.contains("deltas")) {
        const Vector d = vector_of(s["deltas"], "'sweep.deltas'");
        c.sweep.deltas.assign(d.data(), d.data() + d.size());
      }
      if (s.contains("scale")) {
        if (!s["scale"].is_number()) throw Error(ErrorCode::kConfig, "'sweep.scale' must be a number");
        c.sweep.scale = s["scale"].get<double>();
      }
    }
    if (j.contains("output_dir")) {
      if (!j["output_dir"].is_string()) throw Error(ErrorCode::kConfig, "'output_dir' must be a string");
      std::filesystem::path p = j["output_dir"].get<std::string>();
      c.output_dir = p.is_absolute() ? p : base_dir / p;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnknownFamily) throw Error(ErrorCode::kConfig, e.what());
    throw;
  }
  if (c.ensemble_size < 2) throw Error(ErrorCode::kConfig, "'ensemble_size' must be at least 2");
  if (!std::is_sorted(c.sweep.deltas.begin(), c.sweep.deltas.end())) {
    throw Error(ErrorCode::kConfig, "'sweep.deltas' must be sorted");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, "config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json j;
  if (c.model) j["model"] = meanfield::to_json(*c.model);
  if (c.steps) j["steps"] = *c.steps;
  j["seed"] = c.seed;
  json kinds = json::array();
  for (FilterKind k : c.kinds) kinds.push_back(std::string(to_string(k)));
  j["kinds"] = kinds;
  json res = json::object();
  if (c.grid.state_nodes) res["state"] = *c.grid.state_nodes;
  if (c.grid.data_nodes) res["data"] = *c.grid.data_nodes;
  if (!res.empty()) j["resolution"] = res;
  json box = json::object();
  if (c.grid.state_lo) box["state_lo"] = vector_json(*c.grid.state_lo);
  if (c.grid.state_hi) box["state_hi"] = vector_json(*c.grid.state_hi);
  if (c.grid.data_lo) box["data_lo"] = vector_json(*c.grid.data_lo);
  if (c.grid.data_hi) box["data_hi"] = vector_json(*c.grid.data_hi);
  if (!box.empty()) j["box"] = box;
  j["ensemble_size"] = c.ensemble_size;
  j["write_densities"] = c.write_densities;
  j["sweep"] = {{"family", std::string(to_string(c.sweep.family))}, {"deltas", c.sweep.deltas}, {"scale", c.sweep.scale}};
  j["output_dir"] = c.output_dir.string();
  return j;
}

}  // namespace meanfield::cli
