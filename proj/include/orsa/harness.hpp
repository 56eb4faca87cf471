#pragma once
// Experiment harness: run configuration, dataset directories, training
// artifacts, and the operations behind the CLI subcommands. All outputs are
// deterministic functions of the configuration, so a rerun with the same
// config and seeds reproduces every CSV byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "orsa/aggnet.hpp"
#include "orsa/ensemble.hpp"
#include "orsa/io.hpp"
#include "orsa/lof.hpp"
#include "orsa/preprocess.hpp"
#include "orsa/synthgen.hpp"
#include "orsa/trainer.hpp"

namespace orsa {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kDatasetFormat = "orsa-dataset-v1";
inline constexpr const char* kRunFormat = "orsa-run-v1";
inline constexpr const char* kNetFormat = "orsa-net-v1";
inline constexpr int kSweepProbeCount = 100;

struct MemberSource {
  enum class Kind { synthetic, table_self, table_list };
  Kind kind = Kind::synthetic;
  std::vector<std::string> paths;  // per-device CSVs for table_list
};

struct RunConfig {
  SynthConfig dataset;
  OrsaConfig orsa;
  std::vector<int> hidden{64, 32};
  std::uint64_t init_seed = 3;
  MemberSource members;
  std::vector<std::pair<int, int>> sweep_grid;  // (k_s, k_lof) points
};

// Stock configuration: 30 devices, 10k samples each, four planted outliers
// (one per type), k_s = k_lof = 6, soft-min, 25k steps of batch 64.
inline RunConfig default_run_config() {
  RunConfig cfg;
  cfg.dataset.seed = 7;
  for (int dev = 0; dev < cfg.dataset.n_devices; ++dev)
    cfg.dataset.outlier_assignment[dev] = OutlierType::regular;
  cfg.dataset.outlier_assignment[0] = OutlierType::type4;
  cfg.dataset.outlier_assignment[1] = OutlierType::type2;
  cfg.dataset.outlier_assignment[20] = OutlierType::type3;
  cfg.dataset.outlier_assignment[21] = OutlierType::type1;
  cfg.orsa.seed = 11;
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

inline const json* jfind(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double jnum(const json& j, const char* key, double fallback, const std::string& ctx) {
  const json* v = jfind(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) throw std::runtime_error(ctx + "." + key + " must be a number");
  return v->get<double>();
}

inline long jint(const json& j, const char* key, long fallback, const std::string& ctx) {
  const json* v = jfind(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) throw std::runtime_error(ctx + "." + key + " must be an integer");
  return v->get<long>();
}

inline std::uint64_t juint(const json& j, const char* key, std::uint64_t fallback,
                           const std::string& ctx) {
  const json* v = jfind(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0))
    throw std::runtime_error(ctx + "." + key + " must be a non-negative integer");
  return v->get<std::uint64_t>();
}

inline bool jbool(const json& j, const char* key, bool fallback, const std::string& ctx) {
  const json* v = jfind(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw std::runtime_error(ctx + "." + key + " must be a boolean");
  return v->get<bool>();
}

inline std::string jstr(const json& j, const char* key, const std::string& fallback,
                        const std::string& ctx) {
  const json* v = jfind(j, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) throw std::runtime_error(ctx + "." + key + " must be a string");
  return v->get<std::string>();
}

inline int parse_device_key(const std::string& key, const std::string& ctx) {
  int dev = 0;
  const auto res = std::from_chars(key.data(), key.data() + key.size(), dev);
  if (res.ec != std::errc() || res.ptr != key.data() + key.size())
    throw std::runtime_error(ctx + ": device key '" + key + "' is not an integer");
  return dev;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config serialization

inline json base_coeffs_to_json(const BaseCoeffs& b) {
  return json{{"dim_amp", b.dim_amp},     {"dim_freq", b.dim_freq},
              {"phase0", b.phase0},       {"phase_step", b.phase_step},
              {"mean_amp", b.mean_amp},   {"mean_freq", b.mean_freq},
              {"mean_phase", b.mean_phase}, {"quad", b.quad},
              {"lin", b.lin}};
}

inline BaseCoeffs base_coeffs_from_json(const json& j, const std::string& ctx) {
  BaseCoeffs b;
  b.dim_amp = detail::jnum(j, "dim_amp", b.dim_amp, ctx);
  b.dim_freq = detail::jnum(j, "dim_freq", b.dim_freq, ctx);
  b.phase0 = detail::jnum(j, "phase0", b.phase0, ctx);
  b.phase_step = detail::jnum(j, "phase_step", b.phase_step, ctx);
  b.mean_amp = detail::jnum(j, "mean_amp", b.mean_amp, ctx);
  b.mean_freq = detail::jnum(j, "mean_freq", b.mean_freq, ctx);
  b.mean_phase = detail::jnum(j, "mean_phase", b.mean_phase, ctx);
  b.quad = detail::jnum(j, "quad", b.quad, ctx);
  b.lin = detail::jnum(j, "lin", b.lin, ctx);
  return b;
}

inline json synth_config_to_json(const SynthConfig& cfg) {
  json assignment = json::object();
  for (const auto& [dev, type] : cfg.outlier_assignment)
    if (type != OutlierType::regular) assignment[std::to_string(dev)] = to_string(type);
  return json{{"n_devices", cfg.n_devices},
              {"samples_per_device", cfg.samples_per_device},
              {"input_dim", cfg.input_dim},
              {"seed", cfg.seed},
              {"noise_sigma", cfg.noise_sigma},
              {"p1", cfg.p1},
              {"scale_range", json::array({cfg.scale_lo, cfg.scale_hi})},
              {"constant_offset", cfg.constant_offset},
              {"noise_on_outliers", cfg.noise_on_outliers},
              {"outlier_assignment", assignment},
              {"base", base_coeffs_to_json(cfg.base)}};
}

// Devices absent from the assignment map default to regular; the key itself
// is required so an outlier-free dataset is an explicit choice.
inline SynthConfig synth_config_from_json(const json& j, const SynthConfig& defaults,
                                          const std::string& ctx) {
  SynthConfig cfg = defaults;
  cfg.n_devices = static_cast<int>(detail::jint(j, "n_devices", cfg.n_devices, ctx));
  cfg.samples_per_device =
      static_cast<int>(detail::jint(j, "samples_per_device", cfg.samples_per_device, ctx));
  cfg.input_dim = static_cast<int>(detail::jint(j, "input_dim", cfg.input_dim, ctx));
  cfg.seed = detail::juint(j, "seed", cfg.seed, ctx);
  cfg.noise_sigma = detail::jnum(j, "noise_sigma", cfg.noise_sigma, ctx);
  cfg.p1 = detail::jnum(j, "p1", cfg.p1, ctx);
  if (const json* range = detail::jfind(j, "scale_range")) {
    if (!range->is_array() || range->size() != 2 || !(*range)[0].is_number() ||
        !(*range)[1].is_number())
      throw std::runtime_error(ctx + ".scale_range must be an array of two numbers");
    cfg.scale_lo = (*range)[0].get<double>();
    cfg.scale_hi = (*range)[1].get<double>();
  }
  cfg.constant_offset = detail::jnum(j, "constant_offset", cfg.constant_offset, ctx);
  cfg.noise_on_outliers = detail::jbool(j, "noise_on_outliers", cfg.noise_on_outliers, ctx);
  if (const json* base = detail::jfind(j, "base"))
    cfg.base = base_coeffs_from_json(*base, ctx + ".base");

  const json* assignment = detail::jfind(j, "outlier_assignment");
  if (assignment == nullptr)
    throw std::runtime_error(ctx + ".outlier_assignment is required (use {} for no outliers)");
  if (!assignment->is_object())
    throw std::runtime_error(ctx + ".outlier_assignment must be an object");
  cfg.outlier_assignment.clear();
  for (int dev = 0; dev < cfg.n_devices; ++dev)
    cfg.outlier_assignment[dev] = OutlierType::regular;
  for (const auto& [key, value] : assignment->items()) {
    const int dev = detail::parse_device_key(key, ctx + ".outlier_assignment");
    if (!value.is_string())
      throw std::runtime_error(ctx + ".outlier_assignment['" + key + "'] must be a string");
    cfg.outlier_assignment[dev] = outlier_type_from_string(value.get<std::string>());
  }
  return cfg;
}

inline json orsa_config_to_json(const OrsaConfig& cfg) {
  return json{{"k_s", cfg.k_s},
              {"k_lof", cfg.k_lof},
              {"mode", to_string(cfg.mode)},
              {"batch_size", cfg.batch_size},
              {"steps", cfg.steps},
              {"seed", cfg.seed},
              {"metric_window", cfg.metric_window}};
}

inline OrsaConfig orsa_config_from_json(const json& j, const OrsaConfig& defaults,
                                        const std::string& ctx) {
  OrsaConfig cfg = defaults;
  cfg.k_s = static_cast<int>(detail::jint(j, "k_s", cfg.k_s, ctx));
  cfg.k_lof = static_cast<int>(detail::jint(j, "k_lof", cfg.k_lof, ctx));
  cfg.mode = mode_from_string(detail::jstr(j, "mode", to_string(cfg.mode), ctx));
  cfg.batch_size = static_cast<int>(detail::jint(j, "batch_size", cfg.batch_size, ctx));
  cfg.steps = detail::jint(j, "steps", cfg.steps, ctx);
  cfg.seed = detail::juint(j, "seed", cfg.seed, ctx);
  cfg.metric_window = static_cast<int>(detail::jint(j, "metric_window", cfg.metric_window, ctx));
  return cfg;
}

inline json run_config_to_json(const RunConfig& cfg) {
  json members;
  switch (cfg.members.kind) {
    case MemberSource::Kind::synthetic: members = "synthetic"; break;
    case MemberSource::Kind::table_self: members = "table"; break;
    case MemberSource::Kind::table_list: members = cfg.members.paths; break;
  }
  json out{{"dataset", synth_config_to_json(cfg.dataset)},
           {"orsa", orsa_config_to_json(cfg.orsa)},
           {"net", json{{"hidden", cfg.hidden}, {"init_seed", cfg.init_seed}}},
           {"members", members}};
  if (!cfg.sweep_grid.empty()) {
    json grid = json::array();
    for (const auto& [ks, klof] : cfg.sweep_grid) grid.push_back(json::array({ks, klof}));
    out["sweep"] = json{{"grid", grid}};
  }
  return out;
}

inline RunConfig run_config_from_json(const json& root) {
  const json* body = &root;
  // run manifests embed the config they were produced from; accept them too
  if (const json* nested = detail::jfind(root, "config")) body = nested;
  RunConfig cfg = default_run_config();
  if (const json* dataset = detail::jfind(*body, "dataset"))
    cfg.dataset = synth_config_from_json(*dataset, cfg.dataset, "dataset");
  if (const json* orsa_j = detail::jfind(*body, "orsa"))
    cfg.orsa = orsa_config_from_json(*orsa_j, cfg.orsa, "orsa");
  if (const json* net = detail::jfind(*body, "net")) {
    if (const json* hidden = detail::jfind(*net, "hidden")) {
      if (!hidden->is_array() || hidden->empty())
        throw std::runtime_error("net.hidden must be a non-empty array of widths");
      cfg.hidden.clear();
      for (const json& w : *hidden) {
        if (!w.is_number_integer()) throw std::runtime_error("net.hidden must contain integers");
        cfg.hidden.push_back(w.get<int>());
      }
    }
    cfg.init_seed = detail::juint(*net, "init_seed", cfg.init_seed, "net");
  }
  if (const json* members = detail::jfind(*body, "members")) {
    if (members->is_string()) {
      const std::string kind = members->get<std::string>();
      if (kind == "synthetic") {
        cfg.members.kind = MemberSource::Kind::synthetic;
      } else if (kind == "table") {
        cfg.members.kind = MemberSource::Kind::table_self;
      } else {
        throw std::runtime_error("members must be 'synthetic', 'table', or a list of table:<path>");
      }
    } else if (members->is_array()) {
      cfg.members.kind = MemberSource::Kind::table_list;
      cfg.members.paths.clear();
      for (const json& p : *members) {
        if (!p.is_string())
          throw std::runtime_error("members list entries must be table:<path> strings");
        std::string path = p.get<std::string>();
        if (path.rfind("table:", 0) != 0)
          throw std::runtime_error("members list entry '" + path + "' must start with 'table:'");
        cfg.members.paths.push_back(path.substr(6));
      }
    } else {
      throw std::runtime_error("members must be 'synthetic', 'table', or a list of table:<path>");
    }
  }
  if (const json* sweep = detail::jfind(*body, "sweep")) {
    const json* grid = detail::jfind(*sweep, "grid");
    if (grid != nullptr) {
      if (!grid->is_array()) throw std::runtime_error("sweep.grid must be an array of [k_s, k_lof]");
      for (const json& point : *grid) {
        if (!point.is_array() || point.size() != 2 || !point[0].is_number_integer() ||
            !point[1].is_number_integer())
          throw std::runtime_error("sweep.grid entries must be [k_s, k_lof] integer pairs");
        cfg.sweep_grid.emplace_back(point[0].get<int>(), point[1].get<int>());
      }
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  json root;
  try {
    root = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  try {
    return run_config_from_json(root);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Feature schema

inline json schema_to_json(std::span<const FeatureSpec> specs) {
  json features = json::array();
  for (const FeatureSpec& s : specs) {
    json f{{"name", s.name}};
    if (s.kind == FeatureKind::real) {
      f["kind"] = "real";
      f["min"] = s.x_min;
      f["max"] = s.x_max;
    } else {
      f["kind"] = "categorical";
      f["categories"] = s.categories;
    }
    if (s.metadata) f["metadata"] = true;
    features.push_back(std::move(f));
  }
  return json{{"features", features}};
}

inline std::vector<FeatureSpec> schema_from_json(const json& j) {
  const json* features = detail::jfind(j, "features");
  if (features == nullptr || !features->is_array() || features->empty())
    throw std::runtime_error("schema: 'features' must be a non-empty array");
  std::vector<FeatureSpec> specs;
  for (const json& f : *features) {
    FeatureSpec spec;
    spec.name = detail::jstr(f, "name", "", "schema.feature");
    const std::string kind = detail::jstr(f, "kind", "real", "schema.feature");
    if (kind == "real") {
      spec.kind = FeatureKind::real;
      spec.x_min = detail::jnum(f, "min", spec.x_min, "schema.feature");
      spec.x_max = detail::jnum(f, "max", spec.x_max, "schema.feature");
    } else if (kind == "categorical") {
      spec.kind = FeatureKind::categorical;
      const json* cats = detail::jfind(f, "categories");
      if (cats == nullptr || !cats->is_array())
        throw std::runtime_error("schema: feature '" + spec.name + "' needs a categories array");
      for (const json& c : *cats) {
        if (!c.is_string())
          throw std::runtime_error("schema: categories of '" + spec.name + "' must be strings");
        spec.categories.push_back(c.get<std::string>());
      }
    } else {
      throw std::runtime_error("schema: feature '" + spec.name + "' has unknown kind '" + kind +
                               "'");
    }
    spec.metadata = detail::jbool(f, "metadata", false, "schema.feature");
    validate_feature_spec(spec);
    specs.push_back(std::move(spec));
  }
  return specs;
}

// Synthetic inputs are drawn pre-normalized, so their schema is the identity
// range per coordinate.
inline std::vector<FeatureSpec> synthetic_schema(int input_dim) {
  std::vector<FeatureSpec> specs;
  for (int i = 0; i < input_dim; ++i)
    specs.push_back({"x" + std::to_string(i), FeatureKind::real, -1.0, 1.0, {}, false});
  return specs;
}

// ---------------------------------------------------------------------------
// Dataset directory IO

inline std::string device_file_name(int device_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "device_%03d.csv", device_id);
  return buf;
}

inline void write_device_csv(const fs::path& path, std::span<const FeatureSpec> schema,
                             const DeviceTable& table) {
  std::string out;
  for (const FeatureSpec& s : schema) {
    out += s.name;
    out += ',';
  }
  out += "y_out\n";
  for (std::size_t r = 0; r < table.samples.size(); ++r) {
    const Sample& s = table.samples[r];
    for (double v : s) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(table.outputs[r]);
    out += '\n';
  }
  write_text(path, out);
}

struct LoadedDataset {
  std::vector<FeatureSpec> schema;
  std::vector<DeviceTable> tables;  // samples normalized to [-1, 1]
  bool synthetic = false;
  SynthConfig synth;                // populated for synthetic datasets
  std::vector<DeviceSpec> specs;    // populated for synthetic datasets
  std::vector<std::string> device_files;
  std::size_t clamped = 0;          // inputs clamped during normalization
};

// Reads one device CSV and normalizes its rows against the schema.
inline DeviceTable load_device_csv(const fs::path& path, std::span<const FeatureSpec> schema,
                                   int device_id, std::size_t* clamped) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path.string() + ": empty file");
  const std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() != schema.size() + 1 || header.back() != "y_out")
    throw std::runtime_error(path.string() + ": header must list the " +
                             std::to_string(schema.size()) + " schema features then y_out");
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (header[i] != schema[i].name)
      throw std::runtime_error(path.string() + ": header column " + std::to_string(i) + " is '" +
                               header[i] + "', schema says '" + schema[i].name + "'");
  DeviceTable table;
  table.device_id = device_id;
  std::vector<FeatureValue> raw(schema.size());
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const std::vector<std::string> cells = split_csv_line(lines[row]);
    const std::string where = path.string() + " line " + std::to_string(row + 1);
    if (cells.size() != schema.size() + 1)
      throw std::runtime_error(where + ": expected " + std::to_string(schema.size() + 1) +
                               " columns, got " + std::to_string(cells.size()));
    for (std::size_t i = 0; i < schema.size(); ++i) {
      if (schema[i].kind == FeatureKind::real)
        raw[i] = parse_double(cells[i], where);
      else
        raw[i] = cells[i];
    }
    try {
      table.samples.push_back(normalize_sample(raw, schema, clamped));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    table.outputs.push_back(parse_double(cells.back(), where));
  }
  if (table.samples.empty()) throw std::runtime_error(path.string() + ": no data rows");
  return table;
}

inline json dataset_manifest_json(const SynthConfig& cfg, const SynthDataset& ds) {
  json devices = json::array();
  for (const DeviceSpec& spec : ds.specs) {
    json d{{"id", spec.device_id},
           {"file", device_file_name(spec.device_id)},
           {"label", to_string(spec.label)},
           {"draw_key", spec.draw_key}};
    if (!spec.area.lo.empty()) d["area"] = json{{"lo", spec.area.lo}, {"hi", spec.area.hi}};
    devices.push_back(std::move(d));
  }
  return json{{"format", kDatasetFormat},
              {"kind", "synthetic"},
              {"schema", schema_to_json(synthetic_schema(cfg.input_dim))},
              {"synth", synth_config_to_json(cfg)},
              {"devices", devices}};
}

struct GenerateArtifacts {
  fs::path dir;
  fs::path manifest;
  std::vector<fs::path> device_csvs;
};

inline GenerateArtifacts cmd_generate(const RunConfig& cfg, const fs::path& out_dir) {
  validate(cfg.dataset);
  const SynthDataset ds = generate_dataset(cfg.dataset);
  fs::create_directories(out_dir);
  const std::vector<FeatureSpec> schema = synthetic_schema(cfg.dataset.input_dim);
  GenerateArtifacts artifacts;
  artifacts.dir = out_dir;
  for (const DeviceTable& table : ds.tables) {
    const fs::path path = out_dir / device_file_name(table.device_id);
    write_device_csv(path, schema, table);
    artifacts.device_csvs.push_back(path);
  }
  artifacts.manifest = out_dir / "manifest.json";
  write_text(artifacts.manifest, dataset_manifest_json(cfg.dataset, ds).dump(2) + "\n");
  return artifacts;
}

inline LoadedDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw std::runtime_error(dir.string() + ": missing manifest.json");
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  const std::string format = detail::jstr(manifest, "format", "", "manifest");
  if (format != kDatasetFormat)
    throw std::runtime_error(manifest_path.string() + ": unsupported format '" + format + "'");
  LoadedDataset out;
  const json* schema = detail::jfind(manifest, "schema");
  if (schema == nullptr) throw std::runtime_error(manifest_path.string() + ": missing schema");
  out.schema = schema_from_json(*schema);
  const std::string kind = detail::jstr(manifest, "kind", "external", "manifest");
  out.synthetic = (kind == "synthetic");
  if (out.synthetic) {
    const json* synth = detail::jfind(manifest, "synth");
    if (synth == nullptr)
      throw std::runtime_error(manifest_path.string() + ": synthetic manifest missing 'synth'");
    out.synth = synth_config_from_json(*synth, SynthConfig{}, "manifest.synth");
  }
  const json* devices = detail::jfind(manifest, "devices");
  if (devices == nullptr || !devices->is_array() || devices->empty())
    throw std::runtime_error(manifest_path.string() + ": 'devices' must be a non-empty array");
  for (const json& d : *devices) {
    const int id = static_cast<int>(detail::jint(d, "id", -1, "manifest.device"));
    const std::string file = detail::jstr(d, "file", "", "manifest.device");
    if (id < 0 || file.empty())
      throw std::runtime_error(manifest_path.string() + ": device entries need 'id' and 'file'");
    DeviceTable table = load_device_csv(dir / file, out.schema, id, &out.clamped);
    if (out.synthetic) {
      DeviceSpec spec;
      spec.device_id = id;
      spec.label = outlier_type_from_string(detail::jstr(d, "label", "regular", "manifest.device"));
      spec.draw_key = detail::juint(d, "draw_key", 0, "manifest.device");
      if (const json* area = detail::jfind(d, "area")) {
        spec.area.lo = (*area)["lo"].get<std::vector<double>>();
        spec.area.hi = (*area)["hi"].get<std::vector<double>>();
        validate(spec.area);
      }
      table.label = spec.label;
      out.specs.push_back(std::move(spec));
    }
    out.device_files.push_back(file);
    out.tables.push_back(std::move(table));
  }
  return out;
}

inline std::string dataset_checksum(const fs::path& dir, std::span<const std::string> files) {
  std::string combined;
  for (const std::string& f : files) {
    combined += f;
    combined += '=';
    combined += file_checksum(dir / f);
    combined += ';';
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), fnv1a64(combined), 16);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Network checkpoints

inline void save_net(const fs::path& path, const NetParams& params) {
  std::string out = std::string(kNetFormat) + "\n";
  out += "layers " + std::to_string(params.layers.size()) + "\n";
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out += "layer " + std::to_string(l) + " " + std::to_string(layer.in) + " " +
           std::to_string(layer.out) + "\n";
    out += "w";
    for (double v : layer.w) {
      out += ' ';
      out += format_double(v);
    }
    out += "\nb";
    for (double v : layer.b) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  write_text(path, out);
}

inline NetParams load_net(const fs::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != kNetFormat)
    throw std::runtime_error(path.string() + ": not a " + std::string(kNetFormat) + " checkpoint");
  auto tokens = [](const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
  };
  auto parse_values = [&](const std::string& line, std::size_t count, const char* tag,
                          std::size_t lineno) {
    const std::vector<std::string> toks = tokens(line);
    if (toks.empty() || toks[0] != tag || toks.size() != count + 1)
      throw std::runtime_error(path.string() + " line " + std::to_string(lineno) +
                               ": expected '" + tag + "' with " + std::to_string(count) +
                               " values");
    std::vector<double> vals;
    vals.reserve(count);
    for (std::size_t i = 1; i < toks.size(); ++i)
      vals.push_back(parse_double(toks[i], path.string()));
    return vals;
  };
  auto parse_count = [&](const std::string& text, const char* what) {
    int value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || value < 1)
      throw std::runtime_error(path.string() + ": malformed " + what + " '" + text + "'");
    return value;
  };
  const std::vector<std::string> head = tokens(lines.at(1));
  if (head.size() != 2 || head[0] != "layers")
    throw std::runtime_error(path.string() + ": malformed layer count");
  const int n_layers = parse_count(head[1], "layer count");
  NetParams params;
  std::size_t lineno = 2;
  for (int l = 0; l < n_layers; ++l) {
    const std::vector<std::string> lt = tokens(lines.at(lineno));
    if (lt.size() != 4 || lt[0] != "layer")
      throw std::runtime_error(path.string() + " line " + std::to_string(lineno + 1) +
                               ": malformed layer header");
    NetParams::Layer layer;
    layer.in = parse_count(lt[2], "layer width");
    layer.out = parse_count(lt[3], "layer width");
    layer.w = parse_values(lines.at(lineno + 1),
                           static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out),
                           "w", lineno + 2);
    layer.b = parse_values(lines.at(lineno + 2), static_cast<std::size_t>(layer.out), "b",
                           lineno + 3);
    params.layers.push_back(std::move(layer));
    lineno += 3;
  }
  return params;
}

// ---------------------------------------------------------------------------
// Training runs

inline std::vector<EnsembleMember> build_members(const MemberSource& source,
                                                 const LoadedDataset& data,
                                                 const fs::path& dataset_dir) {
  switch (source.kind) {
    case MemberSource::Kind::synthetic: {
      if (!data.synthetic)
        throw std::runtime_error(
            "members 'synthetic' needs a synthetic dataset manifest; use 'table' for external "
            "device tables");
      return synthetic_members(data.synth, data.specs);
    }
    case MemberSource::Kind::table_self: {
      std::vector<EnsembleMember> members;
      for (const DeviceTable& t : data.tables)
        members.push_back(table_member(t.device_id, t.samples, t.outputs));
      return members;
    }
    case MemberSource::Kind::table_list: {
      if (source.paths.size() != data.tables.size())
        throw std::runtime_error("members list has " + std::to_string(source.paths.size()) +
                                 " tables for " + std::to_string(data.tables.size()) + " devices");
      std::vector<EnsembleMember> members;
      std::size_t clamped = 0;
      for (std::size_t i = 0; i < source.paths.size(); ++i) {
        fs::path p = source.paths[i];
        if (p.is_relative() && !fs::exists(p)) p = dataset_dir / p;
        const DeviceTable t =
            load_device_csv(p, data.schema, data.tables[i].device_id, &clamped);
        members.push_back(table_member(t.device_id, t.samples, t.outputs));
      }
      return members;
    }
  }
  throw std::runtime_error("unknown member source");
}

struct TrainArtifacts {
  fs::path dir;
  fs::path checkpoint;
  fs::path summary;
  fs::path heatmap;
  fs::path loss_trace;
  fs::path manifest;
  TrainOutcome outcome;
};

inline std::string device_label(const LoadedDataset& data, std::size_t idx) {
  return data.synthetic ? to_string(data.tables[idx].label) : std::string("unknown");
}

// Validates config against the dataset, trains, and writes every artifact.
inline TrainArtifacts run_training(const LoadedDataset& data, const RunConfig& cfg,
                                   const fs::path& dataset_dir, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n_devices = static_cast<int>(data.tables.size());
  validate(cfg.orsa, n_devices);
  NetConfig net_cfg;
  net_cfg.input_dim = static_cast<int>(sample_dim(data.schema));
  net_cfg.hidden = cfg.hidden;
  net_cfg.init_seed = cfg.init_seed;

  const std::vector<EnsembleMember> members = build_members(cfg.members, data, dataset_dir);
  TrainOutcome outcome = train(members, data.tables, net_cfg, cfg.orsa);

  fs::create_directories(out_dir);
  TrainArtifacts art;
  art.dir = out_dir;
  art.checkpoint = out_dir / "checkpoint.txt";
  save_net(art.checkpoint, outcome.params);

  const long window = std::min<long>(cfg.orsa.metric_window, outcome.metrics.steps);
  const std::vector<long> counts = selection_frequency(outcome.metrics, window);
  const std::vector<DeviceLoss> losses = loss_contributions(outcome.metrics, window);
  std::string summary = "device_id,label,selection_count,weighted_loss,equal_loss\n";
  for (int dev = 0; dev < n_devices; ++dev) {
    const auto i = static_cast<std::size_t>(dev);
    summary += std::to_string(data.tables[i].device_id) + "," + device_label(data, i) + "," +
               std::to_string(counts[i]) + "," + format_double(losses[i].weighted) + "," +
               format_double(losses[i].equal) + "\n";
  }
  art.summary = out_dir / "summary.csv";
  write_text(art.summary, summary);

  const auto& heat = outcome.metrics.final_batch_weights;
  std::string heatmap = "device_id";
  for (int b = 0; b < outcome.metrics.batch_size; ++b) heatmap += ",s" + std::to_string(b);
  heatmap += '\n';
  for (int dev = 0; dev < n_devices; ++dev) {
    heatmap += std::to_string(data.tables[static_cast<std::size_t>(dev)].device_id);
    for (double w : heat[static_cast<std::size_t>(dev)]) {
      heatmap += ',';
      heatmap += format_double(w);
    }
    heatmap += '\n';
  }
  art.heatmap = out_dir / "heatmap.csv";
  write_text(art.heatmap, heatmap);

  std::string trace = "step,loss\n";
  for (long step = 0; step < outcome.metrics.steps; ++step)
    trace += std::to_string(step) + "," +
             format_double(outcome.metrics.loss_trace[static_cast<std::size_t>(step)]) + "\n";
  art.loss_trace = out_dir / "loss_trace.csv";
  write_text(art.loss_trace, trace);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest{{"format", kRunFormat},
                {"config", run_config_to_json(cfg)},
                {"dataset_dir", dataset_dir.string()},
                {"dataset_checksum", dataset_checksum(dataset_dir, data.device_files)},
                {"artifacts", json{{"checkpoint", "checkpoint.txt"},
                                   {"summary", "summary.csv"},
                                   {"heatmap", "heatmap.csv"},
                                   {"loss_trace", "loss_trace.csv"}}},
                {"seeds", json{{"dataset", data.synthetic ? data.synth.seed : 0},
                               {"training", cfg.orsa.seed},
                               {"init", cfg.init_seed}}},
                {"metric_window", window},
                {"clamped_inputs", data.clamped},
                {"wall_clock_seconds", wall}};
  art.manifest = out_dir / "run_manifest.json";
  write_text(art.manifest, manifest.dump(2) + "\n");
  art.outcome = std::move(outcome);
  return art;
}

inline TrainArtifacts cmd_train(const fs::path& dataset_dir, const RunConfig& cfg,
                                const fs::path& out_dir) {
  const LoadedDataset data = load_dataset(dataset_dir);
  return run_training(data, cfg, dataset_dir, out_dir);
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep

struct SweepArtifacts {
  fs::path dir;
  fs::path summary;
  fs::path manifest;
  std::vector<fs::path> run_dirs;
};

struct SweepRow {
  int k_s = 0;
  int k_lof = 0;
  double rmse_extreme = 0.0;  // against the hard min (soft_min) or hard max (soft_max)
  double rmse_mean = 0.0;
};

inline SweepArtifacts cmd_sweep(const fs::path& dataset_dir, const RunConfig& cfg,
                                const fs::path& out_dir) {
  if (cfg.sweep_grid.empty())
    throw std::runtime_error("sweep: config has no sweep.grid entries");
  const LoadedDataset data = load_dataset(dataset_dir);
  const int n_devices = static_cast<int>(data.tables.size());

  std::string offenders;
  for (const auto& [ks, klof] : cfg.sweep_grid) {
    if (ks < 1 || ks > n_devices || klof < 1 || klof > n_devices - 1) {
      if (!offenders.empty()) offenders += ", ";
      offenders += "(" + std::to_string(ks) + "," + std::to_string(klof) + ")";
    }
  }
  if (!offenders.empty())
    throw std::runtime_error("sweep: invalid grid points for " + std::to_string(n_devices) +
                             " devices: " + offenders);

  const std::vector<EnsembleMember> members = build_members(cfg.members, data, dataset_dir);
  const int dim = static_cast<int>(sample_dim(data.schema));
  const std::uint64_t probe_seed = hash2(cfg.orsa.seed, 0x50726f6265ull);
  Rng probe_rng(probe_seed);
  std::vector<Sample> probes(kSweepProbeCount);
  for (Sample& s : probes) {
    s.resize(static_cast<std::size_t>(dim));
    for (double& v : s) v = probe_rng.uniform(-1.0, 1.0);
  }

  fs::create_directories(out_dir);
  SweepArtifacts art;
  art.dir = out_dir;
  std::vector<SweepRow> rows;
  for (const auto& [ks, klof] : cfg.sweep_grid) {
    RunConfig point_cfg = cfg;
    point_cfg.orsa.k_s = ks;
    point_cfg.orsa.k_lof = klof;
    const fs::path run_dir =
        out_dir / ("ks" + std::to_string(ks) + "_klof" + std::to_string(klof));
    TrainArtifacts run = run_training(data, point_cfg, dataset_dir, run_dir);
    art.run_dirs.push_back(run_dir);

    std::string dump = "probe";
    for (const FeatureSpec& f : data.schema)
      if (!f.metadata) dump += "," + f.name;
    dump += ",y_pred,hard_extreme,mean_all\n";
    SweepRow row{ks, klof, 0.0, 0.0};
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const std::vector<double> y = predict_ensemble(members, probes[p]);
      double extreme = y[0], mean = 0.0;
      for (double v : y) {
        extreme = cfg.orsa.mode == Mode::soft_min ? std::min(extreme, v) : std::max(extreme, v);
        mean += v;
      }
      mean /= static_cast<double>(y.size());
      const double pred = forward(run.outcome.params, probes[p]);
      row.rmse_extreme += (pred - extreme) * (pred - extreme);
      row.rmse_mean += (pred - mean) * (pred - mean);
      dump += std::to_string(p);
      for (double v : probes[p]) dump += "," + format_double(v);
      dump += "," + format_double(pred) + "," + format_double(extreme) + "," +
              format_double(mean) + "\n";
    }
    row.rmse_extreme = std::sqrt(row.rmse_extreme / static_cast<double>(probes.size()));
    row.rmse_mean = std::sqrt(row.rmse_mean / static_cast<double>(probes.size()));
    rows.push_back(row);
    write_text(run_dir / "probe_predictions.csv", dump);
  }

  std::string summary = "k_s,k_lof,rmse_extreme,rmse_mean,run_dir\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    summary += std::to_string(rows[i].k_s) + "," + std::to_string(rows[i].k_lof) + "," +
               format_double(rows[i].rmse_extreme) + "," + format_double(rows[i].rmse_mean) + "," +
               art.run_dirs[i].filename().string() + "\n";
  art.summary = out_dir / "sweep_summary.csv";
  write_text(art.summary, summary);

  json manifest{{"format", kRunFormat},
                {"config", run_config_to_json(cfg)},
                {"dataset_dir", dataset_dir.string()},
                {"dataset_checksum", dataset_checksum(dataset_dir, data.device_files)},
                {"probe_seed", probe_seed},
                {"probe_count", kSweepProbeCount}};
  art.manifest = out_dir / "sweep_manifest.json";
  write_text(art.manifest, manifest.dump(2) + "\n");
  return art;
}

// ---------------------------------------------------------------------------
// LOF scoring of a column file

inline std::vector<double> cmd_lof(const fs::path& input, int k_lof,
                                   const std::optional<fs::path>& out_file) {
  const std::vector<std::string> lines = read_lines(input);
  std::vector<double> points;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string cell = trim(lines[i]);
    if (cell.empty()) continue;
    const double v =
        parse_double(cell, input.string() + " line " + std::to_string(i + 1));
    if (!std::isfinite(v))
      throw std::runtime_error(input.string() + " line " + std::to_string(i + 1) +
                               ": non-finite value");
    points.push_back(v);
  }
  if (points.size() < 2)
    throw std::runtime_error(input.string() + ": need at least 2 values, got " +
                             std::to_string(points.size()));
  if (k_lof < 1 || static_cast<std::size_t>(k_lof) > points.size() - 1)
    throw std::runtime_error("k_lof must be in [1, " + std::to_string(points.size() - 1) +
                             "] for " + std::to_string(points.size()) + " values, got " +
                             std::to_string(k_lof));
  const std::vector<double> scores = lof_scores(points, k_lof);
  if (out_file) {
    std::string out;
    for (double s : scores) {
      out += format_double(s);
      out += '\n';
    }
    fs::create_directories(out_file->parent_path().empty() ? fs::path(".")
                                                           : out_file->parent_path());
    write_text(*out_file, out);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Report

// Merges a run's summary and heatmap into one per-device table with the
// weighted-vs-equal comparison columns.
inline fs::path cmd_report(const fs::path& run_dir) {
  const fs::path manifest_path = run_dir / "run_manifest.json";
  if (!fs::exists(manifest_path))
    throw std::runtime_error(run_dir.string() + ": incomplete run, missing run_manifest.json");
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  const json* artifacts = detail::jfind(manifest, "artifacts");
  if (artifacts == nullptr)
    throw std::runtime_error(manifest_path.string() + ": missing artifacts section");
  std::string missing;
  for (const char* key : {"summary", "heatmap", "loss_trace", "checkpoint"}) {
    const std::string file = detail::jstr(*artifacts, key, "", "manifest.artifacts");
    if (file.empty() || !fs::exists(run_dir / file)) {
      if (!missing.empty()) missing += ", ";
      missing += key;
    }
  }
  if (!missing.empty())
    throw std::runtime_error(run_dir.string() + ": incomplete run, missing artifacts: " + missing);

  const std::vector<std::string> summary =
      read_lines(run_dir / detail::jstr(*artifacts, "summary", "", "manifest.artifacts"));
  const std::vector<std::string> heatmap =
      read_lines(run_dir / detail::jstr(*artifacts, "heatmap", "", "manifest.artifacts"));
  if (summary.size() < 2 || heatmap.size() != summary.size())
    throw std::runtime_error(run_dir.string() + ": summary and heatmap row counts disagree");

  std::string report =
      "device_id,label,selection_count,weighted_loss,equal_loss,equal_weighted_ratio,"
      "mean_heatmap_weight\n";
  for (std::size_t row = 1; row < summary.size(); ++row) {
    const std::vector<std::string> s = split_csv_line(summary[row]);
    if (s.size() != 5)
      throw std::runtime_error(run_dir.string() + ": malformed summary row " +
                               std::to_string(row));
    const std::vector<std::string> h = split_csv_line(heatmap[row]);
    if (h.size() < 2 || h[0] != s[0])
      throw std::runtime_error(run_dir.string() + ": heatmap row " + std::to_string(row) +
                               " does not match summary device " + s[0]);
    const double weighted = parse_double(s[3], "summary");
    const double equal = parse_double(s[4], "summary");
    double mean_weight = 0.0;
    for (std::size_t c = 1; c < h.size(); ++c) mean_weight += parse_double(h[c], "heatmap");
    mean_weight /= static_cast<double>(h.size() - 1);
    const double ratio = weighted > 0.0 ? equal / weighted : 0.0;
    report += s[0] + "," + s[1] + "," + s[2] + "," + s[3] + "," + s[4] + "," +
              format_double(ratio) + "," + format_double(mean_weight) + "\n";
  }
  const fs::path out = run_dir / "report.csv";
  write_text(out, report);
  return out;
}

}  // namespace orsa
