#include "distpre/serialize.hpp"

#include <cmath>
#include <limits>

#include "distpre/error.hpp"

namespace distpre {
namespace {

constexpr const char* kGateNames[kGates] = {"input", "forget", "output", "candidate"};

json matrix_rows(const std::vector<double>& m, std::size_t rows, std::size_t cols,
                 std::size_t row_offset) {
  json out = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(m[(row_offset + r) * cols + c]);
    out.push_back(std::move(row));
  }
  return out;
}

void read_rows(const json& j, std::vector<double>& m, std::size_t rows, std::size_t cols,
               std::size_t row_offset) {
  if (!j.is_array() || j.size() != rows) throw FormatError("model: matrix row count mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw FormatError("model: matrix column count mismatch");
    }
    for (std::size_t c = 0; c < cols; ++c) m[(row_offset + r) * cols + c] = row[c].get<double>();
  }
}

}  // namespace

json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw FormatError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

void to_json(json& j, const HyperparameterSetting& s) {
  j = json{{"learning_rate", s.learning_rate},
           {"layers", s.layers},
           {"units", s.units},
           {"epochs", s.epochs}};
}

void from_json(const json& j, HyperparameterSetting& s) {
  s.learning_rate = j.at("learning_rate").get<double>();
  s.layers = j.at("layers").get<int>();
  s.units = j.at("units").get<int>();
  s.epochs = j.at("epochs").get<int>();
}

void to_json(json& j, const GridSpec& g) {
  static constexpr const char* names[] = {"learning_rate", "layers", "units", "epochs"};
  j = json::object();
  for (std::size_t d = 0; d < kDimensions; ++d) {
    j[names[d]] = {{"min", g.axes[d].min}, {"max", g.axes[d].max}, {"step", g.axes[d].step}};
  }
}

void from_json(const json& j, GridSpec& g) {
  static constexpr const char* names[] = {"learning_rate", "layers", "units", "epochs"};
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const json& a = j.at(names[d]);
    g.axes[d] = {a.at("min").get<double>(), a.at("max").get<double>(), a.at("step").get<double>()};
  }
}

void to_json(json& j, const NmmConfig& c) {
  j = json{{"alpha", c.alpha},
           {"gamma", c.gamma},
           {"rho", c.rho},
           {"sigma", c.sigma},
           {"target_value", number_to_json(c.target_value)},
           {"stddev_tol", c.stddev_tol},
           {"max_evaluations", c.max_evaluations}};
}

void from_json(const json& j, NmmConfig& c) {
  c.alpha = j.at("alpha").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.rho = j.at("rho").get<double>();
  c.sigma = j.at("sigma").get<double>();
  c.target_value = number_from_json(j.at("target_value"));
  c.stddev_tol = j.at("stddev_tol").get<double>();
  c.max_evaluations = j.at("max_evaluations").get<std::size_t>();
}

void to_json(json& j, const TrainingConfig& c) {
  j = json{{"batch_size", c.batch_size}, {"grad_clip_norm", c.grad_clip_norm}, {"seed", c.seed}};
}

void from_json(const json& j, TrainingConfig& c) {
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(json& j, const NormalizedSeries& s) {
  j = json{{"detector_id", s.detector_id}, {"f", s.f}, {"values", s.values}};
}

void from_json(const json& j, NormalizedSeries& s) {
  s.detector_id = j.at("detector_id").get<std::string>();
  s.f = j.at("f").get<double>();
  s.values = j.at("values").get<std::vector<double>>();
}

void to_json(json& j, const DatasetSplit& s) {
  j = json{{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

void from_json(const json& j, DatasetSplit& s) {
  s.train = j.at("train").get<NormalizedSeries>();
  s.validation = j.at("validation").get<NormalizedSeries>();
  s.test = j.at("test").get<NormalizedSeries>();
}

void to_json(json& j, const EvaluationReport& r) {
  j = json{{"aare", number_to_json(r.aare)},
           {"aae", number_to_json(r.aae)},
           {"rmse", number_to_json(r.rmse)},
           {"points", r.points}};
}

void from_json(const json& j, EvaluationReport& r) {
  r.aare = number_from_json(j.at("aare"));
  r.aae = number_from_json(j.at("aae"));
  r.rmse = number_from_json(j.at("rmse"));
  r.points = j.at("points").get<std::size_t>();
}

void to_json(json& j, const TraceRecord& r) {
  j = json{{"vertex", r.vertex},
           {"value", number_to_json(r.value)},
           {"kind", std::string(to_string(r.kind))},
           {"cached", r.cached}};
}

void from_json(const json& j, TraceRecord& r) {
  r.vertex = j.at("vertex").get<HyperparameterSetting>();
  r.value = number_from_json(j.at("value"));
  r.kind = transformation_from_string(j.at("kind").get<std::string>());
  r.cached = j.at("cached").get<bool>();
}

void to_json(json& j, const SearchTrace& t) {
  j = json{{"records", t.records},
           {"evaluations", t.evaluations},
           {"iterations", t.iterations},
           {"reason", std::string(to_string(t.reason))}};
}

void from_json(const json& j, SearchTrace& t) {
  t.records = j.at("records").get<std::vector<TraceRecord>>();
  t.evaluations = j.at("evaluations").get<std::size_t>();
  t.iterations = j.at("iterations").get<std::size_t>();
  t.reason = termination_from_string(j.at("reason").get<std::string>());
}

void to_json(json& j, const CustomizationJob& job) {
  j = json{{"detector_id", job.detector_id},
           {"split", job.split},
           {"window_length", job.window_length},
           {"f", job.f},
           {"grid", job.grid},
           {"nmm", job.nmm},
           {"training", job.training},
           {"seed", job.seed}};
}

void from_json(const json& j, CustomizationJob& job) {
  job.detector_id = j.at("detector_id").get<std::string>();
  job.split = j.at("split").get<DatasetSplit>();
  job.window_length = j.at("window_length").get<std::size_t>();
  job.f = j.at("f").get<double>();
  job.grid = j.at("grid").get<GridSpec>();
  job.nmm = j.at("nmm").get<NmmConfig>();
  job.training = j.at("training").get<TrainingConfig>();
  job.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(json& j, const CustomizationResult& r) {
  j = json{{"detector_id", r.detector_id},
           {"best", r.best},
           {"model", model_to_json(r.model)},
           {"validation_aare", number_to_json(r.validation_aare)},
           {"converged", r.converged},
           {"evaluations", r.evaluations},
           {"wall_time", r.wall_time},
           {"trace", r.trace}};
}

void from_json(const json& j, CustomizationResult& r) {
  r.detector_id = j.at("detector_id").get<std::string>();
  r.best = j.at("best").get<HyperparameterSetting>();
  r.model = model_from_json(j.at("model"));
  r.validation_aare = number_from_json(j.at("validation_aare"));
  r.converged = j.at("converged").get<bool>();
  r.evaluations = j.at("evaluations").get<std::size_t>();
  r.wall_time = j.at("wall_time").get<double>();
  r.trace = j.at("trace").get<SearchTrace>();
}

json model_to_json(const LstmModel& m) {
  json layers = json::array();
  for (const auto& l : m.params.layers) {
    json jl = {{"input_width", l.input_width}, {"units", l.units}};
    for (std::size_t g = 0; g < kGates; ++g) {
      json b = json::array();
      for (std::size_t u = 0; u < l.units; ++u) b.push_back(l.bias[g * l.units + u]);
      jl[kGateNames[g]] = {{"W", matrix_rows(l.w_in, l.units, l.input_width, g * l.units)},
                           {"U", matrix_rows(l.w_rec, l.units, l.units, g * l.units)},
                           {"b", std::move(b)}};
    }
    layers.push_back(std::move(jl));
  }
  return json{{"format_version", m.format_version},
              {"setting", m.setting},
              {"window_length", m.window_length},
              {"f", m.f},
              {"layers", std::move(layers)},
              {"output", {{"weights", m.params.out_w}, {"bias", m.params.out_b}}}};
}

LstmModel model_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("model format_version " + std::to_string(version) + " not supported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    LstmModel m;
    m.format_version = version;
    m.setting = j.at("setting").get<HyperparameterSetting>();
    m.window_length = j.at("window_length").get<std::size_t>();
    m.f = j.at("f").get<double>();
    const json& layers = j.at("layers");
    if (!layers.is_array() || layers.empty()) throw FormatError("model: no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const json& jl = layers[k];
      LstmLayer l;
      l.input_width = jl.at("input_width").get<std::size_t>();
      l.units = jl.at("units").get<std::size_t>();
      const std::size_t expected_in = k == 0 ? 1 : m.params.layers.back().units;
      if (l.units == 0 || l.input_width != expected_in) {
        throw FormatError("model: layer " + std::to_string(k) + " has inconsistent shape");
      }
      l.w_in.assign(kGates * l.units * l.input_width, 0.0);
      l.w_rec.assign(kGates * l.units * l.units, 0.0);
      l.bias.assign(kGates * l.units, 0.0);
      for (std::size_t g = 0; g < kGates; ++g) {
        const json& jg = jl.at(kGateNames[g]);
        read_rows(jg.at("W"), l.w_in, l.units, l.input_width, g * l.units);
        read_rows(jg.at("U"), l.w_rec, l.units, l.units, g * l.units);
        const auto b = jg.at("b").get<std::vector<double>>();
        if (b.size() != l.units) throw FormatError("model: bias length mismatch");
        std::copy(b.begin(), b.end(), l.bias.begin() + static_cast<std::ptrdiff_t>(g * l.units));
      }
      m.params.layers.push_back(std::move(l));
    }
    m.params.out_w = j.at("output").at("weights").get<std::vector<double>>();
    m.params.out_b = j.at("output").at("bias").get<double>();
    if (m.params.out_w.size() != m.params.layers.back().units) {
      throw FormatError("model: output projection length mismatch");
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace distpre
