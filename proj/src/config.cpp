#include "dms/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dms/errors.hpp"

namespace dms {

std::vector<CorruptionSpec> SweepGrid::specs() const {
  std::vector<CorruptionSpec> out;
  for (double s : gaussian) out.push_back({modality, CorruptionKind::Gaussian, s});
  for (double f : mask) out.push_back({modality, CorruptionKind::Mask, f});
  return out;
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  data.seed = s;
  train.seed = s;
}

void RunConfig::validate() const {
  data.validate();
  train.validate();
  const std::size_t m = data.dims.size();
  auto check_modality = [m](std::size_t idx, const char* field) {
    if (idx >= m) {
      throw ParameterError(std::string(field) + " must be < " + std::to_string(m) +
                           " (number of modalities)");
    }
  };
  check_modality(sweep.modality, "sweep.modality");
  for (double s : sweep.gaussian) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("sweep.gaussian entries must be >= 0");
  }
  for (double f : sweep.mask) {
    if (!(f >= 0.0 && f <= 1.0)) throw ParameterError("sweep.mask entries must lie in [0, 1]");
  }
  check_modality(ablation.modality, "ablation.modality");
  ablation.validate();
  if (eval_corruption) {
    check_modality(eval_corruption->modality, "eval.corruption.modality");
    eval_corruption->validate();
  }
  if (train.train_corruption) check_modality(train.train_corruption->modality, "train.corruption.modality");
  if (check.trials < 1) throw ParameterError("check.trials must be >= 1");
  if (check.dim < 1) throw ParameterError("check.dim must be >= 1");
  if (check.min_modalities < 2 || check.max_modalities < check.min_modalities) {
    throw ParameterError("check.min_modalities and check.max_modalities must satisfy 2 <= min <= max");
  }
  if (output_dir.empty()) throw ParameterError("output_dir must not be empty");
}

namespace {

/// Walks one JSON object, remembering which keys were consumed so leftovers
/// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected a JSON object");
  }

  [[nodiscard]] const Json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const char* key, std::size_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(field(key) + " must be a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void read(const char* key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + " must be a number");
      out = v->get<double>();
    }
  }

  void read(const char* key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + " must be true or false");
      out = v->get<bool>();
    }
  }

  void read(const char* key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  template <typename T>
  void read(const char* key, std::vector<T>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key) + " must be an array");
      std::vector<T> tmp;
      for (const Json& e : *v) {
        const bool ok = std::is_floating_point_v<T> ? e.is_number() : e.is_number_unsigned();
        if (!ok) throw ConfigError(field(key) + " has an entry of the wrong type");
        tmp.push_back(e.get<T>());
      }
      out = std::move(tmp);
    }
  }

  /// Calls `fn(reader)` on a nested object if the key is present.
  template <typename Fn>
  void nested(const char* key, Fn&& fn) {
    if (const Json* v = find(key)) {
      ObjectReader sub(*v, field(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + field(it.key()) + "'");
    }
  }

  [[nodiscard]] std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  const Json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

std::optional<CorruptionSpec> optional_corruption(ObjectReader& r, const char* key,
                                                  std::optional<CorruptionSpec> current) {
  if (const Json* v = r.find(key)) {
    if (v->is_null()) return std::nullopt;
    return corruption_from_json(*v, r.field(key));
  }
  return current;
}

}  // namespace

Json to_json(const CorruptionSpec& spec) {
  return Json{{"modality", spec.modality}, {"kind", to_string(spec.kind)}, {"severity", spec.severity}};
}

CorruptionSpec corruption_from_json(const Json& j, const std::string& where) {
  CorruptionSpec spec;
  ObjectReader r(j, where);
  r.read("modality", spec.modality);
  std::string kind = to_string(spec.kind);
  r.read("kind", kind);
  try {
    spec.kind = parse_corruption_kind(kind);
  } catch (const ParameterError& e) {
    throw ConfigError(where + ".kind: " + e.what());
  }
  r.read("severity", spec.severity);
  r.finish();
  return spec;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dump_weights"] = c.dump_weights;
  j["data"] = {{"n_samples", c.data.n_samples},
               {"n_classes", c.data.n_classes},
               {"dims", c.data.dims},
               {"prototype_scale", c.data.prototype_scale},
               {"noise_sigma", c.data.noise_sigma}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"lambda", c.train.lambda},
                {"mode", to_string(c.train.mode)},
                {"corruption", c.train.train_corruption ? to_json(*c.train.train_corruption) : Json()}};
  j["model"] = {{"hidden", c.train.model.hidden},
                {"embed_dim", c.train.model.embed_dim},
                {"dropout", c.train.model.dropout}};
  j["scheduler"] = {{"alpha", c.train.scheduler.alpha},
                    {"beta", c.train.scheduler.beta},
                    {"gamma", c.train.scheduler.gamma},
                    {"t_passes", c.train.scheduler.t_passes}};
  j["sweep"] = {{"modality", c.sweep.modality}, {"gaussian", c.sweep.gaussian}, {"mask", c.sweep.mask}};
  j["ablation"] = to_json(c.ablation);
  j["eval"] = {{"corruption", c.eval_corruption ? to_json(*c.eval_corruption) : Json()}};
  j["check"] = {{"trials", c.check.trials},
                {"dim", c.check.dim},
                {"min_modalities", c.check.min_modalities},
                {"max_modalities", c.check.max_modalities}};
  return j;
}

RunConfig config_from_json(const Json& j, RunConfig c) {
  ObjectReader r(j, "");
  std::uint64_t seed = c.seed;
  if (const Json* v = r.find("seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    seed = v->get<std::uint64_t>();
  }
  c.set_seed(seed);
  r.read("output_dir", c.output_dir);
  r.read("dump_weights", c.dump_weights);
  r.nested("data", [&](ObjectReader& d) {
    d.read("n_samples", c.data.n_samples);
    d.read("n_classes", c.data.n_classes);
    d.read("dims", c.data.dims);
    d.read("prototype_scale", c.data.prototype_scale);
    d.read("noise_sigma", c.data.noise_sigma);
  });
  r.nested("train", [&](ObjectReader& t) {
    t.read("epochs", c.train.epochs);
    t.read("batch_size", c.train.batch_size);
    t.read("learning_rate", c.train.learning_rate);
    t.read("lambda", c.train.lambda);
    std::string mode = to_string(c.train.mode);
    t.read("mode", mode);
    try {
      c.train.mode = parse_fusion_mode(mode);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("train.mode: ") + e.what());
    }
    c.train.train_corruption = optional_corruption(t, "corruption", c.train.train_corruption);
  });
  r.nested("model", [&](ObjectReader& m) {
    m.read("hidden", c.train.model.hidden);
    m.read("embed_dim", c.train.model.embed_dim);
    m.read("dropout", c.train.model.dropout);
  });
  r.nested("scheduler", [&](ObjectReader& s) {
    s.read("alpha", c.train.scheduler.alpha);
    s.read("beta", c.train.scheduler.beta);
    s.read("gamma", c.train.scheduler.gamma);
    s.read("t_passes", c.train.scheduler.t_passes);
  });
  r.nested("sweep", [&](ObjectReader& s) {
    s.read("modality", c.sweep.modality);
    s.read("gaussian", c.sweep.gaussian);
    s.read("mask", c.sweep.mask);
  });
  if (const Json* v = r.find("ablation")) c.ablation = corruption_from_json(*v, "ablation");
  r.nested("eval", [&](ObjectReader& e) {
    c.eval_corruption = optional_corruption(e, "corruption", c.eval_corruption);
  });
  r.nested("check", [&](ObjectReader& k) {
    k.read("trials", c.check.trials);
    k.read("dim", c.check.dim);
    k.read("min_modalities", c.check.min_modalities);
    k.read("max_modalities", c.check.max_modalities);
  });
  r.finish();
  return c;
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // the library message already carries "line L, column C"
    throw ConfigError(source + ": " + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = config_from_json(parse_json(ss.str(), path.string()), std::move(base));
  c.validate();
  return c;
}

}  // namespace dms
