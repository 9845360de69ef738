#include "patrec/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace patrec {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

// Strict object walker: every key must be consumed by the handler.
template <class Handler>
void walk_object(const json& j, const std::string& where, Handler&& handle) {
  if (!j.is_object()) fail(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!handle(key, value)) fail("unknown key '" + key + "' in " + where);
  }
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key + " must be a number");
  return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) fail(key + " must be an integer");
  return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) fail(key + " must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) fail(key + " must be a boolean");
  return v.get<bool>();
}

} // namespace

void ExperimentConfig::validate() const {
  if (dtype != "f32" && dtype != "f64") fail("dtype must be f32 or f64");
  if (phantom.m < 8) fail("phantom.m must be >= 8");
  if (phantom.m % (1 << model.unet_levels) != 0)
    fail("phantom.m must be divisible by 2^model.unet_levels");
  if (phantom.n_train <= 0 || phantom.n_val <= 0 || phantom.n_test <= 0)
    fail("split sizes must be positive");
  if (phantom.jitter < 0) fail("phantom.jitter must be >= 0");
  if (sim.pad < 1) fail("sim.pad must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
  models::recon_variant_from_string(model.variant);
  gamma_case_from_string(train.gamma_case);
  to_train_config().validate();
}

trainer::TrainConfig ExperimentConfig::to_train_config() const {
  trainer::TrainConfig t;
  t.gamma_case = gamma_case_from_string(train.gamma_case);
  t.m = phantom.m;
  t.pad = sim.pad;
  t.cfl = sim.cfl;
  t.t_min = sim.t_min;
  t.c_max = sim.c_max;
  t.eps_c = model.eps_c;
  t.batch_size = train.batch_size;
  t.lr_linear = train.lr_linear;
  t.lr_unet = train.lr_unet;
  t.lr_mlp = train.lr_mlp;
  t.max_iterations = train.max_iterations;
  t.eval_interval = train.eval_interval;
  t.seed = seed;
  t.variant = models::recon_variant_from_string(model.variant);
  t.unet.levels = model.unet_levels;
  t.unet.base_channels = model.unet_base_channels;
  return t;
}

void apply_profile(ExperimentConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.phantom = {};
    cfg.train.max_iterations = 5000;
    cfg.train.eval_interval = 250;
    cfg.model.variant = "dense";
  } else if (profile == "full") {
    cfg.phantom.m = 64;
    cfg.phantom.n_train = 2048;
    cfg.phantom.n_val = 128;
    cfg.phantom.n_test = 512;
    cfg.train.max_iterations = 102400;
    cfg.train.eval_interval = 1024;
    cfg.model.variant = "dense";
  } else {
    fail("unknown profile '" + profile + "' (expected desk or full)");
  }
}

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  walk_object(j, "config", [&](const std::string& k, const json& v) {
    if (k == "seed") {
      c.seed = static_cast<std::uint64_t>(as_int(v, k));
    } else if (k == "out_dir") {
      c.out_dir = as_string(v, k);
    } else if (k == "cache_dir") {
      c.cache_dir = as_string(v, k);
    } else if (k == "threads") {
      c.threads = static_cast<int>(as_int(v, k));
    } else if (k == "dtype") {
      c.dtype = as_string(v, k);
    } else if (k == "phantom") {
      walk_object(v, "phantom", [&](const std::string& pk, const json& pv) {
        if (pk == "m") c.phantom.m = static_cast<int>(as_int(pv, pk));
        else if (pk == "jitter") c.phantom.jitter = as_number(pv, pk);
        else if (pk == "n_train") c.phantom.n_train = static_cast<int>(as_int(pv, pk));
        else if (pk == "n_val") c.phantom.n_val = static_cast<int>(as_int(pv, pk));
        else if (pk == "n_test") c.phantom.n_test = static_cast<int>(as_int(pv, pk));
        else return false;
        return true;
      });
    } else if (k == "sim") {
      walk_object(v, "sim", [&](const std::string& sk, const json& sv) {
        if (sk == "pad") c.sim.pad = static_cast<int>(as_int(sv, sk));
        else if (sk == "cfl") c.sim.cfl = as_number(sv, sk);
        else if (sk == "t_min") c.sim.t_min = as_number(sv, sk);
        else if (sk == "c_max") c.sim.c_max = as_number(sv, sk);
        else return false;
        return true;
      });
    } else if (k == "model") {
      walk_object(v, "model", [&](const std::string& mk, const json& mv) {
        if (mk == "variant") c.model.variant = as_string(mv, mk);
        else if (mk == "unet_levels") c.model.unet_levels = static_cast<int>(as_int(mv, mk));
        else if (mk == "unet_base_channels")
          c.model.unet_base_channels = static_cast<int>(as_int(mv, mk));
        else if (mk == "eps_c") c.model.eps_c = as_number(mv, mk);
        else return false;
        return true;
      });
    } else if (k == "train") {
      walk_object(v, "train", [&](const std::string& tk, const json& tv) {
        if (tk == "gamma_case") c.train.gamma_case = as_string(tv, tk);
        else if (tk == "batch_size") c.train.batch_size = static_cast<int>(as_int(tv, tk));
        else if (tk == "lr_linear") c.train.lr_linear = as_number(tv, tk);
        else if (tk == "lr_unet") c.train.lr_unet = as_number(tv, tk);
        else if (tk == "lr_mlp") c.train.lr_mlp = as_number(tv, tk);
        else if (tk == "max_iterations") c.train.max_iterations = as_int(tv, tk);
        else if (tk == "eval_interval") c.train.eval_interval = as_int(tv, tk);
        else if (tk == "precompute_boundary") c.train.precompute_boundary = as_bool(tv, tk);
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["cache_dir"] = c.cache_dir;
  j["threads"] = c.threads;
  j["dtype"] = c.dtype;
  j["phantom"] = {{"m", c.phantom.m},
                  {"jitter", c.phantom.jitter},
                  {"n_train", c.phantom.n_train},
                  {"n_val", c.phantom.n_val},
                  {"n_test", c.phantom.n_test}};
  j["sim"] = {{"pad", c.sim.pad},
              {"cfl", c.sim.cfl},
              {"t_min", c.sim.t_min},
              {"c_max", c.sim.c_max}};
  j["model"] = {{"variant", c.model.variant},
                {"unet_levels", c.model.unet_levels},
                {"unet_base_channels", c.model.unet_base_channels},
                {"eps_c", c.model.eps_c}};
  j["train"] = {{"gamma_case", c.train.gamma_case},
                {"batch_size", c.train.batch_size},
                {"lr_linear", c.train.lr_linear},
                {"lr_unet", c.train.lr_unet},
                {"lr_mlp", c.train.lr_mlp},
                {"max_iterations", c.train.max_iterations},
                {"eval_interval", c.train.eval_interval},
                {"precompute_boundary", c.train.precompute_boundary}};
  return j.dump(2) + "\n";
}

std::string dataset_manifest_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["phantom"] = {{"m", c.phantom.m},
                  {"jitter", c.phantom.jitter},
                  {"n_train", c.phantom.n_train},
                  {"n_val", c.phantom.n_val},
                  {"n_test", c.phantom.n_test}};
  j["sim"] = {{"pad", c.sim.pad},
              {"cfl", c.sim.cfl},
              {"t_min", c.sim.t_min},
              {"c_max", c.sim.c_max}};
  j["gamma_case"] = c.train.gamma_case;
  j["precompute_boundary"] = c.train.precompute_boundary;
  return j.dump(2) + "\n";
}

} // namespace patrec
