#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpinn/diagnostics/piecewise.hpp"
#include "dpinn/dpinn/collocation.hpp"
#include "dpinn/dpinn/model.hpp"
#include "dpinn/dpinn/train.hpp"
#include "dpinn/net/activation.hpp"
#include "dpinn/optim/optimizer.hpp"

namespace dpinn {

using Json = nlohmann::json;

struct ModelSpec {
  int nbx = 1;
  int nbt = 1;
  int layers = 1;   // hidden layers
  int neurons = 2;  // per hidden layer
  Activation activation = Activation::tanh;
  TrialMode trial = TrialMode::plain;
  bool normalize = false;
  CollocationTarget target = CollocationTarget::residual;
  bool match_t_interfaces = false;
};

struct LossSpec {
  LossWeights weights{};
  int nbx_pts = 10;
  int nbt_pts = 10;
  bool include_edges = true;
  bool resample = false;
  CollocationMode mode = CollocationMode::uniform;
};

struct TrainSpec {
  OptimizerSettings optimizer{};
  int max_iters = 50000;
  double tol = 0.0;
  bool continuation = false;
  bool recurrent_split = false;
  std::uint64_t seed = 0;
  int log_stride = 100;
};

struct ElmSpec {
  int neurons = 12;  // per block
  int pts = 10;      // collocation points per block
  SolveMethod solver = SolveMethod::exact;
  double gain = 1.0;
  double tau = 1e-12;
  double rcond = 1e-13;
  bool include_edges = true;
  std::uint64_t seed = 0;
};

/// One experiment: problem, model, loss and exactly one of train / elm.
struct ExperimentConfig {
  Problem problem = SteadyAdvDiff{};
  ModelSpec model{};
  LossSpec loss{};
  std::optional<TrainSpec> train;
  std::optional<ElmSpec> elm;

  std::uint64_t seed() const { return train ? train->seed : elm->seed; }
  void set_seed(std::uint64_t s) {
    if (train) train->seed = s;
    if (elm) elm->seed = s;
  }
};

namespace detail {

/// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail("must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = get(key)) {
      if (!v->is_number()) fail_field(key, "must be a number");
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const Json* v = get(key)) {
      if (!v->is_number_integer()) fail_field(key, "must be an integer");
      out = v->get<int>();
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const Json* v = get(key)) {
      if (v->is_number_unsigned())
        out = v->get<std::uint64_t>();
      else if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
        out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      else
        fail_field(key, "must be a non-negative integer");
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const Json* v = get(key)) {
      if (!v->is_boolean()) fail_field(key, "must be true or false");
      out = v->get<bool>();
    }
  }

  template <class Parse, class T>
  void choice(const std::string& key, T& out, Parse&& parse) {
    if (const Json* v = get(key)) {
      if (!v->is_string()) fail_field(key, "must be a string");
      try {
        out = parse(v->get<std::string>());
      } catch (const Error& e) {
        fail_field(key, e.what());
      }
    }
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw Error(ErrorKind::invalid_config, "unknown config key '" + child_path(k) + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::invalid_config, "config field '" + (path_.empty() ? std::string("<root>") : path_) + "' " + msg);
  }
  [[noreturn]] void fail_field(const std::string& key, const std::string& msg) const {
    throw Error(ErrorKind::invalid_config, "config field '" + child_path(key) + "' " + msg);
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline InitialProfile read_profile(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::string type = "square-pulse";
  if (const Json* t = r.get("type")) {
    if (!t->is_string()) r.fail_field("type", "must be a string");
    type = t->get<std::string>();
  }
  InitialProfile out;
  if (type == "square-pulse") {
    SquarePulse p;
    r.number("center", p.center);
    r.number("width", p.width);
    r.number("height", p.height);
    out = p;
  } else if (type == "heaviside") {
    Heaviside h;
    r.number("jump", h.jump);
    out = h;
  } else {
    r.fail_field("type", "must be 'square-pulse' or 'heaviside'");
  }
  r.finish();
  return out;
}

inline Problem read_problem(const Json& j) {
  ObjectReader r(j, "problem");
  std::string type = "steady";
  if (const Json* t = r.get("type")) {
    if (!t->is_string()) r.fail_field("type", "must be a string");
    type = t->get<std::string>();
  }
  Problem out;
  if (type == "steady") {
    SteadyAdvDiff p;
    r.number("c", p.c);
    r.number("eps", p.eps);
    r.number("x_left", p.x_left);
    r.number("x_right", p.x_right);
    r.number("u_left", p.u_left);
    r.number("u_right", p.u_right);
    out = p;
  } else if (type == "advection") {
    UnsteadyAdvection p;
    r.number("speed", p.speed);
    r.number("x_left", p.x_left);
    r.number("x_right", p.x_right);
    r.number("t_start", p.t_start);
    r.number("t_end", p.t_end);
    if (const Json* i = r.get("initial")) p.initial = read_profile(*i, "problem.initial");
    out = p;
  } else if (type == "burgers") {
    Burgers p;
    r.number("eps", p.eps);
    r.number("x_left", p.x_left);
    r.number("x_right", p.x_right);
    r.number("t_start", p.t_start);
    r.number("t_end", p.t_end);
    if (const Json* i = r.get("initial")) p.initial = read_profile(*i, "problem.initial");
    out = p;
  } else {
    r.fail_field("type", "must be 'steady', 'advection' or 'burgers'");
  }
  r.finish();
  try {
    validate(out);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_config, std::string("problem: ") + e.what());
  }
  return out;
}

inline ModelSpec read_model(const Json& j) {
  ObjectReader r(j, "model");
  ModelSpec m;
  r.integer("nbx", m.nbx);
  r.integer("nbt", m.nbt);
  r.integer("layers", m.layers);
  r.integer("neurons", m.neurons);
  r.choice("activation", m.activation, [](const std::string& s) { return parse_activation(s); });
  r.choice("trial", m.trial, [](const std::string& s) { return parse_trial_mode(s); });
  r.boolean("normalize", m.normalize);
  r.choice("collocation_target", m.target, [](const std::string& s) { return parse_collocation_target(s); });
  r.boolean("match_t_interfaces", m.match_t_interfaces);
  r.finish();
  if (m.nbx < 1 || m.nbt < 1) throw Error(ErrorKind::invalid_config, "model.nbx and model.nbt must be >= 1");
  if (m.layers < 1 || m.neurons < 1) throw Error(ErrorKind::invalid_config, "model.layers and model.neurons must be >= 1");
  return m;
}

inline LossSpec read_loss(const Json& j) {
  ObjectReader r(j, "loss");
  LossSpec l;
  r.number("w_f", l.weights.w_f);
  r.number("w_b", l.weights.w_b);
  r.number("w_i", l.weights.w_i);
  r.number("w_vm", l.weights.w_vm);
  r.number("w_sm", l.weights.w_sm);
  r.number("w_sdm", l.weights.w_sdm);
  r.number("w_fm", l.weights.w_fm);
  r.number("lambda_reg", l.weights.lambda_reg);
  r.integer("nbx_pts", l.nbx_pts);
  r.integer("nbt_pts", l.nbt_pts);
  r.boolean("include_edges", l.include_edges);
  r.boolean("resample", l.resample);
  r.choice("mode", l.mode, [](const std::string& s) { return parse_collocation_mode(s); });
  r.finish();
  l.weights.validate();
  return l;
}

inline TrainSpec read_train(const Json& j) {
  ObjectReader r(j, "train");
  TrainSpec t;
  r.choice("optimizer", t.optimizer.kind, [](const std::string& s) { return parse_optimizer(s); });
  r.number("lr", t.optimizer.learning_rate);
  r.number("beta1", t.optimizer.beta1);
  r.number("beta2", t.optimizer.beta2);
  r.number("delta", t.optimizer.delta);
  r.number("lma_mu", t.optimizer.lma_mu);
  r.number("lma_nu", t.optimizer.lma_nu);
  r.integer("max_iters", t.max_iters);
  r.number("tol", t.tol);
  r.boolean("continuation", t.continuation);
  r.boolean("recurrent_split", t.recurrent_split);
  r.seed("seed", t.seed);
  r.integer("log_stride", t.log_stride);
  r.finish();
  if (t.max_iters < 1) throw Error(ErrorKind::invalid_config, "train.max_iters must be >= 1");
  if (t.log_stride < 1) throw Error(ErrorKind::invalid_config, "train.log_stride must be >= 1");
  return t;
}

inline ElmSpec read_elm(const Json& j) {
  ObjectReader r(j, "elm");
  ElmSpec e;
  r.integer("neurons", e.neurons);
  r.integer("pts", e.pts);
  r.choice("solver", e.solver, [](const std::string& s) { return parse_solve_method(s); });
  r.number("gain", e.gain);
  r.number("tau", e.tau);
  r.number("rcond", e.rcond);
  r.boolean("include_edges", e.include_edges);
  r.seed("seed", e.seed);
  r.finish();
  if (e.neurons < 1 || e.pts < 0) throw Error(ErrorKind::invalid_config, "elm.neurons must be >= 1 and elm.pts >= 0");
  return e;
}

inline Json profile_json(const InitialProfile& p) {
  if (const auto* s = std::get_if<SquarePulse>(&p))
    return {{"type", "square-pulse"}, {"center", s->center}, {"width", s->width}, {"height", s->height}};
  return {{"type", "heaviside"}, {"jump", std::get<Heaviside>(p).jump}};
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  detail::ObjectReader r(j, "");
  ExperimentConfig c;
  if (const Json* p = r.get("problem"))
    c.problem = detail::read_problem(*p);
  else
    r.fail("needs a 'problem' block");
  if (const Json* m = r.get("model")) c.model = detail::read_model(*m);
  if (const Json* l = r.get("loss")) c.loss = detail::read_loss(*l);
  if (const Json* t = r.get("train")) c.train = detail::read_train(*t);
  if (const Json* e = r.get("elm")) c.elm = detail::read_elm(*e);
  r.finish();
  if (c.train.has_value() == c.elm.has_value())
    throw Error(ErrorKind::invalid_config, "config needs exactly one of 'train' or 'elm'");
  if (is_steady(c.problem) && c.model.nbt != 1)
    throw Error(ErrorKind::invalid_config, "model.nbt must be 1 for a steady problem");
  if (c.elm && !is_steady(c.problem)) throw Error(ErrorKind::invalid_config, "elm runs need a steady problem");
  return c;
}

/// Canonical JSON of a config with every default filled in.
inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SteadyAdvDiff>) {
          j["problem"] = {{"type", "steady"},       {"c", p.c},           {"eps", p.eps},
                          {"x_left", p.x_left},     {"x_right", p.x_right}, {"u_left", p.u_left},
                          {"u_right", p.u_right}};
        } else if constexpr (std::is_same_v<T, UnsteadyAdvection>) {
          j["problem"] = {{"type", "advection"},  {"speed", p.speed},     {"x_left", p.x_left},
                          {"x_right", p.x_right}, {"t_start", p.t_start}, {"t_end", p.t_end},
                          {"initial", detail::profile_json(p.initial)}};
        } else {
          j["problem"] = {{"type", "burgers"},    {"eps", p.eps},         {"x_left", p.x_left},
                          {"x_right", p.x_right}, {"t_start", p.t_start}, {"t_end", p.t_end},
                          {"initial", detail::profile_json(p.initial)}};
        }
      },
      c.problem);
  const ModelSpec& m = c.model;
  j["model"] = {{"nbx", m.nbx},
                {"nbt", m.nbt},
                {"layers", m.layers},
                {"neurons", m.neurons},
                {"activation", to_string(m.activation)},
                {"trial", to_string(m.trial)},
                {"normalize", m.normalize},
                {"collocation_target", to_string(m.target)},
                {"match_t_interfaces", m.match_t_interfaces}};
  const LossSpec& l = c.loss;
  j["loss"] = {{"w_f", l.weights.w_f},     {"w_b", l.weights.w_b},
               {"w_i", l.weights.w_i},     {"w_vm", l.weights.w_vm},
               {"w_sm", l.weights.w_sm},   {"w_sdm", l.weights.w_sdm},
               {"w_fm", l.weights.w_fm},   {"lambda_reg", l.weights.lambda_reg},
               {"nbx_pts", l.nbx_pts},     {"nbt_pts", l.nbt_pts},
               {"include_edges", l.include_edges}, {"resample", l.resample},
               {"mode", to_string(l.mode)}};
  if (c.train) {
    const TrainSpec& t = *c.train;
    j["train"] = {{"optimizer", to_string(t.optimizer.kind)},
                  {"lr", t.optimizer.learning_rate},
                  {"beta1", t.optimizer.beta1},
                  {"beta2", t.optimizer.beta2},
                  {"delta", t.optimizer.delta},
                  {"lma_mu", t.optimizer.lma_mu},
                  {"lma_nu", t.optimizer.lma_nu},
                  {"max_iters", t.max_iters},
                  {"tol", t.tol},
                  {"continuation", t.continuation},
                  {"recurrent_split", t.recurrent_split},
                  {"seed", t.seed},
                  {"log_stride", t.log_stride}};
  }
  if (c.elm) {
    const ElmSpec& e = *c.elm;
    j["elm"] = {{"neurons", e.neurons},   {"pts", e.pts},
                {"solver", to_string(e.solver)}, {"gain", e.gain},
                {"tau", e.tau},           {"rcond", e.rcond},
                {"include_edges", e.include_edges}, {"seed", e.seed}};
  }
  return j;
}

/// 1-based line of a byte offset in text.
inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::invalid_config,
                origin + ": malformed JSON at line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_config, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(parse_json_text(read_text_file(path), path));
}

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Architecture architecture_of(const ExperimentConfig& c) {
  Architecture a;
  a.widths.assign(1, input_dimension(c.problem));
  for (int l = 0; l < c.model.layers; ++l) a.widths.push_back(c.model.neurons);
  a.widths.push_back(1);
  a.activation = c.model.activation;
  return a;
}

inline ModelOptions model_options_of(const ExperimentConfig& c) {
  ModelOptions o;
  o.trial = c.model.trial;
  o.weights = c.loss.weights;
  o.normalize = c.model.normalize;
  o.target = c.model.target;
  o.match_t_interfaces = c.model.match_t_interfaces;
  return o;
}

inline TrainConfig train_config_of(const ExperimentConfig& c) {
  if (!c.train) throw Error(ErrorKind::invalid_config, "config has no 'train' block");
  TrainConfig t;
  t.optimizer = c.train->optimizer;
  t.max_iters = c.train->max_iters;
  t.stop_tol = c.train->tol;
  t.resample = c.loss.resample;
  t.continuation = c.train->continuation;
  t.nbx_pts = c.loss.nbx_pts;
  t.nbt_pts = c.loss.nbt_pts;
  t.include_edges = c.loss.include_edges;
  t.mode = c.loss.mode;
  t.seed = c.train->seed;
  t.log_stride = c.train->log_stride;
  return t;
}

}  // namespace dpinn
