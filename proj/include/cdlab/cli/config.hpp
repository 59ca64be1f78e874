#pragma once

// JSON experiment configuration: schema-versioned, strict about unknown keys,
// and able to re-serialize the fully resolved config (defaults filled in) so
// every report echoes exactly what was run.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdlab/diffusion.hpp"
#include "cdlab/guidance.hpp"
#include "cdlab/self_training.hpp"

namespace cdlab::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct config_error : std::runtime_error {
  explicit config_error(std::vector<std::string> violations_)
      : std::runtime_error(join(violations_)), violations(std::move(violations_)) {}
  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& x : v) s += "\n  - " + x;
    return s;
  }
};

// Accumulates every violation instead of failing on the first one.
class JsonReader {
 public:
  explicit JsonReader(const json& root) : root_(root) {}

  const json& root() const { return root_; }
  std::vector<std::string>& violations() { return violations_; }

  void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) {
      violations_.push_back(path + ": expected an object");
      return;
    }
    for (const auto& [key, _] : obj.items())
      if (!allowed.contains(key)) violations_.push_back(path + "." + key + ": unknown key");
  }

  template <typename T>
  T get(const json& obj, const std::string& path, const std::string& key, T fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      violations_.push_back(path + "." + key + ": wrong type");
      return fallback;
    }
  }

  template <typename T>
  T get_required(const json& obj, const std::string& path, const std::string& key, T fallback) {
    if (!obj.is_object() || !obj.contains(key)) {
      violations_.push_back(path + "." + key + ": missing required key");
      return fallback;
    }
    return get<T>(obj, path, key, fallback);
  }

  std::string get_enum(const json& obj, const std::string& path, const std::string& key,
                       const std::string& fallback, const std::set<std::string>& values) {
    std::string v = get<std::string>(obj, path, key, fallback);
    if (!values.contains(v)) {
      std::string opts;
      for (const auto& x : values) opts += (opts.empty() ? "" : ", ") + x;
      violations_.push_back(path + "." + key + ": must be one of {" + opts + "}");
      return fallback;
    }
    return v;
  }

  void finish() const {
    if (!violations_.empty()) throw config_error(violations_);
  }

 private:
  const json& root_;
  std::vector<std::string> violations_;
};

// ---- sub-configs ----

// Built-in real-data source: the 2D two-Gaussian benchmark, x | y ~ N(y*1_2,
// sigma^2 I) with y uniform on {-1,+1}; class id 0 maps to y=-1, 1 to y=+1.
struct BenchmarkDataCfg {
  std::string source = "two-gaussian-2d";
  Eigen::Index n = 2000;
  double sigma = 1.0;

  json to_json() const { return {{"source", source}, {"n", n}, {"sigma", sigma}}; }

  static BenchmarkDataCfg parse(JsonReader& r, const json& obj, const std::string& path) {
    BenchmarkDataCfg c;
    if (obj.is_null()) return c;
    r.check_keys(obj, path, {"source", "n", "sigma"});
    c.source = r.get_enum(obj, path, "source", c.source, {"two-gaussian-2d"});
    c.n = r.get<Eigen::Index>(obj, path, "n", c.n);
    c.sigma = r.get<double>(obj, path, "sigma", c.sigma);
    if (c.n < 1) r.violations().push_back(path + ".n: must be >= 1");
    if (c.sigma <= 0.0) r.violations().push_back(path + ".sigma: must be > 0");
    return c;
  }
};

struct ScheduleCfg {
  ScheduleKind kind = ScheduleKind::kLinearBeta;
  int T = 100;
  ScheduleParams params{0.001, 0.06, 0.008};

  json to_json() const {
    return {{"kind", kind == ScheduleKind::kLinearBeta ? "linear-beta" : "cosine"},
            {"T", T},
            {"beta1", params.beta1},
            {"betaT", params.betaT},
            {"cosine_s", params.cosine_s}};
  }

  static ScheduleCfg parse(JsonReader& r, const json& obj, const std::string& path) {
    ScheduleCfg c;
    if (obj.is_null()) return c;
    r.check_keys(obj, path, {"kind", "T", "beta1", "betaT", "cosine_s"});
    c.kind = r.get_enum(obj, path, "kind", "linear-beta", {"linear-beta", "cosine"}) == "cosine"
                 ? ScheduleKind::kCosine
                 : ScheduleKind::kLinearBeta;
    c.T = r.get<int>(obj, path, "T", c.T);
    c.params.beta1 = r.get<double>(obj, path, "beta1", c.params.beta1);
    c.params.betaT = r.get<double>(obj, path, "betaT", c.params.betaT);
    c.params.cosine_s = r.get<double>(obj, path, "cosine_s", c.params.cosine_s);
    if (c.T < 1) r.violations().push_back(path + ".T: must be >= 1");
    return c;
  }
};

struct NetCfg {
  std::vector<int> hidden = {128, 128, 128};
  int time_freqs = 8;
  bool conditional = false;

  json to_json() const {
    return {{"hidden", hidden}, {"time_freqs", time_freqs}, {"conditional", conditional}};
  }

  static NetCfg parse(JsonReader& r, const json& obj, const std::string& path) {
    NetCfg c;
    if (obj.is_null()) return c;
    r.check_keys(obj, path, {"hidden", "time_freqs", "conditional"});
    c.hidden = r.get<std::vector<int>>(obj, path, "hidden", c.hidden);
    c.time_freqs = r.get<int>(obj, path, "time_freqs", c.time_freqs);
    c.conditional = r.get<bool>(obj, path, "conditional", c.conditional);
    return c;
  }
};

struct SubseqCfg {
  std::string type = "full";  // full | quadratic
  int steps = 0;              // quadratic only

  json to_json() const { return {{"type", type}, {"steps", steps}}; }

  static SubseqCfg parse(JsonReader& r, const json& obj, const std::string& path) {
    SubseqCfg c;
    if (obj.is_null()) return c;
    r.check_keys(obj, path, {"type", "steps"});
    c.type = r.get_enum(obj, path, "type", c.type, {"full", "quadratic"});
    c.steps = r.get<int>(obj, path, "steps", c.steps);
    if (c.type == "quadratic" && c.steps < 1)
      r.violations().push_back(path + ".steps: must be >= 1 for quadratic subsequences");
    return c;
  }

  std::vector<int> resolve(int T) const {
    if (type == "quadratic") return quadratic_subsequence(T, std::min(steps, T));
    return quadratic_subsequence(T, T);
  }
};

struct ExtractorCfg {
  std::string kind = "identity";  // identity | embedding
  int hidden = 32;
  int out_dim = 2;
  std::uint64_t seed = 0;

  json to_json() const {
    return {{"kind", kind}, {"hidden", hidden}, {"out_dim", out_dim}, {"seed", seed}};
  }

  static ExtractorCfg parse(JsonReader& r, const json& obj, const std::string& path) {
    ExtractorCfg c;
    if (obj.is_null()) return c;
    r.check_keys(obj, path, {"kind", "hidden", "out_dim", "seed"});
    c.kind = r.get_enum(obj, path, "kind", c.kind, {"identity", "embedding"});
    c.hidden = r.get<int>(obj, path, "hidden", c.hidden);
    c.out_dim = r.get<int>(obj, path, "out_dim", c.out_dim);
    c.seed = r.get<std::uint64_t>(obj, path, "seed", c.seed);
    return c;
  }

  FeatureExtractor build(Eigen::Index in_dim) const {
    if (kind == "identity") return FeatureExtractor::identity();
    return FeatureExtractor::embedding(static_cast<int>(in_dim), hidden, out_dim, seed);
  }
};

struct GuidanceCfg {
  std::string loss = "infonce";
  double tau = 10.0;
  double tau_plus = 0.1;
  double beta = 1.0;
  double lambda = 0.0;
  bool calibrate_lambda = false;
  double calibrate_ratio = 0.5;
  std::string pair_strategy = "vanilla";
  double eta = 0.0;
  bool normalize_features = true;
  ExtractorCfg extractor;

  json to_json() const {
    return {{"loss", loss},
            {"tau", tau},
            {"tau_plus", tau_plus},
            {"beta", beta},
            {"lambda", lambda},
            {"calibrate_lambda", calibrate_lambda},
            {"calibrate_ratio", calibrate_ratio},
            {"pair_strategy", pair_strategy},
            {"eta", eta},
            {"normalize_features", normalize_features},
            {"extractor", extractor.to_json()}};
  }

  static GuidanceCfg parse(JsonReader& r, const json& obj, const std::string& path) {
    GuidanceCfg c;
    if (obj.is_null()) return c;
    r.check_keys(obj, path,
                 {"loss", "tau", "tau_plus", "beta", "lambda", "calibrate_lambda",
                  "calibrate_ratio", "pair_strategy", "eta", "normalize_features", "extractor"});
    c.loss = r.get_enum(obj, path, "loss", c.loss,
                        {"infonce", "hnm", "conditional-infonce", "conditional-hnm"});
    c.tau = r.get<double>(obj, path, "tau", c.tau);
    c.tau_plus = r.get<double>(obj, path, "tau_plus", c.tau_plus);
    c.beta = r.get<double>(obj, path, "beta", c.beta);
    c.lambda = r.get<double>(obj, path, "lambda", c.lambda);
    c.calibrate_lambda = r.get<bool>(obj, path, "calibrate_lambda", c.calibrate_lambda);
    c.calibrate_ratio = r.get<double>(obj, path, "calibrate_ratio", c.calibrate_ratio);
    c.pair_strategy =
        r.get_enum(obj, path, "pair_strategy", c.pair_strategy,
                   {"vanilla", "real-positive", "real-negative", "class-conditional"});
    c.eta = r.get<double>(obj, path, "eta", c.eta);
    c.normalize_features = r.get<bool>(obj, path, "normalize_features", c.normalize_features);
    c.extractor = ExtractorCfg::parse(r, obj.is_object() && obj.contains("extractor")
                                             ? obj.at("extractor")
                                             : json(nullptr),
                                      path + ".extractor");
    return c;
  }

  GuidanceConfig build(Eigen::Index dim) const {
    GuidanceConfig g;
    if (loss == "infonce") g.loss = ContrastiveLoss::kInfoNce;
    else if (loss == "hnm") g.loss = ContrastiveLoss::kHnm;
    else if (loss == "conditional-infonce") g.loss = ContrastiveLoss::kConditionalInfoNce;
    else g.loss = ContrastiveLoss::kConditionalHnm;
    g.tau = tau;
    g.tau_plus = tau_plus;
    g.beta = beta;
    g.lambda = lambda;
    if (pair_strategy == "vanilla") g.pair_strategy = PairStrategy::kVanilla;
    else if (pair_strategy == "real-positive") g.pair_strategy = PairStrategy::kRealPositive;
    else if (pair_strategy == "real-negative") g.pair_strategy = PairStrategy::kRealNegative;
    else g.pair_strategy = PairStrategy::kClassConditional;
    g.eta = eta;
    g.normalize_features = normalize_features;
    g.extractor = extractor.build(dim);
    return g;
  }
};

// ---- per-kind experiment configs ----

struct SimulateGaussianCfg {
  SelfTrainConfig model;

  json to_json() const {
    const auto mode = [&] {
      switch (model.synth_mean_mode) {
        case SynthMeanMode::kScaledMu: return "scaled-mu";
        case SynthMeanMode::kRobustShifted: return "robust-shifted";
        case SynthMeanMode::kOrthogonal: return "orthogonal";
      }
      return "scaled-mu";
    }();
    return {{"model",
             {{"d", model.d},
              {"n", model.n},
              {"n_tilde", model.n_tilde},
              {"c", model.c},
              {"eps", model.eps},
              {"sigma", model.sigma},
              {"mu_norm2", model.mu_norm2},
              {"mu_angle_deg", model.mu_angle_deg}}},
            {"pipeline",
             {{"synth_mean_mode", mode},
              {"estimator",
               model.estimator == FinalEstimator::kAverage ? "average" : "adversarial"},
              {"final_fit",
               model.final_fit == FinalFitData::kPooled ? "pooled" : "synthetic-only"},
              {"eta", model.eta},
              {"trials", model.trials},
              {"holdout", model.holdout}}},
            {"gd",
             {{"max_iters", model.gd.max_iters},
              {"step", model.gd.step},
              {"grad_tol", model.gd.grad_tol}}}};
  }

  static SimulateGaussianCfg parse(JsonReader& r, const json& obj) {
    SimulateGaussianCfg c;
    r.check_keys(obj, "$", {"schema_version", "kind", "seed", "model", "pipeline", "gd"});
    const json model = obj.is_object() && obj.contains("model") ? obj.at("model") : json(nullptr);
    if (!model.is_null()) {
      r.check_keys(model, "$.model",
                   {"d", "n", "n_tilde", "c", "eps", "sigma", "mu_norm2", "mu_angle_deg"});
      c.model.d = r.get<Eigen::Index>(model, "$.model", "d", c.model.d);
      c.model.n = r.get<Eigen::Index>(model, "$.model", "n", c.model.n);
      c.model.n_tilde = r.get<Eigen::Index>(model, "$.model", "n_tilde", c.model.n_tilde);
      c.model.c = r.get<double>(model, "$.model", "c", c.model.c);
      c.model.eps = r.get<double>(model, "$.model", "eps", c.model.eps);
      c.model.sigma = r.get<double>(model, "$.model", "sigma", c.model.sigma);
      c.model.mu_norm2 = r.get<double>(model, "$.model", "mu_norm2", c.model.mu_norm2);
      c.model.mu_angle_deg = r.get<double>(model, "$.model", "mu_angle_deg", c.model.mu_angle_deg);
    }
    const json pipe =
        obj.is_object() && obj.contains("pipeline") ? obj.at("pipeline") : json(nullptr);
    if (!pipe.is_null()) {
      r.check_keys(pipe, "$.pipeline",
                   {"synth_mean_mode", "estimator", "final_fit", "eta", "trials", "holdout"});
      const std::string mode = r.get_enum(pipe, "$.pipeline", "synth_mean_mode", "scaled-mu",
                                          {"scaled-mu", "robust-shifted", "orthogonal"});
      c.model.synth_mean_mode = mode == "scaled-mu"
                                    ? SynthMeanMode::kScaledMu
                                    : (mode == "robust-shifted" ? SynthMeanMode::kRobustShifted
                                                                : SynthMeanMode::kOrthogonal);
      c.model.estimator = r.get_enum(pipe, "$.pipeline", "estimator", "adversarial",
                                     {"average", "adversarial"}) == "average"
                              ? FinalEstimator::kAverage
                              : FinalEstimator::kAdversarialSurrogate;
      c.model.final_fit = r.get_enum(pipe, "$.pipeline", "final_fit", "pooled",
                                     {"pooled", "synthetic-only"}) == "pooled"
                              ? FinalFitData::kPooled
                              : FinalFitData::kSyntheticOnly;
      c.model.eta = r.get<double>(pipe, "$.pipeline", "eta", c.model.eta);
      c.model.trials = r.get<int>(pipe, "$.pipeline", "trials", c.model.trials);
      c.model.holdout = r.get<Eigen::Index>(pipe, "$.pipeline", "holdout", c.model.holdout);
    }
    const json gd = obj.is_object() && obj.contains("gd") ? obj.at("gd") : json(nullptr);
    if (!gd.is_null()) {
      r.check_keys(gd, "$.gd", {"max_iters", "step", "grad_tol"});
      c.model.gd.max_iters = r.get<int>(gd, "$.gd", "max_iters", c.model.gd.max_iters);
      c.model.gd.step = r.get<double>(gd, "$.gd", "step", c.model.gd.step);
      c.model.gd.grad_tol = r.get<double>(gd, "$.gd", "grad_tol", c.model.gd.grad_tol);
    }
    try {
      c.model.validate();
    } catch (const std::invalid_argument& e) {
      r.violations().push_back(std::string("$.model: ") + e.what());
    }
    return c;
  }
};

struct TrainDiffusionCfg {
  BenchmarkDataCfg data;
  ScheduleCfg schedule;
  NetCfg net;
  TrainOpts train{12000, 128, 1e-3, 0, OptimizerKind::kMomentum, 0.9};
  std::string checkpoint = "model.ckpt";

  json to_json() const {
    return {{"data", data.to_json()},
            {"schedule", schedule.to_json()},
            {"net", net.to_json()},
            {"train",
             {{"iters", train.iters},
              {"batch", train.batch},
              {"lr", train.lr},
              {"optimizer",
               train.optimizer == OptimizerKind::kMomentum ? "momentum" : "gd"},
              {"momentum", train.momentum}}},
            {"checkpoint", checkpoint}};
  }

  static TrainDiffusionCfg parse(JsonReader& r, const json& obj) {
    TrainDiffusionCfg c;
    r.check_keys(obj, "$",
                 {"schema_version", "kind", "seed", "data", "schedule", "net", "train",
                  "checkpoint"});
    const auto sub = [&](const char* key) {
      return obj.is_object() && obj.contains(key) ? obj.at(key) : json(nullptr);
    };
    c.data = BenchmarkDataCfg::parse(r, sub("data"), "$.data");
    c.schedule = ScheduleCfg::parse(r, sub("schedule"), "$.schedule");
    c.net = NetCfg::parse(r, sub("net"), "$.net");
    const json tr = sub("train");
    if (!tr.is_null()) {
      r.check_keys(tr, "$.train", {"iters", "batch", "lr", "optimizer", "momentum"});
      c.train.iters = r.get<long>(tr, "$.train", "iters", c.train.iters);
      c.train.batch = r.get<int>(tr, "$.train", "batch", c.train.batch);
      c.train.lr = r.get<double>(tr, "$.train", "lr", c.train.lr);
      c.train.optimizer =
          r.get_enum(tr, "$.train", "optimizer", "momentum", {"gd", "momentum"}) == "gd"
              ? OptimizerKind::kGradientDescent
              : OptimizerKind::kMomentum;
      c.train.momentum = r.get<double>(tr, "$.train", "momentum", c.train.momentum);
    }
    c.checkpoint = r.get<std::string>(obj, "$", "checkpoint", c.checkpoint);
    try {
      c.train.validate();
    } catch (const std::invalid_argument& e) {
      r.violations().push_back(std::string("$.train: ") + e.what());
    }
    return c;
  }
};

struct SampleCfg {
  std::string checkpoint = "model.ckpt";
  std::string sampler = "ddpm";  // ddpm | ddim
  int m = 1000;
  double eta = 0.0;
  SubseqCfg subsequence;
  double init_scale = 1.0;
  bool balanced_labels = false;  // conditional nets: alternate class ids 0,1,...

  json to_json() const {
    return {{"checkpoint", checkpoint}, {"sampler", sampler},
            {"m", m},                   {"eta", eta},
            {"subsequence", subsequence.to_json()},
            {"init_scale", init_scale}, {"balanced_labels", balanced_labels}};
  }

  static SampleCfg parse(JsonReader& r, const json& obj) {
    SampleCfg c;
    r.check_keys(obj, "$",
                 {"schema_version", "kind", "seed", "checkpoint", "sampler", "m", "eta",
                  "subsequence", "init_scale", "balanced_labels"});
    c.checkpoint = r.get<std::string>(obj, "$", "checkpoint", c.checkpoint);
    c.sampler = r.get_enum(obj, "$", "sampler", c.sampler, {"ddpm", "ddim"});
    c.m = r.get<int>(obj, "$", "m", c.m);
    c.eta = r.get<double>(obj, "$", "eta", c.eta);
    c.subsequence = SubseqCfg::parse(
        r, obj.is_object() && obj.contains("subsequence") ? obj.at("subsequence") : json(nullptr),
        "$.subsequence");
    c.init_scale = r.get<double>(obj, "$", "init_scale", c.init_scale);
    c.balanced_labels = r.get<bool>(obj, "$", "balanced_labels", c.balanced_labels);
    if (c.m < 1) r.violations().push_back("$.m: must be >= 1");
    if (c.eta < 0.0 || c.eta > 1.0) r.violations().push_back("$.eta: must be in [0,1]");
    if (c.init_scale <= 0.0) r.violations().push_back("$.init_scale: must be > 0");
    return c;
  }
};

struct GuidedSampleCfg {
  std::string checkpoint = "model.ckpt";
  int m = 64;
  SubseqCfg subsequence;
  double init_scale = 1.0;
  bool balanced_labels = true;
  GuidanceCfg guidance;
  BenchmarkDataCfg real;  // for real-* pair strategies and lambda calibration

  json to_json() const {
    return {{"checkpoint", checkpoint},
            {"m", m},
            {"subsequence", subsequence.to_json()},
            {"init_scale", init_scale},
            {"balanced_labels", balanced_labels},
            {"guidance", guidance.to_json()},
            {"real", real.to_json()}};
  }

  static GuidedSampleCfg parse(JsonReader& r, const json& obj) {
    GuidedSampleCfg c;
    r.check_keys(obj, "$",
                 {"schema_version", "kind", "seed", "checkpoint", "m", "subsequence",
                  "init_scale", "balanced_labels", "guidance", "real"});
    const auto sub = [&](const char* key) {
      return obj.is_object() && obj.contains(key) ? obj.at(key) : json(nullptr);
    };
    c.checkpoint = r.get<std::string>(obj, "$", "checkpoint", c.checkpoint);
    c.m = r.get<int>(obj, "$", "m", c.m);
    c.subsequence = SubseqCfg::parse(r, sub("subsequence"), "$.subsequence");
    c.init_scale = r.get<double>(obj, "$", "init_scale", c.init_scale);
    c.balanced_labels = r.get<bool>(obj, "$", "balanced_labels", c.balanced_labels);
    c.guidance = GuidanceCfg::parse(r, sub("guidance"), "$.guidance");
    c.real = BenchmarkDataCfg::parse(r, sub("real"), "$.real");
    if (c.m < 2) r.violations().push_back("$.m: must be >= 2");
    if (c.init_scale <= 0.0) r.violations().push_back("$.init_scale: must be > 0");
    return c;
  }
};

struct SelectCfg {
  std::string samples = "samples.csv";
  std::string criterion = "separability";
  Eigen::Index k = 10;
  double eps = 0.1;        // gradient-norm-robust only
  BenchmarkDataCfg real;   // reference classifier training data
  ExtractorCfg extractor;  // separability only

  json to_json() const {
    return {{"samples", samples}, {"criterion", criterion}, {"k", k},
            {"eps", eps},         {"real", real.to_json()}, {"extractor", extractor.to_json()}};
  }

  static SelectCfg parse(JsonReader& r, const json& obj) {
    SelectCfg c;
    r.check_keys(obj, "$",
                 {"schema_version", "kind", "seed", "samples", "criterion", "k", "eps", "real",
                  "extractor"});
    const auto sub = [&](const char* key) {
      return obj.is_object() && obj.contains(key) ? obj.at(key) : json(nullptr);
    };
    c.samples = r.get_required<std::string>(obj, "$", "samples", c.samples);
    c.criterion =
        r.get_enum(obj, "$", "criterion", c.criterion,
                   {"separability", "gradient-norm", "gradient-norm-robust", "entropy"});
    c.k = r.get<Eigen::Index>(obj, "$", "k", c.k);
    c.eps = r.get<double>(obj, "$", "eps", c.eps);
    c.real = BenchmarkDataCfg::parse(r, sub("real"), "$.real");
    c.extractor = ExtractorCfg::parse(r, sub("extractor"), "$.extractor");
    if (c.k < 1) r.violations().push_back("$.k: must be >= 1");
    if (c.eps < 0.0) r.violations().push_back("$.eps: must be >= 0");
    return c;
  }
};

struct EvaluateCfg {
  std::string samples = "samples.csv";

  json to_json() const { return {{"samples", samples}}; }

  static EvaluateCfg parse(JsonReader& r, const json& obj) {
    EvaluateCfg c;
    r.check_keys(obj, "$", {"schema_version", "kind", "seed", "samples"});
    c.samples = r.get_required<std::string>(obj, "$", "samples", c.samples);
    return c;
  }
};

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 0;
  std::optional<SimulateGaussianCfg> simulate_gaussian;
  std::optional<TrainDiffusionCfg> train_diffusion;
  std::optional<SampleCfg> sample;
  std::optional<GuidedSampleCfg> guided_sample;
  std::optional<SelectCfg> select;
  std::optional<EvaluateCfg> evaluate;

  // Fully resolved config, defaults included.
  json to_json() const {
    json j;
    if (simulate_gaussian) j = simulate_gaussian->to_json();
    else if (train_diffusion) j = train_diffusion->to_json();
    else if (sample) j = sample->to_json();
    else if (guided_sample) j = guided_sample->to_json();
    else if (select) j = select->to_json();
    else if (evaluate) j = evaluate->to_json();
    j["schema_version"] = kSchemaVersion;
    j["kind"] = kind;
    j["seed"] = seed;
    return j;
  }
};

inline ExperimentConfig parse_config(const json& root) {
  JsonReader r(root);
  ExperimentConfig cfg;
  if (!root.is_object()) {
    r.violations().push_back("$: top-level value must be an object");
    r.finish();
  }
  const int version = r.get_required<int>(root, "$", "schema_version", kSchemaVersion);
  if (version != kSchemaVersion)
    r.violations().push_back("$.schema_version: unsupported version " + std::to_string(version));
  cfg.kind = r.get_enum(root, "$", "kind", "",
                        {"simulate-gaussian", "train-diffusion", "sample", "guided-sample",
                         "select", "evaluate"});
  cfg.seed = r.get<std::uint64_t>(root, "$", "seed", 0);
  if (cfg.kind == "simulate-gaussian") cfg.simulate_gaussian = SimulateGaussianCfg::parse(r, root);
  else if (cfg.kind == "train-diffusion") cfg.train_diffusion = TrainDiffusionCfg::parse(r, root);
  else if (cfg.kind == "sample") cfg.sample = SampleCfg::parse(r, root);
  else if (cfg.kind == "guided-sample") cfg.guided_sample = GuidedSampleCfg::parse(r, root);
  else if (cfg.kind == "select") cfg.select = SelectCfg::parse(r, root);
  else if (cfg.kind == "evaluate") cfg.evaluate = EvaluateCfg::parse(r, root);
  r.finish();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error({"cannot open config file: " + path});
  json root;
  try {
    root = json::parse(is);
  } catch (const json::parse_error& e) {
    throw config_error({std::string("parse error: ") + e.what()});
  }
  return parse_config(root);
}

}  // namespace cdlab::cli
