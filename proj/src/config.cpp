#include "sdore/config.hpp"

#include "sdore/errors.hpp"
#include "sdore/format.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace sdore::config {

using nlohmann::json;

namespace {

/// Object reader that remembers which keys were consumed so leftovers can be
/// reported as unknown fields.
class Object {
 public:
  Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(field(key), "required field is missing");
    return *v;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_double(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(field, "expected a finite number");
  return x;
}

std::int64_t as_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    throw ConfigError(field, "integer out of range");
  }
  return v.get<std::int64_t>();
}

int as_int32(const json& v, const std::string& field) {
  const auto x = as_int(v, field);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(field, "integer out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t as_uint(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field, "expected a nonnegative integer");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto x = v.get<std::int64_t>();
  if (x < 0) throw ConfigError(field, "expected a nonnegative integer");
  return static_cast<std::uint64_t>(x);
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array");
  return v;
}

std::string index_field(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

training::Optimizer parse_optimizer(const std::string& s, const std::string& field) {
  if (s == "adam") return training::Optimizer::kAdam;
  if (s == "gd") return training::Optimizer::kGradientDescent;
  throw ConfigError(field, "expected \"adam\" or \"gd\", got \"" + s + "\"");
}

training::Schedule parse_schedule(const std::string& s, const std::string& field) {
  if (s == "constant") return training::Schedule::kConstant;
  if (s == "exponential") return training::Schedule::kExponential;
  if (s == "cosine") return training::Schedule::kCosine;
  throw ConfigError(field, "expected \"constant\", \"exponential\" or \"cosine\", got \"" + s + "\"");
}

bool same_train(const training::TrainConfig& a, const training::TrainConfig& b) {
  return a.learning_rate == b.learning_rate && a.batch_size == b.batch_size && a.epochs == b.epochs &&
         a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.eps == b.eps && a.optimizer == b.optimizer &&
         a.schedule == b.schedule && a.final_learning_rate == b.final_learning_rate &&
         a.early_stopping_patience == b.early_stopping_patience;
}

/// Fills in missing variant names: the loss name when unique, otherwise
/// "<loss>_<lambda>".
void name_variants(std::vector<VariantConfig>& variants, const std::vector<bool>& named) {
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (named[i]) continue;
    int same = 0;
    for (const auto& v : variants) same += v.variant == variants[i].variant;
    variants[i].name = same == 1 ? variants[i].variant : variants[i].variant + "_" + format_double(variants[i].lambda);
  }
}

VariantConfig variant(const std::string& loss, double lambda) { return {"", loss, lambda, std::nullopt}; }

std::vector<VariantConfig> named(std::vector<VariantConfig> variants) {
  name_variants(variants, std::vector<bool>(variants.size(), false));
  return variants;
}

std::vector<std::uint64_t> seed_range(std::uint64_t count) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t i = 0; i < count; ++i) s.push_back(i);
  return s;
}

std::vector<RegistryEntry> make_registry() {
  std::vector<RegistryEntry> r;
  {
    RunConfig c;
    c.experiment = "example6_1";
    c.problem.n = 500;
    c.problem.m = 5000;
    c.problem.snr = 30.0;
    c.variants = named({variant("SDORE", 1e-3)});
    c.train.learning_rate = 1e-2;
    c.seeds = seed_range(5);
    r.push_back({c.experiment, "1-D derivative estimation, f0 polynomial + cosine on U[0,1]", c});
  }
  {
    RunConfig c;
    c.experiment = "example6_2";
    c.problem.n = 100;
    c.problem.m = 1000;
    c.problem.snr = 25.0;
    c.variants = named({variant("DORE", 1e-2), variant("SDORE", 1e-2)});
    c.seeds = seed_range(10);
    c.test_sets = 100;
    c.test_size = 100;
    r.push_back({c.experiment, "variable selection, d=20, f0 = sum of pairwise products of x1..x4", c});
  }
  {
    RunConfig c;
    c.experiment = "example6_3";
    c.problem.n = 10000;
    c.problem.m = 10000;
    c.problem.sigma = {0.1, 0.2};
    c.variants = named({variant("SDORE", 1e-2), variant("SDORE", 1e-4), variant("SDORE", 1e-6),
                        variant("SDORE", 1e-8), variant("SDORE", 0.0)});
    c.seeds = {0};
    r.push_back({c.experiment, "inverse source problem -lap(u) + 3 pi^2 u = f on [0,1]^2", c});
  }
  {
    RunConfig c;
    c.experiment = "appendix_toy";
    c.problem.n = 1000;
    c.problem.m = 1000;
    c.problem.sigma = {std::sqrt(0.1)};
    c.variants = named({variant("LS", 0.0), variant("DORE", 1e-4), variant("SDORE", 1e-4)});
    c.seeds = {0};
    r.push_back({c.experiment, "f0 = x1^2 with x2 ~ N(0, 0.05); unlabeled data on [-1,1]^2", c});
  }
  {
    RunConfig c;
    c.experiment = "appendix_sim";
    c.problem.n = 1000;
    c.problem.m = 1000;
    c.problem.snr = 25.0;
    c.variants = named({variant("LS", 0.0), variant("DORE", 1e-4), variant("SDORE", 1e-4)});
    c.seeds = {0};
    c.test_sets = 100;
    c.test_size = 500;
    r.push_back({c.experiment, "additive model in x1..x4, d=10, x5..x10 on [0,0.05]", c});
  }
  {
    RunConfig c;
    c.experiment = "csv_selection";
    c.problem.csv = CsvConfig{"data/california_housing_standin.csv", "MedHouseVal", 7, 0, 0.2, 0.0};
    c.variants = named({variant("DORE", 1e-3), variant("DORE", 1e-2), variant("DORE", 1e-1)});
    c.seeds = {0};
    r.push_back({c.experiment, "variable selection on a CSV table with appended U[0,1] noise features", c});
  }
  return r;
}

void check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.experiment == b.experiment && a.problem == b.problem && a.variants == b.variants &&
         a.hidden == b.hidden && a.ensemble_size == b.ensemble_size && same_train(a.train, b.train) &&
         a.seeds == b.seeds && a.test_sets == b.test_sets && a.test_size == b.test_size &&
         a.selection == b.selection && a.output_dir == b.output_dir && a.threads == b.threads;
}

std::string to_string(training::Optimizer o) { return o == training::Optimizer::kAdam ? "adam" : "gd"; }

std::string to_string(training::Schedule s) {
  switch (s) {
    case training::Schedule::kConstant: return "constant";
    case training::Schedule::kExponential: return "exponential";
    case training::Schedule::kCosine: return "cosine";
  }
  return "constant";
}

const std::vector<RegistryEntry>& registry() {
  static const std::vector<RegistryEntry> r = make_registry();
  return r;
}

RunConfig default_config(const std::string& experiment) {
  for (const auto& e : registry()) {
    if (e.name == experiment) return e.defaults;
  }
  std::string names;
  for (const auto& e : registry()) names += (names.empty() ? "" : ", ") + e.name;
  throw ConfigError("experiment", "unknown experiment \"" + experiment + "\" (known: " + names + ")");
}

RunConfig parse_config(const json& j) {
  Object root(j, "");
  RunConfig c = default_config(as_string(root.require("experiment"), "experiment"));
  const bool csv = c.experiment == "csv_selection";

  if (const json* p = root.find("problem")) {
    Object o(*p, "problem");
    for (const char* key : {"n", "m"}) {
      if (const json* v = o.find(key)) {
        check(!csv, o.field(key), "not used by csv_selection (the table fixes the sample)");
        (std::string(key) == "n" ? c.problem.n : c.problem.m) = as_int(*v, o.field(key));
      }
    }
    const json* snr = o.find("snr");
    const json* sigma = o.find("sigma");
    check(!(snr && sigma), "problem", "give either snr or sigma, not both");
    check(!csv || (!snr && !sigma), "problem", "csv_selection takes no noise level");
    if (snr) {
      c.problem.snr = as_double(*snr, "problem.snr");
      c.problem.sigma.clear();
    }
    if (sigma) {
      c.problem.snr.reset();
      c.problem.sigma.clear();
      if (sigma->is_array()) {
        for (std::size_t i = 0; i < sigma->size(); ++i) {
          c.problem.sigma.push_back(as_double((*sigma)[i], index_field("problem.sigma", i)));
        }
      } else {
        c.problem.sigma.push_back(as_double(*sigma, "problem.sigma"));
      }
    }
    if (const json* v = o.find("csv")) {
      check(csv, "problem.csv", "only csv_selection reads a CSV file");
      Object s(*v, "problem.csv");
      auto& t = *c.problem.csv;
      if (const json* x = s.find("path")) t.path = as_string(*x, s.field("path"));
      if (const json* x = s.find("target")) t.target = as_string(*x, s.field("target"));
      if (const json* x = s.find("noise_features")) t.noise_features = as_int32(*x, s.field("noise_features"));
      if (const json* x = s.find("noise_seed")) t.noise_seed = as_uint(*x, s.field("noise_seed"));
      if (const json* x = s.find("test_fraction")) t.test_fraction = as_double(*x, s.field("test_fraction"));
      if (const json* x = s.find("unlabeled_fraction")) {
        t.unlabeled_fraction = as_double(*x, s.field("unlabeled_fraction"));
      }
      s.finish();
    }
    o.finish();
  }

  if (const json* v = root.find("variants")) {
    const json& arr = as_array(*v, "variants");
    c.variants.clear();
    std::vector<bool> has_name;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Object o(arr[i], index_field("variants", i));
      VariantConfig vc;
      const json* name = o.find("name");
      if (name) vc.name = as_string(*name, o.field("name"));
      has_name.push_back(name != nullptr);
      vc.variant = as_string(o.require("variant"), o.field("variant"));
      try {
        vc.variant = training::to_string(training::parse_variant(vc.variant));
      } catch (const ContractViolation&) {
        throw ConfigError(o.field("variant"),
                          "expected LS, DORE, SDORE or SDORE_POOLED, got \"" + vc.variant + "\"");
      }
      vc.lambda = as_double(o.require("lambda"), o.field("lambda"));
      if (const json* x = o.find("nu_sample")) vc.nu_sample = as_int(*x, o.field("nu_sample"));
      o.finish();
      c.variants.push_back(vc);
    }
    name_variants(c.variants, has_name);
  }

  if (const json* v = root.find("model")) {
    Object o(*v, "model");
    if (const json* x = o.find("hidden")) {
      c.hidden.clear();
      const json& arr = as_array(*x, "model.hidden");
      for (std::size_t i = 0; i < arr.size(); ++i) c.hidden.push_back(as_int32(arr[i], index_field("model.hidden", i)));
    }
    if (const json* x = o.find("ensemble_size")) c.ensemble_size = as_int32(*x, "model.ensemble_size");
    o.finish();
  }

  if (const json* v = root.find("train")) {
    Object o(*v, "train");
    auto& t = c.train;
    if (const json* x = o.find("learning_rate")) t.learning_rate = as_double(*x, o.field("learning_rate"));
    if (const json* x = o.find("batch_size")) t.batch_size = as_int32(*x, o.field("batch_size"));
    if (const json* x = o.find("epochs")) t.epochs = as_int32(*x, o.field("epochs"));
    if (const json* x = o.find("beta1")) t.beta1 = as_double(*x, o.field("beta1"));
    if (const json* x = o.find("beta2")) t.beta2 = as_double(*x, o.field("beta2"));
    if (const json* x = o.find("eps")) t.eps = as_double(*x, o.field("eps"));
    if (const json* x = o.find("optimizer")) t.optimizer = parse_optimizer(as_string(*x, o.field("optimizer")), o.field("optimizer"));
    if (const json* x = o.find("schedule")) t.schedule = parse_schedule(as_string(*x, o.field("schedule")), o.field("schedule"));
    if (const json* x = o.find("final_learning_rate")) {
      t.final_learning_rate = as_double(*x, o.field("final_learning_rate"));
    }
    if (const json* x = o.find("early_stopping_patience")) {
      t.early_stopping_patience = as_int32(*x, o.field("early_stopping_patience"));
    }
    o.finish();
  }

  if (const json* v = root.find("seeds")) {
    const json& arr = as_array(*v, "seeds");
    c.seeds.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) c.seeds.push_back(as_uint(arr[i], index_field("seeds", i)));
  }

  if (const json* v = root.find("evaluation")) {
    Object o(*v, "evaluation");
    if (const json* x = o.find("test_sets")) c.test_sets = as_int32(*x, o.field("test_sets"));
    if (const json* x = o.find("test_size")) c.test_size = as_int(*x, o.field("test_size"));
    if (const json* x = o.find("selection")) {
      Object s(*x, "evaluation.selection");
      if (const json* y = s.find("rule")) c.selection.rule = as_string(*y, s.field("rule"));
      if (const json* y = s.find("value")) c.selection.value = as_double(*y, s.field("value"));
      if (const json* y = s.find("top_k")) c.selection.top_k = as_int32(*y, s.field("top_k"));
      s.finish();
    }
    o.finish();
  }

  if (const json* v = root.find("output_dir")) c.output_dir = as_string(*v, "output_dir");
  if (const json* v = root.find("threads")) c.threads = as_int32(*v, "threads");
  root.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json emit_config(const RunConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  json p = json::object();
  if (c.problem.csv) {
    const auto& s = *c.problem.csv;
    p["csv"] = {{"path", s.path},
                {"target", s.target},
                {"noise_features", s.noise_features},
                {"noise_seed", s.noise_seed},
                {"test_fraction", s.test_fraction},
                {"unlabeled_fraction", s.unlabeled_fraction}};
  } else {
    p["n"] = c.problem.n;
    p["m"] = c.problem.m;
    if (c.problem.snr) p["snr"] = *c.problem.snr;
    if (c.problem.sigma.size() == 1) p["sigma"] = c.problem.sigma.front();
    if (c.problem.sigma.size() > 1) p["sigma"] = c.problem.sigma;
  }
  j["problem"] = p;
  j["variants"] = json::array();
  for (const auto& v : c.variants) {
    json e{{"name", v.name}, {"variant", v.variant}, {"lambda", v.lambda}};
    if (v.nu_sample) e["nu_sample"] = *v.nu_sample;
    j["variants"].push_back(e);
  }
  j["model"] = {{"hidden", c.hidden}, {"ensemble_size", c.ensemble_size}};
  const auto& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"eps", t.eps},
                {"optimizer", to_string(t.optimizer)},
                {"schedule", to_string(t.schedule)},
                {"final_learning_rate", t.final_learning_rate},
                {"early_stopping_patience", t.early_stopping_patience}};
  j["seeds"] = c.seeds;
  j["evaluation"] = {{"test_sets", c.test_sets},
                     {"test_size", c.test_size},
                     {"selection", {{"rule", c.selection.rule}, {"value", c.selection.value}, {"top_k", c.selection.top_k}}}};
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j;
}

void validate(const RunConfig& c) {
  const bool csv = c.experiment == "csv_selection";
  if (csv) {
    check(c.problem.csv.has_value(), "problem.csv", "required for csv_selection");
    const auto& s = *c.problem.csv;
    check(!s.path.empty(), "problem.csv.path", "must not be empty");
    check(!s.target.empty(), "problem.csv.target", "must not be empty");
    check(s.noise_features >= 0, "problem.csv.noise_features", "must be >= 0");
    check(s.test_fraction > 0.0 && s.test_fraction < 1.0, "problem.csv.test_fraction", "must lie in (0, 1)");
    check(s.unlabeled_fraction >= 0.0 && s.unlabeled_fraction < 1.0, "problem.csv.unlabeled_fraction",
          "must lie in [0, 1)");
  } else {
    check(c.problem.n >= 1, "problem.n", "must be at least 1");
    check(c.problem.m >= 0, "problem.m", "must be >= 0");
    check(c.problem.snr.has_value() != !c.problem.sigma.empty(), "problem", "exactly one of snr or sigma is required");
    if (c.problem.snr) check(*c.problem.snr > 0.0, "problem.snr", "must be positive");
    for (std::size_t i = 0; i < c.problem.sigma.size(); ++i) {
      check(c.problem.sigma[i] >= 0.0, index_field("problem.sigma", i), "must be >= 0");
      for (std::size_t k = 0; k < i; ++k) {
        check(c.problem.sigma[k] != c.problem.sigma[i], index_field("problem.sigma", i), "duplicate level");
      }
    }
    check(!c.problem.csv, "problem.csv", "only csv_selection reads a CSV file");
  }

  check(!c.variants.empty(), "variants", "at least one variant is required");
  for (std::size_t i = 0; i < c.variants.size(); ++i) {
    const auto& v = c.variants[i];
    const auto f = index_field("variants", i);
    check(!v.name.empty(), f + ".name", "must not be empty");
    check(v.name.find_first_of("/\\,;\n") == std::string::npos && v.name != "." && v.name != "..", f + ".name",
          "must not contain path separators, commas or semicolons");
    check(v.lambda >= 0.0, f + ".lambda", "must be >= 0");
    check(v.variant != "LS" || v.lambda == 0.0, f + ".lambda", "LS takes lambda = 0");
    if (v.nu_sample) {
      check(v.variant == "DORE", f + ".nu_sample", "only DORE draws penalty points from nu");
      check(*v.nu_sample >= 1, f + ".nu_sample", "must be at least 1");
      check(!csv, f + ".nu_sample", "csv_selection has no sampling distribution");
    }
    if (!csv && c.problem.m == 0) {
      check(v.variant != "SDORE" || v.lambda == 0.0, f + ".variant", "SDORE with lambda > 0 needs problem.m >= 1");
    }
    for (std::size_t k = 0; k < i; ++k) {
      check(c.variants[k].name != v.name, f + ".name", "duplicate variant name \"" + v.name + "\"");
    }
  }
  if (csv && c.problem.csv->unlabeled_fraction == 0.0) {
    for (std::size_t i = 0; i < c.variants.size(); ++i) {
      const auto& v = c.variants[i];
      check(v.variant != "SDORE" || v.lambda == 0.0, index_field("variants", i) + ".variant",
            "SDORE needs problem.csv.unlabeled_fraction > 0");
    }
  }

  for (std::size_t i = 0; i < c.hidden.size(); ++i) {
    check(c.hidden[i] >= 1, index_field("model.hidden", i), "must be at least 1");
  }
  check(c.ensemble_size >= 1, "model.ensemble_size", "must be at least 1");
  try {
    c.train.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError("train", e.what());
  }
  check(!c.seeds.empty(), "seeds", "at least one seed is required");
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) check(c.seeds[k] != c.seeds[i], index_field("seeds", i), "duplicate seed");
  }
  check(c.test_sets >= 1, "evaluation.test_sets", "must be at least 1");
  check(c.test_size >= 1, "evaluation.test_size", "must be at least 1");
  try {
    const auto kind = estimators::parse_rule_kind(c.selection.rule);
    if (kind == estimators::RuleKind::kTopK) {
      check(c.selection.top_k >= 1, "evaluation.selection.top_k", "must be at least 1 for the top_k rule");
    } else {
      check(c.selection.value >= 0.0, "evaluation.selection.value", "must be >= 0");
    }
  } catch (const ContractViolation&) {
    throw ConfigError("evaluation.selection.rule", "expected relative, absolute or top_k");
  }
  check(!c.output_dir.empty(), "output_dir", "must not be empty");
  check(c.threads >= 1, "threads", "must be at least 1");
}

std::vector<Setting> build_settings(const RunConfig& c) {
  validate(c);
  if (c.experiment == "csv_selection") {
    const auto& s = *c.problem.csv;
    auto data = experiments::load_csv_dataset(s.path, s.target, s.noise_features, s.noise_seed);
    data.test_fraction = s.test_fraction;
    data.unlabeled_fraction = s.unlabeled_fraction;
    return {{"", experiments::csv_selection(std::move(data))}};
  }
  experiments::ProblemSpec base;
  if (c.experiment == "example6_1") base = experiments::example_1d(c.problem.n, c.problem.m);
  if (c.experiment == "example6_2") base = experiments::example_selection(c.problem.n, c.problem.m);
  if (c.experiment == "example6_3") base = experiments::example_inverse(c.problem.n, 0.0, c.problem.m);
  if (c.experiment == "appendix_toy") base = experiments::appendix_toy(c.problem.n, c.problem.m);
  if (c.experiment == "appendix_sim") base = experiments::appendix_sim(c.problem.n, c.problem.m);

  std::vector<Setting> out;
  if (c.problem.snr) {
    base.noise = {std::nullopt, *c.problem.snr};
    out.push_back({"", base});
    return out;
  }
  for (double sigma : c.problem.sigma) {
    auto spec = base;
    spec.noise = {sigma, std::nullopt};
    out.push_back({c.problem.sigma.size() > 1 ? "sigma" + format_double(sigma) : "", std::move(spec)});
  }
  return out;
}

std::vector<experiments::VariantSpec> build_variants(const RunConfig& c) {
  std::vector<experiments::VariantSpec> out;
  for (const auto& v : c.variants) {
    experiments::VariantSpec s;
    s.name = v.name;
    s.loss.variant = training::parse_variant(v.variant);
    s.loss.lambda = v.lambda;
    if (v.nu_sample) s.nu_sample = *v.nu_sample;
    out.push_back(std::move(s));
  }
  return out;
}

experiments::EvalConfig build_eval(const RunConfig& c) {
  experiments::EvalConfig e;
  e.hidden = c.hidden;
  e.ensemble_size = c.ensemble_size;
  e.train = c.train;
  e.test_sets = c.test_sets;
  e.test_size = c.test_size;
  e.rule.kind = estimators::parse_rule_kind(c.selection.rule);
  e.rule.value = c.selection.value;
  e.rule.top_k = c.selection.top_k;
  e.threads = c.threads;
  e.output_dir = std::filesystem::path(c.output_dir);
  return e;
}

}  // namespace sdore::config
