#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pixelreg/data.hpp"
#include "pixelreg/errors.hpp"
#include "pixelreg/image_io.hpp"
#include "pixelreg/metrics.hpp"
#include "pixelreg/regularizers.hpp"
#include "pixelreg/segnet.hpp"
#include "pixelreg/trainer.hpp"

namespace fs = std::filesystem;
using namespace pixelreg;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string objective = "baseline";
  double lambda = 0.1;
  std::string normalize = "per-edge";
  int connectivity = 4;
  int epochs = 100;
  double base_lr = 1e-3;
  int decay_every = 25;
  double decay_factor = 10.0;
  int batch_size = 32;
  int patches = 4750;
  int patch_size = 48;
  int depth = 2;
  int base_channels = 8;
  std::uint64_t seed = 0;
  int synthetic = 0;
  std::string shape = "64x64";
  std::string data;
  std::string out = "out";
  std::string checkpoint;
  std::string name = "model";
  double threshold = 0.5;
  bool fov_only = true;
  int threads = 1;
  int count = 8;
  std::string image;
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_value(const std::string& s, std::string& out) {
  out = s;
  return true;
}

bool parse_value(const std::string& s, bool& out) {
  if (s == "1" || s == "true" || s == "on") {
    out = true;
    return true;
  }
  if (s == "0" || s == "false" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  T value{};
  auto res = std::from_chars(b, e, value);
  if (res.ec != std::errc() || res.ptr != e) return false;
  out = value;
  return true;
}

bool parse_value(const std::string& s, int& out) { return parse_number(s, out); }
bool parse_value(const std::string& s, std::uint64_t& out) { return parse_number(s, out); }
bool parse_value(const std::string& s, double& out) { return parse_number(s, out); }

std::string render_value(const std::string& v) { return v; }
std::string render_value(bool v) { return v ? "true" : "false"; }
std::string render_value(int v) { return std::to_string(v); }
std::string render_value(std::uint64_t v) { return std::to_string(v); }

std::string render_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Binding {
  std::string key;
  CLI::Option* opt = nullptr;
  std::function<bool(const std::string&)> apply;
  std::function<std::string()> render;
};

// One subcommand's flags. A config file supplies values only for flags not
// given on the command line; the merged view is echoed as key=value lines.
class OptSet {
 public:
  OptSet(CLI::App* cmd, Options& opts) : opts_(opts) {
    cmd_ = cmd;
    cmd->add_option("--config", opts.config, "key=value file supplying defaults for these flags");
  }

  template <typename T>
  void add(const std::string& key, T& ref, const std::string& desc) {
    CLI::Option* opt = cmd_->add_option("--" + key, ref, desc);
    binds_.push_back({key, opt, [&ref](const std::string& s) { return parse_value(s, ref); },
                      [&ref] { return render_value(ref); }});
  }

  void overlay_config() const {
    if (opts_.config.empty()) return;
    std::ifstream in(opts_.config);
    if (!in) throw ConfigError("cannot read config file: " + opts_.config);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string where = opts_.config + ":" + std::to_string(lineno);
      std::string body = trim(line);
      if (body.empty() || body[0] == '#') continue;
      auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
      std::string key = trim(body.substr(0, eq));
      std::string value = trim(body.substr(eq + 1));
      const Binding* bind = nullptr;
      for (const Binding& b : binds_)
        if (b.key == key) bind = &b;
      if (!bind) throw ConfigError(where + ": unknown key '" + key + "'");
      if (bind->opt->count() > 0) continue;
      if (!bind->apply(value)) throw ConfigError(where + ": bad value for '" + key + "'");
    }
  }

  void write_resolved(const fs::path& file) const {
    std::ofstream out(file);
    for (const Binding& b : binds_) out << b.key << "=" << b.render() << "\n";
    out.flush();
    if (!out) throw DataError("cannot write " + file.string());
  }

 private:
  CLI::App* cmd_;
  Options& opts_;
  std::vector<Binding> binds_;
};

graph::GridShape parse_shape(const std::string& s) {
  int rows = 0, cols = 0, used = -1;
  std::sscanf(s.c_str(), "%dx%d%n", &rows, &cols, &used);
  if (used != static_cast<int>(s.size()) || rows < 1 || cols < 1)
    throw ConfigError("bad shape '" + s + "', expected HxW");
  return {rows, cols};
}

reg::ObjectiveKind resolve_objective(const std::string& s) {
  reg::ObjectiveKind kind;
  if (!reg::parse_objective(s, kind))
    throw ConfigError("unknown objective '" + s + "' (baseline, o1, o2, o3)");
  return kind;
}

reg::Normalize resolve_normalize(const std::string& s) {
  if (s == "none") return reg::Normalize::None;
  if (s == "per-edge") return reg::Normalize::PerEdge;
  if (s == "per-pixel") return reg::Normalize::PerPixel;
  throw ConfigError("unknown normalize mode '" + s + "' (none, per-edge, per-pixel)");
}

graph::Connectivity resolve_connectivity(int c) {
  if (c == 4) return graph::Connectivity::N4;
  if (c == 8) return graph::Connectivity::N8;
  throw ConfigError("connectivity must be 4 or 8");
}

data::Dataset load_input_dataset(const Options& o) {
  if (o.synthetic < 0) throw ConfigError("--synthetic must be positive");
  if (o.synthetic > 0 && !o.data.empty())
    throw ConfigError("--data and --synthetic are mutually exclusive");
  if (o.synthetic > 0) return data::make_synthetic_dataset(o.synthetic, o.seed, parse_shape(o.shape));
  if (!o.data.empty()) return data::load_dataset(o.data);
  throw ConfigError("no input: pass --data DIR or --synthetic N");
}

int cmd_train(const Options& o, const OptSet& set) {
  net::NetworkSpec spec{o.depth, o.base_channels, 1};
  if (!spec.valid())
    throw ConfigError("bad network: depth " + std::to_string(o.depth) + ", base channels " +
                      std::to_string(o.base_channels));
  train::TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.base_lr = o.base_lr;
  cfg.lr_decay_every = o.decay_every;
  cfg.lr_decay_factor = o.decay_factor;
  cfg.batch_size = o.batch_size;
  cfg.objective = resolve_objective(o.objective);
  cfg.reg.lambda = o.lambda;
  cfg.reg.connectivity = resolve_connectivity(o.connectivity);
  cfg.reg.normalize = resolve_normalize(o.normalize);
  cfg.seed = o.seed;
  cfg.patches_per_image = o.patches;
  cfg.patch_size = o.patch_size;
  cfg.threads = o.threads;

  data::Dataset ds = load_input_dataset(o);
  fs::create_directories(o.out);
  set.write_resolved(fs::path(o.out) / "train.resolved.cfg");

  const std::vector<data::ImageSample>* val = ds.test.empty() ? nullptr : &ds.test;
  train::TrainResult res = train::train(ds.train, spec, cfg, val);

  net::save_checkpoint(fs::path(o.out) / "checkpoint.ckpt", spec, res.params);
  std::ofstream csv(fs::path(o.out) / "train_log.csv");
  train::write_train_log_csv(csv, res.log);
  csv.flush();
  if (!csv) throw DataError("cannot write train_log.csv under " + o.out);
  return 0;
}

int cmd_eval(const Options& o, const OptSet& set) {
  fs::path ckpath = o.checkpoint.empty() ? fs::path(o.out) / "checkpoint.ckpt" : fs::path(o.checkpoint);
  net::Checkpoint ck = net::load_checkpoint(ckpath);
  data::Dataset ds = load_input_dataset(o);
  if (ds.test.empty()) throw DataError("dataset has no test images");

  metrics::MetricsReport rep =
      train::evaluate(ck.params, ck.spec, ds.test, o.threshold, o.fov_only, o.threads);

  fs::create_directories(o.out);
  set.write_resolved(fs::path(o.out) / "eval.resolved.cfg");
  std::ofstream roc(fs::path(o.out) / "roc.csv");
  metrics::write_roc_csv(roc, rep.roc);
  roc.flush();
  if (!roc) throw DataError("cannot write roc.csv under " + o.out);

  std::printf("%s,%.6f,%.6f,%.6f,%.6f\n", o.name.c_str(), rep.sn, rep.sp, rep.acc, rep.auc);
  return 0;
}

int cmd_ec(const Options& o) {
  Image img = data::load_grayscale(o.image);
  Image b(img.rows, img.cols);
  for (std::size_t i = 0; i < img.size(); ++i) b.v[i] = img.v[i] >= o.threshold ? 1.0 : 0.0;
  long long e1 = reg::euler_characteristic_hard(b, reg::EcDirection::Dir1);
  long long e2 = reg::euler_characteristic_hard(b, reg::EcDirection::Dir2);
  double mean = 0.5 * static_cast<double>(e1 + e2);
  int components = reg::count_components_8(b);
  std::printf("%lld %lld %.1f %d\n", e1, e2, mean, components);
  return 0;
}

int cmd_synth(const Options& o, const OptSet& set) {
  if (o.count < 1) throw ConfigError("--count must be positive");
  graph::GridShape shape = parse_shape(o.shape);
  fs::create_directories(o.out);
  data::write_synthetic_dataset(o.out, o.count, o.seed, shape);
  set.write_resolved(fs::path(o.out) / "synth.resolved.cfg");
  return 0;
}

void add_model_flags(OptSet& s, Options& o) {
  s.add("depth", o.depth, "pooling levels");
  s.add("base-channels", o.base_channels, "channels at the first level");
}

void add_input_flags(OptSet& s, Options& o) {
  s.add("data", o.data, "dataset root (manifest.txt, images/, masks/, optional fov/)");
  s.add("synthetic", o.synthetic, "generate N synthetic images instead of reading --data");
  s.add("shape", o.shape, "synthetic image shape, HxW");
  s.add("seed", o.seed, "RNG seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vessel segmentation: train, evaluate, inspect topology, synthesize data"};
  app.require_subcommand(1);
  Options o;

  CLI::App* ct = app.add_subcommand("train", "train and write checkpoint, log, resolved config");
  OptSet st(ct, o);
  st.add("objective", o.objective, "baseline, o1 (graph smoothness), o2 (Laplacian residual), o3 (topology)");
  st.add("lambda", o.lambda, "regularizer weight");
  st.add("normalize", o.normalize, "regularizer normalization: none, per-edge, per-pixel");
  st.add("connectivity", o.connectivity, "pixel graph connectivity, 4 or 8");
  st.add("epochs", o.epochs, "training epochs");
  st.add("base-lr", o.base_lr, "initial learning rate");
  st.add("decay-every", o.decay_every, "epochs between learning-rate drops");
  st.add("decay-factor", o.decay_factor, "learning-rate drop factor");
  st.add("batch-size", o.batch_size, "patches per batch");
  st.add("patches", o.patches, "patches sampled per training image");
  st.add("patch-size", o.patch_size, "square patch side");
  add_model_flags(st, o);
  add_input_flags(st, o);
  st.add("out", o.out, "output directory");
  st.add("threads", o.threads, "worker threads");

  CLI::App* ce = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  OptSet se(ce, o);
  se.add("checkpoint", o.checkpoint, "checkpoint path (default: <out>/checkpoint.ckpt)");
  add_input_flags(se, o);
  se.add("name", o.name, "row label");
  se.add("threshold", o.threshold, "classification threshold");
  se.add("fov-only", o.fov_only, "score only pixels inside the fov mask when present");
  se.add("out", o.out, "output directory");
  se.add("threads", o.threads, "worker threads");

  CLI::App* cc = app.add_subcommand("ec", "Euler characteristics of a thresholded image");
  OptSet sc(cc, o);
  cc->add_option("image", o.image, "grayscale image file")->required();
  sc.add("threshold", o.threshold, "foreground threshold");

  CLI::App* cs = app.add_subcommand("synth", "write a synthetic image/mask dataset");
  OptSet ss(cs, o);
  ss.add("out", o.out, "dataset directory to create");
  ss.add("count", o.count, "number of image/mask pairs");
  ss.add("seed", o.seed, "RNG seed");
  ss.add("shape", o.shape, "image shape, HxW");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (ct->parsed()) {
      st.overlay_config();
      return cmd_train(o, st);
    }
    if (ce->parsed()) {
      se.overlay_config();
      return cmd_eval(o, se);
    }
    if (cc->parsed()) {
      sc.overlay_config();
      return cmd_ec(o);
    }
    ss.overlay_config();
    return cmd_synth(o, ss);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
