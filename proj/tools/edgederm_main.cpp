// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

// edgederm: train, compress, evaluate and run skin-lesion models.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 model-format error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edgederm/benchmark.hpp"
#include "edgederm/bundle.hpp"
#include "edgederm/classify.hpp"
#include "edgederm/compression.hpp"
#include "edgederm/dataset.hpp"
#include "edgederm/devices.hpp"
#include "edgederm/error.hpp"
#include "edgederm/evaluator.hpp"
#include "edgederm/head.hpp"
#include "edgederm/image_io.hpp"
#include "edgederm/service.hpp"
#include "edgederm/stream.hpp"

namespace fs = std::filesystem;
using namespace edgederm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitFormat = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// "synthetic:N" (N images per class) or a manifest / dataset directory.
std::vector<LabeledSample> load_samples(const std::string& source, std::uint64_t seed) {
  const std::string prefix = "synthetic:";
  if (source.rfind(prefix, 0) == 0) {
    int per_class = 0;
    try {
      per_class = std::stoi(source.substr(prefix.size()));
    } catch (const std::exception&) {
      throw std::invalid_argument("expected synthetic:N, got '" + source + "'");
    }
    if (per_class <= 0) throw std::invalid_argument("synthetic:N needs N > 0");
    return synth_dataset(per_class, seed);
  }
  return load_dataset(source);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kMissingFile, "cannot write " + path.string());
  out << text;
}

struct TrainArgs {
  std::string data;
  std::string output;
  int epochs = 10;
  double alpha = 1.0;
  int resolution = 224;
  bool tiny = false;
  std::string init;
  std::uint64_t seed = 0;
  double lr = 0.05;
  std::size_t batch = 32;
  double l2 = 0.0;
  bool balanced = false;
  std::string curves;
  unsigned workers = 1;
  std::string cache;
};

int run_train(const TrainArgs& a) {
  const std::vector<LabeledSample> samples = load_samples(a.data, a.seed);
  const DatasetSplits splits = stratified_split(samples, SplitSpec{0.8, 0.1, 0.1, a.seed});
  std::cout << "samples " << samples.size() << " (train " << splits.train.size() << ", val " << splits.val.size()
            << ", test " << splits.test.size() << ")\n";

  ModelBundle bundle;
  if (!a.init.empty()) {
    bundle = load(a.init);
    if (bundle.precision != Precision::kFloat32) bundle = dequantize_bundle(bundle);
    std::cout << "backbone from " << a.init << '\n';
  } else {
    bundle = make_bundle(a.tiny ? build_tiny_config() : build_default_config(a.alpha, a.resolution), a.seed);
  }
  std::cout << "backbone alpha " << bundle.config.alpha << ", resolution " << bundle.config.resolution << ", "
            << parameter_count(bundle.config) << " parameters, embedding " << bundle.config.embedding_dim << '\n';

  EmbeddingOptions emb;
  emb.workers = std::max(1u, a.workers);
  if (!a.cache.empty()) emb.cache_dir = fs::path(a.cache);
  const EmbeddingSet train = compute_embeddings(bundle, splits.train, emb);
  const EmbeddingSet val = compute_embeddings(bundle, splits.val, emb);

  TrainConfig config;
  config.epochs = a.epochs;
  config.learning_rate = a.lr;
  config.batch_size = std::min(a.batch, train.size());
  config.seed = a.seed;
  config.l2 = a.l2;
  config.inverse_frequency_weights = a.balanced;
  if (config.batch_size != a.batch) std::cout << "batch reduced to " << config.batch_size << " (train set size)\n";

  const TrainResult result = train_head(train, val, config);
  std::cout << "epoch 0 train_loss " << result.initial_train_loss << " train_acc " << result.initial_train_accuracy
            << '\n';
  for (const EpochRecord& r : result.records) {
    std::cout << "epoch " << r.epoch << " train_loss " << r.train_loss << " train_acc " << r.train_accuracy
              << " val_loss " << r.val_loss << " val_acc " << r.val_accuracy << '\n';
  }
  bundle.head = result.head;
  save(bundle, a.output);
  std::cout << "saved " << a.output << " (" << fs::file_size(a.output) << " bytes, checksum " << checksum(bundle)
            << ")\n";

  if (!a.curves.empty()) {
    const CurveArtifacts curves = render_curves(result.records);
    write_text(a.curves + ".csv", curves.csv);
    write_text(a.curves + ".dat", curves.plot_data);
    std::cout << "curves " << a.curves << ".csv, " << a.curves << ".dat\n";
  }
  if (!splits.test.empty()) {
    const EvalReport report = evaluate(bundle, bundle.head, splits.test, Averaging::kMacro, emb);
    std::cout << '\n' << render_report(report, bundle.labels, "MobileNetV2 (test split)");
  }
  return kExitOk;
}

int run_eval(const std::string& model, const std::string& data, bool weighted, bool key_values, unsigned workers) {
  const ModelBundle bundle = load(model);
  const std::vector<LabeledSample> samples = load_samples(data, 0);
  EmbeddingOptions emb;
  emb.workers = std::max(1u, workers);
  const EvalReport report =
      evaluate(bundle, bundle.head, samples, weighted ? Averaging::kWeighted : Averaging::kMacro, emb);
  if (key_values) {
    std::cout << render_key_values(report, bundle.labels);
  } else {
    std::cout << render_report(report, bundle.labels, fs::path(model).filename().string());
  }
  return kExitOk;
}

int run_quantize(const std::string& in, const std::string& out) {
  const ModelBundle bundle = load(in);
  const ModelBundle q = quantize_int8(bundle);
  save(q, out);
  const std::vector<DeviceBudget> devices = device_catalog();
  std::cout << "float32 " << fs::file_size(in) << " bytes -> int8 " << fs::file_size(out) << " bytes\n\n"
            << render_size_report(size_report(q, devices));
  return kExitOk;
}

int run_prune(const std::string& in, const std::string& out, double fraction) {
  const PruneResult result = prune_magnitude(load(in), fraction);
  save(result.bundle, out);
  std::cout << "pruned " << result.report.pruned << " of " << result.report.prunable << " weights, sparsity "
            << result.report.sparsity << '\n';
  return kExitOk;
}

int run_classify(const std::string& model, const std::vector<std::string>& images, std::size_t top, bool verbose,
                 bool as_json) {
  const Classifier classifier(load(model));
  for (const std::string& path : images) {
    const ClassificationResult result = classifier.classify(read_image(path), now_us(), top);
    if (as_json) {
      nlohmann::json line = nlohmann::json::parse(to_json(result));
      line["image"] = path;
      std::cout << line.dump() << '\n';
    } else {
      if (images.size() > 1) std::cout << path << '\n';
      std::cout << render_text(result, verbose);
      if (images.size() > 1) std::cout << '\n';
    }
  }
  return kExitOk;
}

int run_serve(const std::string& model, const std::string& source, const std::string& host, int port,
              int interval_ms) {
  auto classifier = std::make_shared<const Classifier>(load(model));
  std::unique_ptr<FrameSource> frames;
  if (source != "none") frames = open_source(parse_source_spec(source, std::chrono::milliseconds(interval_ms)));
  ServiceOptions options;
  options.host = host;
  options.port = port;
  ClassifyService service(classifier, std::move(frames), options);
  const int bound = service.start();
  std::cout << "serving " << model << " (" << classifier->checksum() << ") on http://" << host << ':' << bound
            << "\nsource " << source << "\n" << kDisclaimer << '\n'
            << std::flush;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted && service.running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  std::cout << "stopped\n";
  return kExitOk;
}

int run_bench(const std::string& model, std::size_t frames, std::uint64_t seed, bool as_json) {
  const Classifier classifier(load(model));
  const BenchmarkReport report = run_benchmark(classifier, frames, seed);
  if (as_json) {
    nlohmann::json verdicts = nlohmann::json::array();
    for (const DeviceVerdict& v : report.verdicts) {
      verdicts.push_back({{"device", v.device.name},
                          {"memory_bytes", v.device.memory_bytes},
                          {"clock_hz", v.device.clock_hz},
                          {"required_bytes", v.required_bytes},
                          {"fits", v.fits},
                          {"min_seconds_per_frame", v.min_seconds_per_frame}});
    }
    const nlohmann::json body = {{"frames", report.latencies_ms.size()},
                                 {"latencies_ms", report.latencies_ms},
                                 {"p50_ms", report.p50_ms},
                                 {"p95_ms", report.p95_ms},
                                 {"max_ms", report.max_ms},
                                 {"throughput_fps", report.throughput_fps},
                                 {"precision", to_string(report.precision)},
                                 {"model_bytes", report.model_bytes},
                                 {"peak_activation_bytes", report.peak_activation_bytes},
                                 {"verdicts", verdicts}};
    std::cout << body.dump(2) << '\n';
  } else {
    std::cout << render_benchmark(report);
  }
  return kExitOk;
}

int run_size(const std::string& model) {
  const std::vector<DeviceBudget> devices = device_catalog();
  std::cout << render_size_report(size_report(load(model), devices));
  return kExitOk;
}

int run_synth(const std::string& outdir, int per_class, std::uint64_t seed, std::size_t size) {
  const std::vector<LabeledSample> samples = synth_dataset(per_class, seed, size);
  write_dataset(samples, outdir);
  std::cout << "wrote " << samples.size() << " images to " << outdir << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgederm: skin-lesion classification for constrained devices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "edgederm 0.1.0");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the classification head on a frozen backbone");
  train_cmd->add_option("data", train.data, "Dataset directory, manifest CSV or synthetic:N")->required();
  train_cmd->add_option("-o,--output", train.output, "Output .edrm path")->required();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--alpha", train.alpha, "Width multiplier")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--resolution", train.resolution, "Input resolution (multiple of 32)")->capture_default_str();
  train_cmd->add_flag("--tiny", train.tiny, "Use the tiny test backbone");
  train_cmd->add_option("--init", train.init, "Take the backbone from an existing .edrm");
  train_cmd->add_option("--seed", train.seed, "Seed for init, split and shuffling")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--batch", train.batch, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--l2", train.l2, "L2 penalty on head weights")->capture_default_str();
  train_cmd->add_flag("--balanced", train.balanced, "Inverse-frequency class weights");
  train_cmd->add_option("--curves", train.curves, "Write <prefix>.csv and <prefix>.dat training curves");
  train_cmd->add_option("--workers", train.workers, "Embedding worker threads")->capture_default_str();
  train_cmd->add_option("--cache", train.cache, "Embedding cache directory");

  std::string model, data, input, output;
  bool weighted = false, key_values = false;
  unsigned eval_workers = 1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a labelled dataset");
  eval_cmd->add_option("model", model, "Model .edrm")->required();
  eval_cmd->add_option("data", data, "Dataset directory, manifest CSV or synthetic:N")->required();
  eval_cmd->add_flag("--weighted", weighted, "Support-weighted instead of macro averages");
  eval_cmd->add_flag("--kv", key_values, "key=value output");
  eval_cmd->add_option("--workers", eval_workers, "Embedding worker threads");

  CLI::App* quantize_cmd = app.add_subcommand("quantize", "Convert a float32 model to int8");
  quantize_cmd->add_option("input", input, "Float32 .edrm")->required();
  quantize_cmd->add_option("output", output, "Int8 .edrm")->required();

  double fraction = 0.0;
  CLI::App* prune_cmd = app.add_subcommand("prune", "Zero the smallest-magnitude backbone weights");
  prune_cmd->add_option("input", input, "Float32 .edrm")->required();
  prune_cmd->add_option("output", output, "Pruned .edrm")->required();
  prune_cmd->add_option("--fraction", fraction, "Fraction of weights to zero")->required()->check(CLI::Range(0.0, 1.0));

  std::vector<std::string> images;
  std::size_t top = kDefaultTopK;
  bool verbose = false, as_json = false;
  CLI::App* classify_cmd = app.add_subcommand("classify", "Classify image files");
  classify_cmd->add_option("model", model, "Model .edrm")->required();
  classify_cmd->add_option("images", images, "Image files")->required();
  classify_cmd->add_option("--top", top, "Entries to show")->capture_default_str()->check(CLI::Range(1, 7));
  classify_cmd->add_flag("--verbose", verbose, "Show every class with full probabilities");
  classify_cmd->add_flag("--json", as_json, "One JSON object per image");

  std::string source = "synthetic", host = "127.0.0.1";
  int port = 8077, interval_ms = 200;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Run the local classification service");
  serve_cmd->add_option("model", model, "Model .edrm")->required();
  serve_cmd->add_option("--source", source, "cam<N>, synthetic[:N], a directory, an image file or none")
      ->capture_default_str();
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--interval-ms", interval_ms, "Frame interval for non-camera sources")->capture_default_str();

  std::size_t frames = 100;
  std::uint64_t bench_seed = 0;
  bool bench_json = false;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Measure latency and device fit");
  bench_cmd->add_option("model", model, "Model .edrm")->required();
  bench_cmd->add_option("--frames", frames, "Timed frames (at least 10)")->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed, "Synthetic frame seed");
  bench_cmd->add_flag("--json", bench_json, "JSON output");

  CLI::App* size_cmd = app.add_subcommand("size", "Model size and device budget report");
  size_cmd->add_option("model", model, "Model .edrm")->required();

  int per_class = 10;
  std::size_t image_size = 48;
  std::uint64_t synth_seed = 0;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic labelled dataset");
  synth_cmd->add_option("outdir", output, "Output directory")->required();
  synth_cmd->add_option("--per-class", per_class, "Images per class")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed, "Seed");
  synth_cmd->add_option("--size", image_size, "Image side in pixels")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(model, data, weighted, key_values, eval_workers);
    if (*quantize_cmd) return run_quantize(input, output);
    if (*prune_cmd) return run_prune(input, output, fraction);
    if (*classify_cmd) return run_classify(model, images, top, verbose, as_json);
    if (*serve_cmd) return run_serve(model, source, host, port, interval_ms);
    if (*bench_cmd) return run_bench(model, frames, bench_seed, bench_json);
    if (*size_cmd) return run_size(model);
    if (*synth_cmd) return run_synth(output, per_class, synth_seed, image_size);
  } catch (const FormatError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const ShapeError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const SourceError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
