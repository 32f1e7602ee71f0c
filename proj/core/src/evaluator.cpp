// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/evaluator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "edgederm/bundle.hpp"
#include "edgederm/compression.hpp"
#include "edgederm/dataset.hpp"
#include "edgederm/error.hpp"

namespace edgederm {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= classes_ ||
      static_cast<std::size_t>(predicted) >= classes_) {
    throw std::out_of_range("confusion matrix class out of range");
  }
  ++at(static_cast<std::size_t>(truth), static_cast<std::size_t>(predicted));
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < classes_; ++i) t += at(i, i);
  return t;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes();
  std::vector<ClassMetrics> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t predicted = 0;
    std::uint64_t actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += cm.at(j, c);
      actual += cm.at(c, j);
    }
    const std::uint64_t tp = cm.at(c, c);
    ClassMetrics& m = out[c];
    m.support = actual;
    m.precision = ratio(tp, predicted);
    m.recall = ratio(tp, actual);
    const double sum = m.precision + m.recall;
    m.f1 = sum == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / sum;
  }
  return out;
}

AveragedMetrics macro_metrics(const ConfusionMatrix& cm, Averaging mode) {
  const std::vector<ClassMetrics> per = per_class_metrics(cm);
  AveragedMetrics avg;
  double total_weight = 0.0;
  for (const ClassMetrics& m : per) {
    const double w = mode == Averaging::kMacro ? 1.0 : static_cast<double>(m.support);
    avg.precision += w * m.precision;
    avg.recall += w * m.recall;
    avg.f1 += w * m.f1;
    total_weight += w;
  }
  if (total_weight > 0.0) {
    avg.precision /= total_weight;
    avg.recall /= total_weight;
    avg.f1 /= total_weight;
  }
  return avg;
}

EvalReport build_report(std::span<const int> truth, std::span<const int> predicted, std::span<const double> losses,
                        Averaging mode) {
  if (truth.empty()) throw std::invalid_argument("cannot evaluate an empty sample set");
  if (truth.size() != predicted.size() || (!losses.empty() && losses.size() != truth.size())) {
    throw ShapeError("evaluation inputs have different lengths");
  }
  EvalReport r;
  r.n = truth.size();
  r.averaging = mode;
  for (std::size_t i = 0; i < truth.size(); ++i) r.confusion.add(truth[i], predicted[i]);
  r.accuracy = ratio(r.confusion.trace(), r.confusion.total());
  double loss = 0.0;
  for (double l : losses) loss += l;
  r.mean_loss = losses.empty() ? 0.0 : loss / static_cast<double>(losses.size());
  r.per_class = per_class_metrics(r.confusion);
  r.averaged = macro_metrics(r.confusion, mode);
  return r;
}

EvalReport evaluate_embeddings(const SoftmaxHead& head, const EmbeddingSet& data, Averaging mode) {
  std::vector<int> predicted(data.size());
  std::vector<double> losses(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> p = predict(head, data.rows.row(i));
    predicted[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    losses[i] = cross_entropy(p, data.labels[i]);
  }
  return build_report(data.labels, predicted, losses, mode);
}

EvalReport evaluate(const ModelBundle& bundle, const SoftmaxHead& head, std::span<const LabeledSample> samples,
                    Averaging mode, const EmbeddingOptions& options) {
  if (samples.empty()) throw std::invalid_argument("cannot evaluate an empty sample set");
  if (head.embedding_dim() != static_cast<std::size_t>(bundle.config.embedding_dim)) {
    throw ShapeError("head does not match the bundle's embedding dimension");
  }
  const EmbeddingSet data = compute_embeddings(dequantize_bundle(bundle), samples, options);
  return evaluate_embeddings(head, data, mode);
}

int percent_half_up(double fraction) { return static_cast<int>(std::floor(fraction * 100.0 + 0.5)); }

std::string render_report(const EvalReport& report, std::span<const std::string> labels, std::string_view model_name) {
  std::ostringstream os;
  const std::string name(model_name);
  const std::size_t name_width = std::max<std::size_t>(name.size(), 20) + 2;
  os << std::left << std::setw(static_cast<int>(name_width)) << "Model Architecture" << std::setw(20)
     << "Test Accuracy (%)" << std::setw(15) << "F1 Score (%)" << std::setw(16) << "Precision (%)"
     << "Recall (%)\n";
  os << std::left << std::setw(static_cast<int>(name_width)) << name << std::setw(20)
     << percent_half_up(report.accuracy) << std::setw(15) << percent_half_up(report.averaged.f1) << std::setw(16)
     << percent_half_up(report.averaged.precision) << percent_half_up(report.averaged.recall) << '\n';
  os << '\n'
     << "samples " << report.n << ", mean loss " << std::fixed << std::setprecision(4) << report.mean_loss
     << ", averaging " << (report.averaging == Averaging::kMacro ? "macro" : "weighted") << "\n\n";

  os << std::left << std::setw(24) << "class" << std::setw(12) << "precision" << std::setw(10) << "recall"
     << std::setw(8) << "f1" << "support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    os << std::left << std::setw(24) << (c < labels.size() ? labels[c] : std::to_string(c)) << std::setw(12)
       << std::setprecision(3) << m.precision << std::setw(10) << m.recall << std::setw(8) << m.f1 << m.support
       << '\n';
  }
  os << "\nconfusion (rows = true, columns = predicted)\n";
  const std::size_t k = report.confusion.classes();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) os << std::right << std::setw(7) << report.confusion.at(i, j);
    os << "   " << (i < labels.size() ? labels[i] : std::to_string(i)) << '\n';
  }
  return os.str();
}

std::string render_key_values(const EvalReport& report, std::span<const std::string> labels) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n=" << report.n << '\n'
     << "accuracy=" << report.accuracy << '\n'
     << "mean_loss=" << report.mean_loss << '\n'
     << "averaging=" << (report.averaging == Averaging::kMacro ? "macro" : "weighted") << '\n'
     << "precision=" << report.averaged.precision << '\n'
     << "recall=" << report.averaged.recall << '\n'
     << "f1=" << report.averaged.f1 << '\n';
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    std::string key = c < labels.size() ? labels[c] : std::to_string(c);
    std::replace(key.begin(), key.end(), ' ', '_');
    const ClassMetrics& m = report.per_class[c];
    os << "class." << key << ".precision=" << m.precision << '\n'
       << "class." << key << ".recall=" << m.recall << '\n'
       << "class." << key << ".f1=" << m.f1 << '\n'
       << "class." << key << ".support=" << m.support << '\n';
  }
  const std::size_t k = report.confusion.classes();
  for (std::size_t i = 0; i < k; ++i) {
    os << "confusion." << i << '=';
    for (std::size_t j = 0; j < k; ++j) os << (j ? "," : "") << report.confusion.at(i, j);
    os << '\n';
  }
  return os.str();
}

std::vector<ComparisonRow> literature_rows() {
  return {
      {"Benyahia et al.", 99.0},
      {"Qin et al.", 95.2},
      {"Ramlakhan & Shang", 66.7},
      {"Proposed Model", 78.0},
  };
}

std::string render_comparison(std::vector<ComparisonRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.accuracy_percent > b.accuracy_percent; });
  std::size_t width = 5;
  for (const ComparisonRow& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width + 2)) << "Model" << "Accuracy (%)\n";
  for (const ComparisonRow& r : rows) {
    const double tenths = std::floor(r.accuracy_percent * 10.0 + 0.5) / 10.0;
    os << std::left << std::setw(static_cast<int>(width + 2)) << r.name << std::fixed << std::setprecision(1)
       << tenths << '\n';
  }
  return os.str();
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

double parse_number(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw DataError(DataError::Kind::kMalformed, "epoch CSV line " + std::to_string(line) + ": bad number '" +
                                                     std::string(field) + "'");
  }
  return v;
}

constexpr std::string_view kCsvHeader = "epoch,train_loss,train_acc,val_loss,val_acc";

}  // namespace

std::string render_epoch_csv(std::span<const EpochRecord> records) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const EpochRecord& r : records) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy}) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

std::vector<EpochRecord> parse_epoch_csv(std::string_view csv) {
  std::vector<EpochRecord> records;
  std::size_t line_no = 0;
  while (!csv.empty()) {
    const std::size_t nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kCsvHeader) throw DataError(DataError::Kind::kMalformed, "unexpected epoch CSV header");
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) {
      throw DataError(DataError::Kind::kMalformed, "epoch CSV line " + std::to_string(line_no) + ": expected 5 fields");
    }
    EpochRecord r;
    const double epoch = parse_number(fields[0], line_no);
    r.epoch = static_cast<int>(epoch);
    r.train_loss = parse_number(fields[1], line_no);
    r.train_accuracy = parse_number(fields[2], line_no);
    r.val_loss = parse_number(fields[3], line_no);
    r.val_accuracy = parse_number(fields[4], line_no);
    records.push_back(r);
  }
  return records;
}

CurveArtifacts render_curves(std::span<const EpochRecord> records) {
  CurveArtifacts out;
  out.csv = render_epoch_csv(records);
  std::ostringstream os;
  os << "# accuracy and loss vs epoch\n# epoch train_acc val_acc train_loss val_loss\n";
  os << std::setprecision(17);
  for (const EpochRecord& r : records) {
    os << r.epoch << ' ' << r.train_accuracy << ' ' << r.val_accuracy << ' ' << r.train_loss << ' ' << r.val_loss
       << '\n';
  }
  out.plot_data = os.str();
  return out;
}

}  // namespace edgederm
