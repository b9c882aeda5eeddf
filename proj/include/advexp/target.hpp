#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "advexp/text.hpp"

namespace advexp {

/// Transport or protocol failure talking to a target model or scorer.
class AdapterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Black-box classifier: class probabilities only, aligned with labels().
class TargetModel {
 public:
  virtual ~TargetModel() = default;
  [[nodiscard]] virtual std::vector<std::string> labels() const = 0;
  [[nodiscard]] virtual std::vector<double> predict(const LabeledText& text) const = 0;
  /// Whether predict() may be called from several threads at once.
  [[nodiscard]] virtual bool concurrent() const { return true; }
};

/// Counting front for a target: one increment per predict call, probability
/// validation, and serialisation for targets without concurrent support.
class TargetAdapter {
 public:
  explicit TargetAdapter(const TargetModel& model);

  std::vector<double> predict(const LabeledText& text);
  [[nodiscard]] long queries() const { return queries_.load(); }
  [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
  /// Index of `label` in labels(); throws std::invalid_argument if unknown.
  [[nodiscard]] int label_index(const std::string& label) const;
  [[nodiscard]] bool concurrent() const { return model_.concurrent(); }

 private:
  const TargetModel& model_;
  std::vector<std::string> labels_;
  std::atomic<long> queries_{0};
  std::mutex serial_;
};

/// Makes a non-concurrent target safe to share between adapters by
/// serialising its predict calls.
class SerializedTarget : public TargetModel {
 public:
  explicit SerializedTarget(const TargetModel& inner) : inner_(inner) {}
  [[nodiscard]] std::vector<std::string> labels() const override { return inner_.labels(); }
  [[nodiscard]] std::vector<double> predict(const LabeledText& text) const override {
    std::lock_guard lock(mu_);
    return inner_.predict(text);
  }

 private:
  const TargetModel& inner_;
  mutable std::mutex mu_;
};

/// Index of the largest entry; the first one on ties.
int argmax(const std::vector<double>& v);

/// Newline-delimited JSON over a child process's stdin/stdout or a Unix
/// socket. One request line, one response line.
class LineChannel {
 public:
  /// "exec:<shell command>" or "unix:<socket path>".
  explicit LineChannel(const std::string& endpoint);
  ~LineChannel();
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  std::string request(const std::string& line);

 private:
  int read_fd_ = -1;
  int write_fd_ = -1;
  int child_pid_ = -1;
  std::string buffer_;
  std::mutex mu_;
};

/// JSON payload sent to external processes: a string for single texts, a
/// two-element array for pairs.
std::string external_request(const LabeledText& text);

/// Target behind a LineChannel: {"text": ...} -> {"probs": [...]}.
class ExternalTarget : public TargetModel {
 public:
  ExternalTarget(const std::string& endpoint, std::vector<std::string> labels);
  [[nodiscard]] std::vector<std::string> labels() const override { return labels_; }
  [[nodiscard]] std::vector<double> predict(const LabeledText& text) const override;
  [[nodiscard]] bool concurrent() const override { return false; }

 private:
  std::vector<std::string> labels_;
  std::unique_ptr<LineChannel> channel_;
};

}  // namespace advexp
