#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qamine {

/// Base class for all toolkit errors. `code()` is a stable machine-readable
/// name (e.g. "MalformedLine"); what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, const std::string& detail)
      : Error("MalformedLine", "line " + std::to_string(line_no) + ": " + detail),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class InvalidTarget : public Error {
 public:
  InvalidTarget(std::size_t line_no, const std::string& target)
      : Error("InvalidTarget",
              "line " + std::to_string(line_no) + ": unknown click target \"" + target + "\""),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class OrphanEvent : public Error {
 public:
  explicit OrphanEvent(const std::string& session_id)
      : Error("OrphanEvent", "session \"" + session_id + "\" has a serp/click event before any query") {}
};

class ZeroImpressions : public Error {
 public:
  ZeroImpressions() : Error("ZeroImpressions", "rate is undefined for zero impressions") {}
};

class DegenerateLabels : public Error {
 public:
  explicit DegenerateLabels(const std::string& detail = "input contains a single label class")
      : Error("DegenerateLabels", detail) {}
};

class NoPositives : public Error {
 public:
  NoPositives() : Error("NoPositives", "precision-recall curve needs at least one positive label") {}
};

class BadFeatureIndex : public Error {
 public:
  explicit BadFeatureIndex(int index)
      : Error("BadFeatureIndex", "feature index " + std::to_string(index) + " out of range") {}
};

class FeatureOrderMismatch : public Error {
 public:
  FeatureOrderMismatch(const std::string& expected, const std::string& got)
      : Error("FeatureOrderMismatch", "model expects \"" + expected + "\", input is \"" + got + "\"") {}
};

class UnsupportedModel : public Error {
 public:
  explicit UnsupportedModel(const std::string& detail)
      : Error("UnsupportedModel", detail) {}
};

class EmptyGroup : public Error {
 public:
  EmptyGroup() : Error("EmptyGroup", "impression group is empty") {}
};

class InvalidThresholds : public Error {
 public:
  InvalidThresholds(double tau_low, double tau_high)
      : Error("InvalidThresholds", "tau_low " + std::to_string(tau_low) + " exceeds tau_high " +
                                       std::to_string(tau_high)) {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t lhs, std::size_t rhs)
      : Error("LengthMismatch",
              "sequence lengths differ: " + std::to_string(lhs) + " vs " + std::to_string(rhs)) {}
};

class EmptyText : public Error {
 public:
  explicit EmptyText(const std::string& which)
      : Error("EmptyText", which + " has no tokens after normalization") {}
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("EmptyDataset", "training set is empty") {}
};

class LossTargetMismatch : public Error {
 public:
  explicit LossTargetMismatch(const std::string& detail)
      : Error("LossTargetMismatch", detail) {}
};

class EvenPanel : public Error {
 public:
  explicit EvenPanel(std::size_t n)
      : Error("EvenPanel", "majority voting needs an odd panel, got " + std::to_string(n)) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& detail) : Error("ConfigError", detail) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& detail) : Error("IoError", detail) {}
};

}  // namespace qamine
