#include "metasre/tensor.hpp"

#include <cmath>
#include <string>

#include "metasre/error.hpp"

namespace metasre {

namespace {

constexpr std::string_view kKindNames[] = {
    "InvalidValue", "ShapeError",   "InvalidDistribution", "NotScalar",
    "SpanError",    "VocabError",   "EmptyCorpus",         "ConfigError",
    "EmptyBatch",   "NonFiniteGradient", "IndexError",     "ParseError",
    "LabelError",   "SplitError",   "DiagnosticsError",    "IoError",
};

}  // namespace

std::string_view to_string(ErrorKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    fail(ErrorKind::ShapeError, "tensor of shape [" + std::to_string(rows) + "x" +
                                    std::to_string(cols) + "] given " +
                                    std::to_string(values_.size()) + " values");
  }
}

double Tensor::item() const {
  if (values_.size() != 1) fail(ErrorKind::NotScalar, "item() on a non-scalar tensor");
  return values_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs(const Tensor& t) noexcept {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace metasre
