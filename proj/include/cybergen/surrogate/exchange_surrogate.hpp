#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cybergen::surrogate {

/// Maps manipulatable enzyme levels (mmol/g_b) to metabolic exchange fluxes.
/// Implementations must be safe to call concurrently.
class ExchangeSurrogate {
 public:
  virtual ~ExchangeSurrogate() = default;

  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual const std::vector<std::string>& label_names() const = 0;

  /// Writes output_size() fluxes into `fluxes`. No allocation on this path.
  virtual void evaluate(std::span<const double> enzymes, std::span<double> fluxes) const = 0;

  std::size_t label_index(const std::string& name) const {
    const auto& names = label_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw std::invalid_argument("surrogate has no label '" + name + "'");
  }
};

/// Closed-form stand-in, mostly for tests and quick studies.
class FunctionSurrogate final : public ExchangeSurrogate {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;

  FunctionSurrogate(std::size_t inputs, std::vector<std::string> labels, Fn fn)
      : inputs_(inputs), labels_(std::move(labels)), fn_(std::move(fn)) {}

  std::size_t input_size() const override { return inputs_; }
  std::size_t output_size() const override { return labels_.size(); }
  const std::vector<std::string>& label_names() const override { return labels_; }
  void evaluate(std::span<const double> enzymes, std::span<double> fluxes) const override { fn_(enzymes, fluxes); }

 private:
  std::size_t inputs_;
  std::vector<std::string> labels_;
  Fn fn_;
};

}  // namespace cybergen::surrogate
