#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rfm {

enum class EncoderMode {
  OracleBaseFeatures,  // input is the 13 normalised base features
  HashedNgrams,        // input is a signed hashed bag of word/punctuation 1- and 2-grams
};

std::string to_string(EncoderMode mode);
EncoderMode parse_encoder_mode(std::string_view text);

struct EncoderConfig {
  EncoderMode mode = EncoderMode::HashedNgrams;
  std::size_t hash_dim = 2048;
  std::vector<std::size_t> hidden_layers{64};
  std::size_t feature_dim = 16;  // d
  std::uint64_t seed = 0;

  std::size_t input_dim() const;
  // Number of shared parameters e.
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

// Sparse input vector with strictly increasing indices.
struct SparseInput {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

// Tokens are lowercased words plus individual ASCII punctuation marks. Context
// and response tokens hash into separate namespaces; unigrams and bigrams of
// both are counted with a hash-derived sign, and the resulting vector is
// scaled to unit l2 norm.
SparseInput hash_ngrams(std::string_view context, std::string_view response, std::size_t hash_dim);

SparseInput dense_input(std::span<const double> values);

// Fully connected network: tanh hidden layers, linear output of width d.
// Parameters are stored contiguously; layer l holds its weight matrix
// (out x in, column-major) followed by its bias.
class Encoder {
 public:
  explicit Encoder(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  std::size_t layer_count() const { return shapes_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  // Post-activation output of every layer, kept for backpropagation.
  struct Trace {
    std::vector<Eigen::VectorXd> outputs;
  };

  Eigen::VectorXd forward(const SparseInput& input) const;
  Eigen::VectorXd forward(const SparseInput& input, Trace& trace) const;

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const SparseInput& input, const Trace& trace, const Eigen::VectorXd& grad_output,
                std::span<double> grad) const;

  // Output layer set to the rectangular identity (padding or truncating the
  // input to d). Requires a network without hidden layers.
  void set_identity();
  void zero_output_layer();

 private:
  struct Shape {
    std::size_t in, out, offset;
  };

  EncoderConfig config_;
  std::vector<Shape> shapes_;
  std::vector<double> params_;
};

}  // namespace rfm
