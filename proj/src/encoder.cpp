#include "rfm/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "rfm/error.hpp"
#include "rfm/random.hpp"
#include "rfm/text_features.hpp"

namespace rfm {
namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalpha(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
    if (c < 0x80 && std::ispunct(c)) out.emplace_back(1, ch);
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

void add_ngrams(std::map<std::uint32_t, double>& acc, std::string_view ns, const std::vector<std::string>& toks,
                std::size_t dim) {
  auto add = [&](std::uint64_t h) {
    const auto bucket = static_cast<std::uint32_t>(h % dim);
    const double sign = ((h >> 63) & 1) ? -1.0 : 1.0;
    acc[bucket] += sign;
  };
  const std::uint64_t base = fnv1a(ns);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    add(mix_seed(fnv1a(toks[i], base)));
    if (i + 1 < toks.size()) {
      add(mix_seed(fnv1a(toks[i + 1], fnv1a("\x1f", fnv1a(toks[i], base ^ 0x5bd1e995ULL)))));
    }
  }
}

}  // namespace

std::string to_string(EncoderMode mode) {
  return mode == EncoderMode::OracleBaseFeatures ? "oracle" : "hashed";
}

EncoderMode parse_encoder_mode(std::string_view text) {
  if (text == "oracle" || text == "oracle-base-features") return EncoderMode::OracleBaseFeatures;
  if (text == "hashed" || text == "hashed-ngrams") return EncoderMode::HashedNgrams;
  throw ConfigError("encoder.mode", "expected 'oracle' or 'hashed', got '" + std::string(text) + "'");
}

std::size_t EncoderConfig::input_dim() const {
  return mode == EncoderMode::OracleBaseFeatures ? kNumBaseFeatures : hash_dim;
}

std::size_t EncoderConfig::parameter_count() const {
  std::size_t in = input_dim(), total = 0;
  for (std::size_t h : hidden_layers) {
    total += (in + 1) * h;
    in = h;
  }
  return total + (in + 1) * feature_dim;
}

void EncoderConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("encoder.feature_dim", "must be at least 1");
  if (mode == EncoderMode::HashedNgrams && hash_dim < 1) throw ConfigError("encoder.hash_dim", "must be at least 1");
  for (std::size_t h : hidden_layers) {
    if (h < 1) throw ConfigError("encoder.hidden_layers", "widths must be positive");
  }
}

SparseInput hash_ngrams(std::string_view context, std::string_view response, std::size_t hash_dim) {
  std::map<std::uint32_t, double> acc;
  add_ngrams(acc, "ctx", tokens(context), hash_dim);
  add_ngrams(acc, "rsp", tokens(response), hash_dim);
  double norm = 0.0;
  for (const auto& [_, v] : acc) norm += v * v;
  norm = std::sqrt(norm);
  SparseInput out;
  for (const auto& [i, v] : acc) {
    if (v == 0.0) continue;
    out.index.push_back(i);
    out.value.push_back(v / norm);
  }
  return out;
}

SparseInput dense_input(std::span<const double> values) {
  SparseInput out;
  out.index.reserve(values.size());
  out.value.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.index.push_back(static_cast<std::uint32_t>(i));
    out.value.push_back(values[i]);
  }
  return out;
}

Encoder::Encoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.input_dim(), offset = 0;
  std::vector<std::size_t> widths = config_.hidden_layers;
  widths.push_back(config_.feature_dim);
  for (std::size_t out : widths) {
    shapes_.push_back({in, out, offset});
    offset += (in + 1) * out;
    in = out;
  }
  params_.assign(offset, 0.0);

  // Centred uniform with fan-in scaling; biases start at zero.
  Rng rng(derive_seed(config_.seed, "encoder-init"));
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    const double scale = std::sqrt(3.0 / static_cast<double>(shapes_[l].in));
    auto w = weight(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-scale, scale);
    }
  }
}

Eigen::Map<Eigen::MatrixXd> Encoder::weight(std::size_t l) {
  const auto& s = shapes_.at(l);
  return {params_.data() + s.offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)};
}

Eigen::Map<const Eigen::MatrixXd> Encoder::weight(std::size_t l) const {
  const auto& s = shapes_.at(l);
  return {params_.data() + s.offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)};
}

Eigen::Map<Eigen::VectorXd> Encoder::bias(std::size_t l) {
  const auto& s = shapes_.at(l);
  return {params_.data() + s.offset + s.in * s.out, static_cast<Eigen::Index>(s.out)};
}

Eigen::Map<const Eigen::VectorXd> Encoder::bias(std::size_t l) const {
  const auto& s = shapes_.at(l);
  return {params_.data() + s.offset + s.in * s.out, static_cast<Eigen::Index>(s.out)};
}

Eigen::VectorXd Encoder::forward(const SparseInput& input) const {
  Trace trace;
  return forward(input, trace);
}

Eigen::VectorXd Encoder::forward(const SparseInput& input, Trace& trace) const {
  trace.outputs.resize(shapes_.size());
  const std::size_t last = shapes_.size() - 1;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    Eigen::VectorXd z = bias(l);
    const auto w = weight(l);
    if (l == 0) {
      for (std::size_t k = 0; k < input.index.size(); ++k) {
        if (input.index[k] >= shapes_[0].in) throw DataError("encoder input index out of range");
        z.noalias() += input.value[k] * w.col(input.index[k]);
      }
    } else {
      z.noalias() += w * trace.outputs[l - 1];
    }
    trace.outputs[l] = l == last ? z : Eigen::VectorXd(z.array().tanh());
  }
  return trace.outputs[last];
}

void Encoder::backward(const SparseInput& input, const Trace& trace, const Eigen::VectorXd& grad_output,
                       std::span<double> grad) const {
  Eigen::VectorXd delta = grad_output;
  for (std::size_t l = shapes_.size(); l-- > 0;) {
    const auto& s = shapes_[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + s.offset, static_cast<Eigen::Index>(s.out),
                                   static_cast<Eigen::Index>(s.in));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + s.offset + s.in * s.out, static_cast<Eigen::Index>(s.out));
    gb += delta;
    if (l == 0) {
      for (std::size_t k = 0; k < input.index.size(); ++k) gw.col(input.index[k]) += input.value[k] * delta;
      break;
    }
    const auto& prev = trace.outputs[l - 1];
    gw.noalias() += delta * prev.transpose();
    Eigen::VectorXd back = weight(l).transpose() * delta;
    delta = back.array() * (1.0 - prev.array().square());
  }
}

void Encoder::set_identity() {
  if (!config_.hidden_layers.empty()) throw Error("set_identity requires an encoder without hidden layers");
  auto w = weight(0);
  w.setZero();
  for (Eigen::Index i = 0; i < std::min(w.rows(), w.cols()); ++i) w(i, i) = 1.0;
  bias(0).setZero();
}

void Encoder::zero_output_layer() {
  const std::size_t last = shapes_.size() - 1;
  weight(last).setZero();
  bias(last).setZero();
}

}  // namespace rfm
