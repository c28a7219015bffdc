#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "reid/error.hpp"
#include "reid/numerics.hpp"
#include "reid/rng.hpp"

namespace reid {

enum class EncoderKind { linear, free_embedding };

inline const char* encoder_kind_name(EncoderKind k) {
  return k == EncoderKind::linear ? "linear" : "free_embedding";
}

struct OptimConfig {
  double learning_rate = 0.00035;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Trainable map from raw inputs to unit-norm embeddings.
///
/// linear:         theta is d_out x d_in, f(x) = normalize(theta * x).
/// free_embedding: theta is N x d_out, f(x_i) = normalize(theta[i]); the raw
///                 input is ignored and i is the dataset-wide instance index.
struct EncoderState {
  EncoderKind kind = EncoderKind::linear;
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  Mat theta;
  Mat adam_m;
  Mat adam_v;
  std::uint64_t step_count = 0;

  friend bool operator==(const EncoderState&, const EncoderState&) = default;
};

inline EncoderState make_linear_encoder(std::size_t d_in, std::size_t d_out, Rng& rng) {
  if (d_out < 2) throw Error(Errc::invalid_config, "d_out must be >= 2");
  if (d_in < 1) throw Error(Errc::invalid_config, "d_in must be >= 1");
  EncoderState s;
  s.kind = EncoderKind::linear;
  s.d_in = d_in;
  s.d_out = d_out;
  s.theta = Mat(d_out, d_in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& x : s.theta.values()) x = scale * (2.0 * rng.uniform() - 1.0);
  s.adam_m = Mat(d_out, d_in);
  s.adam_v = Mat(d_out, d_in);
  return s;
}

inline EncoderState make_free_embedding(std::size_t n_instances, std::size_t d_in,
                                        std::size_t d_out, Rng& rng) {
  if (d_out < 2) throw Error(Errc::invalid_config, "d_out must be >= 2");
  EncoderState s;
  s.kind = EncoderKind::free_embedding;
  s.d_in = d_in;
  s.d_out = d_out;
  s.theta = Mat(n_instances, d_out);
  Vec row(d_out);
  for (std::size_t i = 0; i < n_instances; ++i) {
    do {
      for (double& x : row) x = rng.normal();
    } while (norm2(row) < 1e-6);
    s.theta.set_row(i, l2_normalize(row));
  }
  s.adam_m = Mat(n_instances, d_out);
  s.adam_v = Mat(n_instances, d_out);
  return s;
}

/// Pre-normalization output z.
inline Vec encode_raw(const EncoderState& s, std::size_t index, std::span<const double> raw) {
  if (s.kind == EncoderKind::free_embedding) {
    if (index >= s.theta.rows()) {
      throw Error(Errc::index_out_of_range, "instance " + std::to_string(index) +
                                                " outside embedding table of " +
                                                std::to_string(s.theta.rows()));
    }
    const auto r = s.theta.row(index);
    return Vec(r.begin(), r.end());
  }
  if (raw.size() != s.d_in) {
    throw Error(Errc::dim_mismatch, "encoder expects d_in=" + std::to_string(s.d_in) + ", got " +
                                        std::to_string(raw.size()));
  }
  Vec z(s.d_out);
  for (std::size_t o = 0; o < s.d_out; ++o) z[o] = dot(s.theta.row(o), raw);
  return z;
}

inline Vec forward(const EncoderState& s, std::size_t index, std::span<const double> raw) {
  return l2_normalize(encode_raw(s, index, raw));
}

/// Adds d(<grad_f, f(x)>)/d(theta) into acc (same shape as theta), scaled by
/// `scale`. The normalization Jacobian is (I - f f^T) / |z|.
inline void accumulate_backward(const EncoderState& s, std::size_t index,
                                std::span<const double> raw, std::span<const double> grad_f,
                                Mat& acc, double scale = 1.0) {
  if (grad_f.size() != s.d_out) {
    throw Error(Errc::dim_mismatch, "gradient length " + std::to_string(grad_f.size()) +
                                        " != d_out " + std::to_string(s.d_out));
  }
  const Vec z = encode_raw(s, index, raw);
  const double n = norm2(z);
  if (!(n > kZeroNormThreshold)) throw Error(Errc::zero_vector, "encoder output is zero");
  Vec f = z;
  for (double& x : f) x /= n;
  const double radial = dot(f, grad_f);
  Vec gz(s.d_out);
  for (std::size_t o = 0; o < s.d_out; ++o) gz[o] = scale * (grad_f[o] - radial * f[o]) / n;

  if (s.kind == EncoderKind::free_embedding) {
    axpy(1.0, gz, acc.row(index));
    return;
  }
  for (std::size_t o = 0; o < s.d_out; ++o) axpy(gz[o], raw, acc.row(o));
}

inline Mat backward(const EncoderState& s, std::size_t index, std::span<const double> raw,
                    std::span<const double> grad_f) {
  Mat g(s.theta.rows(), s.theta.cols());
  accumulate_backward(s, index, raw, grad_f, g);
  return g;
}

/// Bias-corrected Adam.
inline void adam_step(EncoderState& s, const Mat& grads, const OptimConfig& cfg) {
  if (grads.rows() != s.theta.rows() || grads.cols() != s.theta.cols()) {
    throw Error(Errc::dim_mismatch, "gradient shape does not match parameters");
  }
  ++s.step_count;
  const double t = static_cast<double>(s.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto& th = s.theta.values();
  auto& m = s.adam_m.values();
  auto& v = s.adam_v.values();
  const auto& g = grads.values();
  for (std::size_t k = 0; k < th.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
    th[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint: <stem>.json manifest next to <stem>.bin holding theta as raw
// little-endian doubles in row-major order.

inline void save_checkpoint(const EncoderState& s, const std::filesystem::path& json_path) {
  auto bin_path = json_path;
  bin_path.replace_extension(".bin");
  {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error(Errc::io_error, "cannot write " + bin_path.string());
    for (double x : s.theta.values()) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
      bin.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
  nlohmann::ordered_json m;
  m["kind"] = encoder_kind_name(s.kind);
  m["d_in"] = s.d_in;
  m["d_out"] = s.d_out;
  m["rows"] = s.theta.rows();
  m["cols"] = s.theta.cols();
  m["step_count"] = s.step_count;
  m["dtype"] = "float64-le";
  m["data"] = bin_path.filename().string();
  std::ofstream out(json_path);
  if (!out) throw Error(Errc::io_error, "cannot write " + json_path.string());
  out << m.dump(2) << '\n';
}

/// Restores theta; optimizer moments come back zeroed.
inline EncoderState load_checkpoint(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(Errc::io_error, "cannot open " + json_path.string());
  nlohmann::json m;
  EncoderState s;
  std::filesystem::path bin_path;
  try {
    in >> m;
    const auto kind = m.at("kind").get<std::string>();
    if (kind == "linear") {
      s.kind = EncoderKind::linear;
    } else if (kind == "free_embedding") {
      s.kind = EncoderKind::free_embedding;
    } else {
      throw Error(Errc::parse_error, json_path.string() + ": unknown encoder kind " + kind);
    }
    s.d_in = m.at("d_in").get<std::size_t>();
    s.d_out = m.at("d_out").get<std::size_t>();
    s.theta = Mat(m.at("rows").get<std::size_t>(), m.at("cols").get<std::size_t>());
    s.step_count = m.value("step_count", std::uint64_t{0});
    bin_path = json_path.parent_path() / m.at("data").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, json_path.string() + ": " + e.what());
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error(Errc::io_error, "cannot open " + bin_path.string());
  for (double& x : s.theta.values()) {
    unsigned char bytes[8];
    if (!bin.read(reinterpret_cast<char*>(bytes), 8)) {
      throw Error(Errc::parse_error, bin_path.string() + ": truncated parameter file");
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    x = std::bit_cast<double>(bits);
  }
  s.adam_m = Mat(s.theta.rows(), s.theta.cols());
  s.adam_v = Mat(s.theta.rows(), s.theta.cols());
  return s;
}

}  // namespace reid
