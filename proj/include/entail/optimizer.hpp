#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "entail/checkpoint.hpp"
#include "entail/tensor.hpp"

namespace entail {

struct AdamConfig {
  scalar lr = scalar(0.001);
  scalar beta1 = scalar(0.9);
  scalar beta2 = scalar(0.999);
  scalar eps = scalar(1e-8);

  void validate() const {
    if (!(lr > 0)) throw ConfigError("adam: learning rate must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
      throw ConfigError("adam: momentum coefficients must lie in [0, 1)");
    }
    if (!(eps > 0)) throw ConfigError("adam: eps must be positive");
  }
};

inline scalar global_grad_norm(const std::vector<Parameter*>& params) {
  double sq = 0;
  for (const Parameter* p : params) {
    for (scalar g : p->grad.v) sq += double(g) * double(g);
  }
  const scalar norm = scalar(std::sqrt(sq));
  if (!std::isfinite(double(norm))) throw NumericError("gradient norm is not finite");
  return norm;
}

// Scales every gradient by max_norm / N when the global norm N exceeds
// max_norm; otherwise leaves them untouched. Returns N.
inline scalar clip_global_norm(const std::vector<Parameter*>& params, scalar max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip_global_norm: max_norm must be positive");
  const scalar norm = global_grad_norm(params);
  if (norm > max_norm) {
    const scalar factor = max_norm / norm;
    for (Parameter* p : params) {
      for (scalar& g : p->grad.v) g *= factor;
    }
  }
  return norm;
}

// ADAM with bias correction:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Gradients are zeroed after the update.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config)
      : params_(std::move(params)), config_(config) {
    config_.validate();
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
      m_.push_back(Tensor::zeros(p->value.shape));
      v_.push_back(Tensor::zeros(p->value.shape));
    }
  }

  std::uint64_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

  void step() {
    ++t_;
    const scalar c1 = scalar(1) - scalar(std::pow(double(config_.beta1), double(t_)));
    const scalar c2 = scalar(1) - scalar(std::pow(double(config_.beta2), double(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      if (p.grad.v.size() != p.value.v.size()) {
        throw ShapeError("adam: gradient shape mismatch for " + p.name);
      }
      for (std::size_t k = 0; k < p.value.v.size(); ++k) {
        const scalar g = p.grad.v[k];
        m_[i].v[k] = config_.beta1 * m_[i].v[k] + (scalar(1) - config_.beta1) * g;
        v_[i].v[k] = config_.beta2 * v_[i].v[k] + (scalar(1) - config_.beta2) * g * g;
        const scalar mhat = m_[i].v[k] / c1;
        const scalar vhat = v_[i].v[k] / c2;
        p.value.v[k] -= config_.lr * mhat / (scalar(std::sqrt(double(vhat))) + config_.eps);
      }
      require_finite(p.value, p.name);
      p.zero_grad();
    }
  }

  // Persisted in the shared tensor-record format so training can resume.
  void save(const std::filesystem::path& path, const Sha256& vocab_sha,
            nlohmann::json extra_meta = {}) const {
    TensorFile file;
    file.meta = {{"kind", "adam-state"},
                 {"t", t_},
                 {"lr", double(config_.lr)},
                 {"beta1", double(config_.beta1)},
                 {"beta2", double(config_.beta2)},
                 {"eps", double(config_.eps)}};
    if (!extra_meta.is_null()) file.meta["trainer"] = std::move(extra_meta);
    file.vocab_sha = vocab_sha;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      file.tensors.emplace_back("m:" + params_[i]->name, m_[i]);
      file.tensors.emplace_back("v:" + params_[i]->name, v_[i]);
    }
    write_tensor_file(file, path);
  }

  static Adam load(const std::filesystem::path& path, std::vector<Parameter*> params,
                   const Sha256& vocab_sha, nlohmann::json* trainer_meta = nullptr) {
    TensorFile file = read_tensor_file(path);
    if (file.meta.value("kind", "") != "adam-state") {
      throw CheckpointVersionError(path.string() + ": not an optimizer state file");
    }
    if (file.vocab_sha != vocab_sha) {
      throw CheckpointHashError(path.string() + ": vocabulary hash mismatch");
    }
    AdamConfig config;
    config.lr = scalar(file.meta.at("lr").get<double>());
    config.beta1 = scalar(file.meta.at("beta1").get<double>());
    config.beta2 = scalar(file.meta.at("beta2").get<double>());
    config.eps = scalar(file.meta.at("eps").get<double>());
    Adam adam(std::move(params), config);
    adam.t_ = file.meta.at("t").get<std::uint64_t>();
    for (std::size_t i = 0; i < adam.params_.size(); ++i) {
      bool found_m = false, found_v = false;
      for (auto& [name, tensor] : file.tensors) {
        if (name == "m:" + adam.params_[i]->name) {
          if (tensor.shape != adam.params_[i]->value.shape) {
            throw CheckpointVersionError(path.string() + ": shape mismatch for " + name);
          }
          adam.m_[i] = std::move(tensor);
          found_m = true;
        } else if (name == "v:" + adam.params_[i]->name) {
          if (tensor.shape != adam.params_[i]->value.shape) {
            throw CheckpointVersionError(path.string() + ": shape mismatch for " + name);
          }
          adam.v_[i] = std::move(tensor);
          found_v = true;
        }
      }
      if (!found_m || !found_v) {
        throw CheckpointVersionError(path.string() + ": moments missing for " +
                                     adam.params_[i]->name);
      }
    }
    if (trainer_meta != nullptr && file.meta.contains("trainer")) {
      *trainer_meta = file.meta["trainer"];
    }
    return adam;
  }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
  AdamConfig config_;
};

}  // namespace entail
