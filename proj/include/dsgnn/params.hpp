#ifndef DSGNN_PARAMS_HPP
#define DSGNN_PARAMS_HPP

#include <Eigen/Dense>

#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "dsgnn/autodiff.hpp"

namespace dsgnn {

/// Named, shaped learnable parameters. Name order is lexicographic and
/// fixed, which makes checkpoints and gradient reports deterministic.
class ParameterStore {
 public:
  using Mat = Eigen::MatrixXd;

  Mat& create(const std::string& name, int rows, int cols, std::mt19937_64& rng) {
    // Uniform Glorot-style init scaled by fan-in + fan-out.
    double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-lim, lim);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
    auto [it, fresh] = params_.emplace(name, std::move(m));
    if (!fresh) throw std::invalid_argument("duplicate parameter: " + name);
    return it->second;
  }

  Mat& create_zeros(const std::string& name, int rows, int cols) {
    auto [it, fresh] = params_.emplace(name, Mat::Zero(rows, cols));
    if (!fresh) throw std::invalid_argument("duplicate parameter: " + name);
    return it->second;
  }

  Mat& create_constant(const std::string& name, int rows, int cols, double v) {
    auto [it, fresh] = params_.emplace(name, Mat::Constant(rows, cols, v));
    if (!fresh) throw std::invalid_argument("duplicate parameter: " + name);
    return it->second;
  }

  Mat& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
  }
  const Mat& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : params_) n += static_cast<std::size_t>(v.size());
    return n;
  }

 private:
  std::map<std::string, Mat> params_;
};

/// Binds store parameters to tape leaves lazily; remembers the mapping
/// so gradients can be read back by name after backward().
class ParamContext {
 public:
  ParamContext(ad::Tape& tape, const ParameterStore& store)
      : tape_(tape), store_(store) {}

  ad::Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = tape_.leaf(store_.at(name));
    bound_.emplace(name, v);
    return v;
  }

  const std::map<std::string, ad::Var>& bound() const { return bound_; }
  ad::Tape& tape() { return tape_; }

 private:
  ad::Tape& tape_;
  const ParameterStore& store_;
  std::map<std::string, ad::Var> bound_;
};

}  // namespace dsgnn

#endif
