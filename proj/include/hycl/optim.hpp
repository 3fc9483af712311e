#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hycl/common.hpp"

namespace hycl {

// A registered parameter: the optimizer mutates the matrix in place. Weight
// decay applies to weight matrices and the discriminator, not to biases or
// activation slopes.
template <typename S>
struct ParamSlot {
  std::string name;
  Matrix<S>* value = nullptr;
  bool decay = true;
};

template <typename S>
class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-5;
  };

  AdamW(std::vector<ParamSlot<S>> params, Options opts)
      : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
      m_.emplace_back(Matrix<S>::Zero(p.value->rows(), p.value->cols()));
      v_.emplace_back(Matrix<S>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  const std::vector<ParamSlot<S>>& params() const { return params_; }
  std::size_t step_count() const { return step_; }

  // Decoupled update: decay shrinks the parameter directly, the moment-based
  // step is taken from the raw gradient.
  void step(const std::vector<const Matrix<S>*>& grads) {
    check_contract(grads.size() == params_.size(), "AdamW::step: gradient count mismatch");
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Matrix<S>& theta = *params_[k].value;
      const Matrix<S>& g = *grads[k];
      check_contract(g.rows() == theta.rows() && g.cols() == theta.cols(),
                     "AdamW::step: gradient shape mismatch for " + params_[k].name);
      if (!g.allFinite())
        throw NumericError("AdamW::step: non-finite gradient for " + params_[k].name);

      m_[k] = static_cast<S>(opts_.beta1) * m_[k] + static_cast<S>(1.0 - opts_.beta1) * g;
      v_[k] = static_cast<S>(opts_.beta2) * v_[k] +
              static_cast<S>(1.0 - opts_.beta2) * g.cwiseProduct(g);

      if (params_[k].decay && opts_.weight_decay != 0.0)
        theta -= static_cast<S>(opts_.learning_rate * opts_.weight_decay) * theta;

      const Matrix<S> m_hat = m_[k] / static_cast<S>(bc1);
      const Matrix<S> denom = (v_[k] / static_cast<S>(bc2)).cwiseSqrt() +
                              Matrix<S>::Constant(theta.rows(), theta.cols(),
                                                  static_cast<S>(opts_.epsilon));
      theta -= static_cast<S>(opts_.learning_rate) * m_hat.cwiseQuotient(denom);
    }
  }

 private:
  std::vector<ParamSlot<S>> params_;
  Options opts_;
  std::vector<Matrix<S>> m_;
  std::vector<Matrix<S>> v_;
  std::size_t step_ = 0;
};

}  // namespace hycl
