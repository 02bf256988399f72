#include "rllc/optim.hpp"

#include <cmath>
#include <utility>

namespace rllc {

namespace {

void require_gradient(const Eigen::Ref<const Vec>& g) {
  if (!g.allFinite()) {
    throw NonFiniteError("optimizer step: non-finite gradient");
  }
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {
    if (lr <= 0.0) throw std::invalid_argument("sgd: learning rate must be positive");
  }
  Vec step(const Eigen::Ref<const Vec>& g) override {
    require_gradient(g);
    return -lr_ * g;
  }
  std::string name() const override { return "sgd(lr=" + fmt(lr_) + ")"; }

 private:
  double lr_;
};

class MomentumSgd final : public Optimizer {
 public:
  MomentumSgd(double lr, double beta) : lr_(lr), beta_(beta) {
    if (lr <= 0.0) throw std::invalid_argument("momentum-sgd: learning rate must be positive");
    if (beta < 0.0 || beta >= 1.0) {
      throw std::invalid_argument("momentum-sgd: decay must lie in [0, 1)");
    }
  }
  Vec step(const Eigen::Ref<const Vec>& g) override {
    require_gradient(g);
    if (m_.size() == 0) m_ = Vec::Zero(g.size());
    if (m_.size() != g.size()) throw DimensionError("momentum-sgd: gradient dimension changed");
    m_ = beta_ * m_ + g;
    return -lr_ * m_;
  }
  std::string name() const override {
    return "momentum-sgd(lr=" + fmt(lr_) + ",beta=" + fmt(beta_) + ")";
  }

 private:
  double lr_, beta_;
  Vec m_;
};

class Nag final : public Optimizer {
 public:
  Nag(double lr, double beta) : lr_(lr), beta_(beta) {
    if (lr <= 0.0) throw std::invalid_argument("nag: learning rate must be positive");
    if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("nag: decay must lie in [0, 1)");
  }
  Vec step(const Eigen::Ref<const Vec>& g) override {
    require_gradient(g);
    if (v_.size() == 0) v_ = Vec::Zero(g.size());
    if (v_.size() != g.size()) throw DimensionError("nag: gradient dimension changed");
    v_ = beta_ * v_ + lr_ * g;
    return -(lr_ * g + beta_ * v_);
  }
  std::string name() const override { return "nag(lr=" + fmt(lr_) + ",beta=" + fmt(beta_) + ")"; }

 private:
  double lr_, beta_;
  Vec v_;
};

class Adam final : public Optimizer {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0.0) throw std::invalid_argument("adam: learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw std::invalid_argument("adam: decay parameters must lie in [0, 1)");
    }
  }
  Vec step(const Eigen::Ref<const Vec>& g) override {
    require_gradient(g);
    if (m_.size() == 0) {
      m_ = Vec::Zero(g.size());
      v_ = Vec::Zero(g.size());
    }
    if (m_.size() != g.size()) throw DimensionError("adam: gradient dimension changed");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * g;
    v_ = beta2_ * v_ + (1.0 - beta2_) * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(beta1_, t_);
    const double vc = 1.0 - std::pow(beta2_, t_);
    Vec mhat = m_ / mc;
    Vec vhat = v_ / vc;
    return -lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
  }
  std::string name() const override {
    return "adam(lr=" + fmt(lr_) + ",b1=" + fmt(beta1_) + ",b2=" + fmt(beta2_) + ")";
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Vec m_, v_;
};

// Shared linear-memory evolution M <- M*B + g*aᵀ, sized on first use so the
// same optimizer object works for any parameter dimension.
struct LinearMemory {
  const Propagator propagator;

  explicit LinearMemory(Propagator p) : propagator(std::move(p)) {}

  void ensure_sized(Eigen::Index n) {
    if (memory.rows() == 0) {
      memory = Mat::Zero(n, propagator.dim());
    } else if (memory.rows() != n) {
      throw DimensionError("linear memory: gradient dimension changed");
    }
  }

  void advance(const Eigen::Ref<const Vec>& g) {
    memory = memory * propagator.B + g * propagator.a.transpose();
  }

  Mat memory;
};

class FixedLaw final : public Optimizer {
 public:
  FixedLaw(Propagator p, Vec law, double base_lr)
      : mem_(std::move(p)), law_(std::move(law)), base_lr_(base_lr) {
    if (law_.size() != mem_.propagator.dim()) {
      throw DimensionError("fixed-law: law length does not match propagator dimension");
    }
    if (base_lr <= 0.0) throw std::invalid_argument("fixed-law: base_lr must be positive");
  }

  Vec step(const Eigen::Ref<const Vec>& g) override {
    require_gradient(g);
    mem_.ensure_sized(g.size());
    mem_.advance(g);
    Vec delta = -base_lr_ * (mem_.memory * law_);
    require_finite(delta, "fixed-law step");
    return delta;
  }

  std::optional<StateProbe> probe() const override {
    StateProbe pr;
    pr.law = law_;
    pr.column_norms = mem_.memory.rows() ? Vec(mem_.memory.colwise().norm())
                                         : Vec(Vec::Zero(mem_.propagator.dim()));
    pr.rank_ratio = mem_.memory.rows() ? gram_eigen_ratio(mem_.memory) : 0.0;
    return pr;
  }

  std::string name() const override {
    return "fixed-law(" + mem_.propagator.label + ",lr=" + fmt(base_lr_) + ")";
  }

 private:
  LinearMemory mem_;
  Vec law_;
  double base_lr_;
};

// Three-phase law-correcting step shared by the linear and generic variants.
class RllcBase : public Optimizer {
 public:
  RllcBase(int k, const RllcOptions& options, std::string display_name)
      : k_(k), c1_(options.c1), c2_(options.c2), epsilon_(options.epsilon),
        law_(options.initial_law.size() ? options.initial_law : Vec(Vec::Ones(k))),
        name_(std::move(display_name)) {
    if (k < 1) throw std::invalid_argument("rllc: memory dimension must be at least 1");
    if (law_.size() != k) {
      throw DimensionError("rllc: initial law length does not match memory dimension");
    }
    if (c1_ <= 0.0) throw std::invalid_argument("rllc: c1 must be positive");
    if (c2_ < 0.0) throw std::invalid_argument("rllc: c2 must be nonnegative");
    if (epsilon_ < 0.0) throw std::invalid_argument("rllc: epsilon must be nonnegative");
  }

  Vec step(const Eigen::Ref<const Vec>& g) override {
    require_gradient(g);
    Mat& m = memory(g.size());
    skipped_last_ = false;
    if (c2_ != 0.0) {
      // Law correction uses the pre-update memory: the new gradient is
      // retrospective feedback on the previous step.
      auto coeffs = try_relaxed_pinv_apply(m, g, epsilon_);
      if (coeffs) {
        const Vec projection = m * *coeffs;
        const double alignment = projection.dot(g);
        min_alignment_ = min_alignment_ ? std::min(*min_alignment_, alignment) : alignment;
        law_ += c2_ * *coeffs;
      } else {
        // Rank-deficient memory with eps = 0: the projection coefficients are
        // undefined, so the law is left untouched for this step.
        skipped_last_ = true;
        ++skipped_;
      }
    }
    update_memory(m, g);
    Vec delta = -c1_ * (m * law_);
    require_finite(delta, "rllc step");
    return delta;
  }

  std::optional<StateProbe> probe() const override {
    StateProbe pr;
    pr.law = law_;
    pr.column_norms = memory_.rows() ? Vec(memory_.colwise().norm()) : Vec(Vec::Zero(k_));
    pr.rank_ratio = memory_.rows() ? gram_eigen_ratio(memory_) : 0.0;
    pr.law_update_skipped = skipped_last_;
    pr.skipped_law_updates = skipped_;
    pr.min_correction_alignment = min_alignment_;
    return pr;
  }

  std::string name() const override { return name_; }

 protected:
  virtual void update_memory(Mat& m, const Eigen::Ref<const Vec>& g) = 0;

  virtual Mat& memory(Eigen::Index n) {
    if (memory_.rows() == 0) {
      memory_ = Mat::Zero(n, k_);
    } else if (memory_.rows() != n) {
      throw DimensionError("rllc: gradient dimension changed");
    }
    return memory_;
  }

  const int k_;
  const double c1_, c2_, epsilon_;
  Vec law_;
  Mat memory_;

 private:
  std::string name_;
  bool skipped_last_ = false;
  int skipped_ = 0;
  std::optional<double> min_alignment_;
};

class RllcLinear final : public RllcBase {
 public:
  RllcLinear(Propagator p, const RllcOptions& options)
      : RllcBase(p.dim(), options,
                 "rllc(" + p.label + ",c1=" + fmt(options.c1) + ",c2=" + fmt(options.c2) + ")"),
        propagator_(std::move(p)) {}

 protected:
  void update_memory(Mat& m, const Eigen::Ref<const Vec>& g) override {
    m = m * propagator_.B + g * propagator_.a.transpose();
  }

 private:
  Propagator propagator_;
};

class RllcGeneric final : public RllcBase {
 public:
  RllcGeneric(MemoryUpdateRule update, int k, const RllcOptions& options, Mat initial_memory,
              std::any initial_hidden, std::string display_name)
      : RllcBase(k, options, std::move(display_name)),
        update_(std::move(update)),
        hidden_(std::move(initial_hidden)) {
    if (initial_memory.size() != 0) {
      if (initial_memory.cols() != k) {
        throw DimensionError("rllc-generic: initial memory must have k columns");
      }
      memory_ = std::move(initial_memory);
    }
  }

 protected:
  void update_memory(Mat& m, const Eigen::Ref<const Vec>& g) override {
    update_(m, hidden_, g);
    if (m.cols() != k_ || m.rows() != g.size()) {
      throw DimensionError("rllc-generic: memory rule changed the memory shape");
    }
  }

 private:
  MemoryUpdateRule update_;
  std::any hidden_;
};

}  // namespace

OptimizerPtr make_sgd(double lr) { return std::make_unique<Sgd>(lr); }

OptimizerPtr make_momentum_sgd(double lr, double beta) {
  return std::make_unique<MomentumSgd>(lr, beta);
}

OptimizerPtr make_nag(double lr, double beta) { return std::make_unique<Nag>(lr, beta); }

OptimizerPtr make_adam(double lr, double beta1, double beta2, double eps) {
  return std::make_unique<Adam>(lr, beta1, beta2, eps);
}

OptimizerPtr make_fixed_law(Propagator p, Vec law, double base_lr) {
  return std::make_unique<FixedLaw>(std::move(p), std::move(law), base_lr);
}

OptimizerPtr make_rllc(Propagator p, const RllcOptions& options) {
  return std::make_unique<RllcLinear>(std::move(p), options);
}

OptimizerPtr make_rllc_generic(MemoryUpdateRule update, int k, const RllcOptions& options,
                               Mat initial_memory, std::any initial_hidden, std::string name) {
  return std::make_unique<RllcGeneric>(std::move(update), k, options, std::move(initial_memory),
                                       std::move(initial_hidden), std::move(name));
}

}  // namespace rllc
