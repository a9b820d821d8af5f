#include "lfsep/recon.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace lfsep {

void ReconConfig::validate() const {
  if (nu && !(*nu >= 0.0)) throw InvalidArgument("ReconConfig: nu must be >= 0");
  if (!(tv_epsilon > 0.0)) throw InvalidArgument("ReconConfig: tv_epsilon must be > 0");
  if (!(step_size > 0.0)) throw InvalidArgument("ReconConfig: step_size must be > 0");
  if (max_iters < 1) throw InvalidArgument("ReconConfig: max_iters must be >= 1");
  if (!(rel_tol >= 0.0)) throw InvalidArgument("ReconConfig: rel_tol must be >= 0");
}

double ReconConfig::resolved_nu(const LightFieldImage& l) const {
  if (nu) return *nu;
  return 1e-3 * sum(l.plane(0)) / static_cast<double>(l.plane(0).size());
}

TvResult tv_value_grad(const Image& u, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("tv_value_grad: epsilon must be > 0");
  const int h = u.rows();
  const int w = u.cols();
  TvResult out{0.0, Image(h, w)};
  const double eps2 = epsilon * epsilon;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dx = c + 1 < w ? u(r, c + 1) - u(r, c) : 0.0;
      const double dy = r + 1 < h ? u(r + 1, c) - u(r, c) : 0.0;
      const double mag = std::sqrt(dx * dx + dy * dy + eps2);
      out.value += mag;
      const double gx = dx / mag;
      const double gy = dy / mag;
      if (c + 1 < w) {
        out.gradient(r, c + 1) += gx;
        out.gradient(r, c) -= gx;
      }
      if (r + 1 < h) {
        out.gradient(r + 1, c) += gy;
        out.gradient(r, c) -= gy;
      }
    }
  }
  return out;
}

namespace {

using Blocks = std::array<Image, 2>;

// Block sums are formed as block0 + block1 so that swapping the blocks leaves
// every iterate bit-identical.
double block_dot(const Blocks& a, const Blocks& b) { return dot(a[0], b[0]) + dot(a[1], b[1]); }

Blocks block_diff(const Blocks& a, const Blocks& b) { return {a[0] - b[0], a[1] - b[1]}; }

/// Smooth objective with a block projection.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual double value(const Blocks& x) = 0;
  virtual double value_grad(const Blocks& x, Blocks& grad) = 0;
  virtual void project(Blocks& x) = 0;
};

struct DescentSettings {
  double step_size = 1.0;
  int max_iters = 100;
  double rel_tol = 0.0;
};

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking along the projection arc. Every accepted step strictly
/// decreases the objective.
SolverTrace projected_descent(Problem& problem, Blocks& x, const DescentSettings& settings, const IterationLog& log) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  constexpr int kPatience = 3;

  SolverTrace trace;
  Blocks grad;
  double f = problem.value_grad(x, grad);
  if (!std::isfinite(f)) throw Diverged("solver: non-finite objective at the starting point");
  trace.objective.push_back(f);
  double step = settings.step_size;
  int quiet = 0;

  for (int it = 1; it <= settings.max_iters; ++it) {
    Blocks trial;
    double f_trial = std::numeric_limits<double>::quiet_NaN();
    bool accepted = false;
    bool stationary = false;
    bool saw_nonfinite = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      trial = x;
      axpy(trial[0], -step, grad[0]);
      axpy(trial[1], -step, grad[1]);
      problem.project(trial);
      const Blocks d = block_diff(trial, x);
      const double slope = block_dot(grad, d);
      if (!(slope < 0.0)) {
        stationary = true;
        break;
      }
      f_trial = problem.value(trial);
      if (!std::isfinite(f_trial)) {
        saw_nonfinite = true;
      } else if (f_trial < f && f_trial <= f + kArmijo * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (saw_nonfinite && !stationary) throw Diverged("solver: objective became non-finite; reduce step_size");
      trace.converged = true;
      break;
    }

    Blocks grad_new;
    const double f_new = problem.value_grad(trial, grad_new);
    const Blocks s = block_diff(trial, x);
    const Blocks y = block_diff(grad_new, grad);
    const double sy = block_dot(s, y);
    const double ss = block_dot(s, s);
    const double used_step = step;
    step = sy > 0.0 ? ss / sy : step * 2.0;
    step = std::clamp(step, 1e-20, 1e20);

    const double decrease = (f - f_new) / std::max(std::abs(f), std::numeric_limits<double>::min());
    x = std::move(trial);
    grad = std::move(grad_new);
    f = f_new;
    trace.objective.push_back(f);
    trace.steps.push_back(used_step);
    trace.iterations = it;
    if (log) log({it, f, used_step});

    quiet = decrease < settings.rel_tol ? quiet + 1 : 0;
    if (quiet >= kPatience) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

void check_inputs(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r) {
  if (l.channels() != 1) throw InvalidArgument("reconstruction expects a single-channel light field");
  if (!(bank_t.camera() == bank_r.camera())) throw InvalidArgument("reconstruction: banks use different cameras");
  if (l.extent() != bank_t.camera().sensor_size) throw InvalidArgument("reconstruction: observation size mismatch");
}

/// ||l - H_t M_t u_t - H_r M_r u_r||^2 + nu (TV(u_t) + TV(u_r)) over u >= 0.
/// Blur weights are optional (identity when absent).
class TextureProblem final : public Problem {
 public:
  TextureProblem(const Image& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r, const Image* m_t,
                 const Image* m_r, double nu, double eps)
      : l_(l), banks_{&bank_t, &bank_r}, kernels_{m_t, m_r}, nu_(nu), eps_(eps) {}

  double value(const Blocks& x) override {
    const Image res = residual(x);
    return dot(res, res) + nu_ * (tv_value_grad(x[0], eps_).value + tv_value_grad(x[1], eps_).value);
  }

  double value_grad(const Blocks& x, Blocks& grad) override {
    const Image res = residual(x);
    const TvResult tv_t = tv_value_grad(x[0], eps_);
    const TvResult tv_r = tv_value_grad(x[1], eps_);
    const std::array<const TvResult*, 2> tv{&tv_t, &tv_r};
    for (int b = 0; b < 2; ++b) {
      Image g = apply_psf_adjoint(*banks_[b], res);
      if (kernels_[b]) g = correlate_circular(g, *kernels_[b]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = -2.0 * g[i] + nu_ * tv[b]->gradient[i];
      grad[b] = std::move(g);
    }
    return dot(res, res) + nu_ * (tv_t.value + tv_r.value);
  }

  void project(Blocks& x) override {
    for (Image& layer : x) {
      for (double& v : layer) v = std::max(v, 0.0);
    }
  }

 private:
  Image residual(const Blocks& x) const {
    Image pred_t = apply_psf(*banks_[0], kernels_[0] ? convolve_circular(x[0], *kernels_[0]) : x[0]);
    Image pred_r = apply_psf(*banks_[1], kernels_[1] ? convolve_circular(x[1], *kernels_[1]) : x[1]);
    Image res = l_;
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= pred_t[i] + pred_r[i];
    return res;
  }

  const Image& l_;
  std::array<const PsfKernelBank*, 2> banks_;
  std::array<const Image*, 2> kernels_;
  double nu_;
  double eps_;
};

/// ||l - H_t (u_t * m_t) - H_r (u_r * m_r)||^2 over two probability simplices.
/// The problem has only 2 k^2 unknowns, so it is solved on its normal equations:
/// J(m) = m'Gm - 2 b'm + l'l with G and b assembled from one forward and one
/// adjoint operator application per kernel tap.
class KernelProblem final : public Problem {
 public:
  KernelProblem(const Image& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r, const Image& u_t,
                const Image& u_r, int k)
      : k_(k) {
    const std::array<const PsfKernelBank*, 2> banks{&bank_t, &bank_r};
    const std::array<const Image*, 2> textures{&u_t, &u_r};
    const int taps = k * k;
    gram_.resize(2 * taps, 2 * taps);
    rhs_.resize(2 * taps);
    const auto adjoint = [&](const Image& sensor, Eigen::Ref<Eigen::VectorXd> out) {
      for (int b = 0; b < 2; ++b) {
        const Image g = blur_kernel_adjoint(apply_psf_adjoint(*banks[b], sensor), *textures[b], k);
        for (int i = 0; i < taps; ++i) out(b * taps + i) = g[static_cast<std::size_t>(i)];
      }
    };
    adjoint(l, rhs_);
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < taps; ++i) {
        Image e(k, k);
        e[static_cast<std::size_t>(i)] = 1.0;
        adjoint(apply_psf(*banks[b], convolve_circular(*textures[b], e)), gram_.col(b * taps + i));
      }
    }
    // Symmetrize so that the quadratic form is exact to rounding.
    gram_ = (0.5 * (gram_ + gram_.transpose())).eval();
    constant_ = dot(l, l);
  }

  double value(const Blocks& x) override {
    const Eigen::VectorXd v = flatten(x);
    return constant_ - 2.0 * rhs_.dot(v) + v.dot(gram_ * v);
  }

  double value_grad(const Blocks& x, Blocks& grad) override {
    const Eigen::VectorXd v = flatten(x);
    const Eigen::VectorXd gv = gram_ * v;
    const Eigen::VectorXd g = 2.0 * (gv - rhs_);
    const int taps = k_ * k_;
    for (int b = 0; b < 2; ++b) {
      grad[b] = Image(k_, k_);
      for (int i = 0; i < taps; ++i) grad[b][static_cast<std::size_t>(i)] = g(b * taps + i);
    }
    return constant_ - 2.0 * rhs_.dot(v) + v.dot(gv);
  }

  void project(Blocks& x) override {
    for (Image& m : x) {
      const std::vector<double> p = project_simplex(m.values());
      std::copy(p.begin(), p.end(), m.begin());
    }
  }

 private:
  [[nodiscard]] Eigen::VectorXd flatten(const Blocks& x) const {
    const int taps = k_ * k_;
    Eigen::VectorXd v(2 * taps);
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < taps; ++i) v(b * taps + i) = x[b][static_cast<std::size_t>(i)];
    }
    return v;
  }

  int k_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
  double constant_ = 0.0;
};

}  // namespace

TextureVolume reconstruct_layers(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                                 const ReconConfig& rc, SolverTrace* trace, const IterationLog& log) {
  const BlurKernel identity = BlurKernel::delta(1);
  const LayerPair layers = solve_textures_given_blurs(l, bank_t, bank_r, identity, identity, rc, nullptr, trace, log);
  return {layers.t, layers.r, bank_t.depth(), bank_r.depth()};
}

LayerPair solve_textures_given_blurs(const LightFieldImage& l, const PsfKernelBank& bank_t,
                                     const PsfKernelBank& bank_r, const BlurKernel& m_t, const BlurKernel& m_r,
                                     const ReconConfig& rc, const LayerPair* init, SolverTrace* trace,
                                     const IterationLog& log) {
  rc.validate();
  check_inputs(l, bank_t, bank_r);
  const Extent tex = bank_t.camera().texture_size();
  // 1x1 kernels are the identity and skip the convolution entirely.
  const Image* wt = m_t.size() > 1 ? &m_t.weights() : nullptr;
  const Image* wr = m_r.size() > 1 ? &m_r.weights() : nullptr;
  TextureProblem problem(l.plane(0), bank_t, bank_r, wt, wr, rc.resolved_nu(l), rc.tv_epsilon);
  Blocks x{Image(tex), Image(tex)};
  if (init) {
    if (init->t.extent() != tex || init->r.extent() != tex) throw InvalidArgument("texture warm start has wrong shape");
    x = {init->t, init->r};
    problem.project(x);
  }
  SolverTrace local = projected_descent(problem, x, {rc.step_size, rc.max_iters, rc.rel_tol}, log);
  if (trace) *trace = std::move(local);
  return {std::move(x[0]), std::move(x[1])};
}

KernelPair solve_blurs_given_textures(const LightFieldImage& l, const PsfKernelBank& bank_t,
                                      const PsfKernelBank& bank_r, const Image& u_t, const Image& u_r, int k,
                                      const KernelSolveConfig& kc, const KernelPair* init, SolverTrace* trace,
                                      const IterationLog& log) {
  check_inputs(l, bank_t, bank_r);
  if (k < 1 || k % 2 == 0) throw InvalidArgument("solve_blurs_given_textures: kernel size must be odd and >= 1");
  const Extent tex = bank_t.camera().texture_size();
  if (u_t.extent() != tex || u_r.extent() != tex) throw InvalidArgument("solve_blurs_given_textures: texture shape");
  if (kc.max_iters < 1 || !(kc.step_size > 0.0)) throw InvalidArgument("KernelSolveConfig: invalid settings");
  KernelProblem problem(l.plane(0), bank_t, bank_r, u_t, u_r, k);
  Blocks x{BlurKernel::delta(k).weights(), BlurKernel::delta(k).weights()};
  if (init) {
    if (init->t.size() != k || init->r.size() != k) throw InvalidArgument("kernel warm start has wrong size");
    x = {init->t.weights(), init->r.weights()};
  }
  SolverTrace local = projected_descent(problem, x, {kc.step_size, kc.max_iters, kc.rel_tol}, log);
  if (trace) *trace = std::move(local);
  return {BlurKernel(std::move(x[0])), BlurKernel(std::move(x[1]))};
}

TextureObjective texture_objective(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                                   const Image& u_t, const Image& u_r, double nu, double tv_epsilon,
                                   const BlurKernel* m_t, const BlurKernel* m_r) {
  check_inputs(l, bank_t, bank_r);
  const Extent tex = bank_t.camera().texture_size();
  if (u_t.extent() != tex || u_r.extent() != tex) throw InvalidArgument("texture_objective: layer size mismatch");
  TextureProblem problem(l.plane(0), bank_t, bank_r, m_t ? &m_t->weights() : nullptr, m_r ? &m_r->weights() : nullptr,
                         nu, tv_epsilon);
  Blocks grad;
  const double value = problem.value_grad({u_t, u_r}, grad);
  return {value, std::move(grad[0]), std::move(grad[1])};
}

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("project_simplex: empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument("project_simplex: entries must be finite");
  }
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  const bool nonneg = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  if (nonneg && std::abs(total - 1.0) <= 1e-12) return {v.begin(), v.end()};

  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

double deblur_objective(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                        const Image& u_t, const Image& u_r, const BlurKernel& m_t, const BlurKernel& m_r, double nu,
                        double tv_epsilon) {
  check_inputs(l, bank_t, bank_r);
  TextureProblem problem(l.plane(0), bank_t, bank_r, &m_t.weights(), &m_r.weights(), nu, tv_epsilon);
  return problem.value({u_t, u_r});
}

DeblurState deblur_and_separate(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                                const ReconConfig& rc, int k, int outer_iters, const DeblurOptions& options,
                                const IterationLog& log) {
  rc.validate();
  check_inputs(l, bank_t, bank_r);
  if (k < 1 || k % 2 == 0) throw InvalidArgument("deblur_and_separate: kernel size must be odd and >= 1");
  if (outer_iters < 0) throw InvalidArgument("deblur_and_separate: outer_iters must be >= 0");
  const double nu = rc.resolved_nu(l);

  DeblurState state;
  state.m_t = BlurKernel::delta(k);
  state.m_r = BlurKernel::delta(k);
  try {
    const TextureVolume init = reconstruct_layers(l, bank_t, bank_r, rc);
    state.u_t = init.layer_t;
    state.u_r = init.layer_r;
  } catch (const Diverged&) {
    state.diverged = true;
    return state;
  }
  state.objective_trace.push_back(
      deblur_objective(l, bank_t, bank_r, state.u_t, state.u_r, state.m_t, state.m_r, nu, rc.tv_epsilon));

  ReconConfig inner = rc;
  inner.nu = nu;
  inner.max_iters = options.texture_iters;
  for (int it = 1; it <= outer_iters; ++it) {
    try {
      const KernelPair current{state.m_t, state.m_r};
      KernelPair kernels =
          solve_blurs_given_textures(l, bank_t, bank_r, state.u_t, state.u_r, k, options.kernel, &current);
      const LayerPair warm{state.u_t, state.u_r};
      LayerPair textures = solve_textures_given_blurs(l, bank_t, bank_r, kernels.t, kernels.r, inner, &warm);
      state.m_t = std::move(kernels.t);
      state.m_r = std::move(kernels.r);
      state.u_t = std::move(textures.t);
      state.u_r = std::move(textures.r);
    } catch (const Diverged&) {
      state.diverged = true;
      break;
    }
    const double f =
        deblur_objective(l, bank_t, bank_r, state.u_t, state.u_r, state.m_t, state.m_r, nu, rc.tv_epsilon);
    state.objective_trace.push_back(f);
    if (log) log({it, f, 0.0});
  }
  return state;
}

double ncc(const Image& estimate, const Image& truth) {
  require_same_shape(estimate, truth, "ncc");
  if (truth.empty()) throw UndefinedMetric("ncc: empty images");
  const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
  if (*lo == *hi) throw UndefinedMetric("ncc: reference texture is constant");
  const double n = static_cast<double>(truth.size());
  const double mean_e = sum(estimate) / n;
  const double mean_t = sum(truth) / n;
  double ee = 0.0;
  double tt = 0.0;
  double et = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double a = estimate[i] - mean_e;
    const double b = truth[i] - mean_t;
    ee += a * a;
    tt += b * b;
    et += a * b;
  }
  if (!(tt > 0.0)) throw UndefinedMetric("ncc: reference texture is constant");
  if (!(ee > 0.0)) return 0.0;
  return std::clamp(et / std::sqrt(ee * tt), -1.0, 1.0);
}

}  // namespace lfsep
