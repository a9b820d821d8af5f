#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lfsep/grid.hpp"
#include "lfsep/lightfield.hpp"
#include "lfsep/operators.hpp"
#include "lfsep/optics.hpp"

namespace lfsep {

struct ReconConfig {
  /// TV weight; unset means 1e-3 times the mean observation intensity.
  std::optional<double> nu;
  double tv_epsilon = 1e-3;
  /// First trial step of the line search.
  double step_size = 1.0;
  int max_iters = 3000;
  /// Stop once the relative objective decrease stays below this for three iterations.
  double rel_tol = 1e-7;

  void validate() const;
  /// nu, or the observation-scaled default.
  [[nodiscard]] double resolved_nu(const LightFieldImage& l) const;
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double step = 0.0;
};

using IterationLog = std::function<void(const IterationRecord&)>;

/// Objective values of a solver run, starting with the initial point.
struct SolverTrace {
  std::vector<double> objective;
  std::vector<double> steps;
  int iterations = 0;
  bool converged = false;
};

struct TvResult {
  double value = 0.0;
  Image gradient;
};

/// Smoothed isotropic TV, sum sqrt(dx^2 + dy^2 + eps^2) with forward differences
/// and replicated borders, and its exact gradient.
TvResult tv_value_grad(const Image& u, double epsilon);

/// Minimizes ||l - H_t f_t - H_r f_r||^2 + nu TV(f_t) + nu TV(f_r) over f >= 0,
/// starting from zero. Throws Diverged on a non-finite objective.
TextureVolume reconstruct_layers(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                                 const ReconConfig& rc, SolverTrace* trace = nullptr, const IterationLog& log = {});

struct LayerPair {
  Image t;
  Image r;
};

/// Texture step with blur operators H M. `init` warm-starts the solve (zero otherwise).
LayerPair solve_textures_given_blurs(const LightFieldImage& l, const PsfKernelBank& bank_t,
                                     const PsfKernelBank& bank_r, const BlurKernel& m_t, const BlurKernel& m_r,
                                     const ReconConfig& rc, const LayerPair* init = nullptr,
                                     SolverTrace* trace = nullptr, const IterationLog& log = {});

struct KernelSolveConfig {
  int max_iters = 20000;
  double rel_tol = 1e-14;
  double step_size = 1.0;
};

struct KernelPair {
  BlurKernel t;
  BlurKernel r;
};

/// Kernel step: projected gradient descent on ||l - H_t U_t m_t - H_r U_r m_r||^2 over
/// the probability simplex. Starts from `init` or from delta kernels.
KernelPair solve_blurs_given_textures(const LightFieldImage& l, const PsfKernelBank& bank_t,
                                      const PsfKernelBank& bank_r, const Image& u_t, const Image& u_r, int k,
                                      const KernelSolveConfig& kc = {}, const KernelPair* init = nullptr,
                                      SolverTrace* trace = nullptr, const IterationLog& log = {});

/// Euclidean projection onto {x >= 0, sum x = 1}. Feasible inputs (sum within
/// 1e-12) are returned unchanged, which makes the projection idempotent.
std::vector<double> project_simplex(std::span<const double> v);

struct DeblurOptions {
  int texture_iters = 60;
  KernelSolveConfig kernel;
};

struct DeblurState {
  Image u_t;
  Image u_r;
  BlurKernel m_t = BlurKernel::delta(1);
  BlurKernel m_r = BlurKernel::delta(1);
  /// Full objective after initialization and after every outer iteration.
  std::vector<double> objective_trace;
  bool diverged = false;
};

/// Projected alternating minimization over sharp textures and blur kernels.
DeblurState deblur_and_separate(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                                const ReconConfig& rc, int k, int outer_iters, const DeblurOptions& options = {},
                                const IterationLog& log = {});

/// Texture-step objective ||l - H_t M_t u_t - H_r M_r u_r||^2 + nu (TV(u_t) + TV(u_r))
/// and its gradient, as used by the solvers. Null kernels are the identity.
struct TextureObjective {
  double value = 0.0;
  Image grad_t;
  Image grad_r;
};
TextureObjective texture_objective(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                                   const Image& u_t, const Image& u_r, double nu, double tv_epsilon,
                                   const BlurKernel* m_t = nullptr, const BlurKernel* m_r = nullptr);

/// Full blurred objective ||l - H_t M_t u_t - H_r M_r u_r||^2 + nu (TV(u_t) + TV(u_r)).
double deblur_objective(const LightFieldImage& l, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r,
                        const Image& u_t, const Image& u_r, const BlurKernel& m_t, const BlurKernel& m_r, double nu,
                        double tv_epsilon);

/// Zero-mean normalized cross-correlation. Throws UndefinedMetric for a constant truth.
double ncc(const Image& estimate, const Image& truth);

}  // namespace lfsep
