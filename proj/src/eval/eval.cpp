// Copyright 2026 The tradeoff-sr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tsr/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsr::eval {

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr");
  const double mse = mean_sq_diff(a, b);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gauss_window() {
  std::vector<double> g(kWin);
  double s = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const double* p, int h, int w, const std::vector<double>& g) {
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[k] * p[y * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim");
  const int h = a.height(), w = a.width();
  if (h < kWin || w < kWin) fail(ErrorCode::TooSmall, "ssim needs images of at least 11x11, got " + to_string(a.shape()));
  const auto g = gauss_window();
  const std::size_t plane = a.shape().plane();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> aa(plane), bb(plane), ab(plane);
  for (int c = 0; c < a.channels(); ++c) {
    const double* pa = a.plane(c);
    const double* pb = b.plane(c);
    for (std::size_t j = 0; j < plane; ++j) {
      aa[j] = pa[j] * pa[j];
      bb[j] = pb[j] * pb[j];
      ab[j] = pa[j] * pb[j];
    }
    const auto mu_a = filter_valid(pa, h, w, g);
    const auto mu_b = filter_valid(pb, h, w, g);
    const auto s_aa = filter_valid(aa.data(), h, w, g);
    const auto s_bb = filter_valid(bb.data(), h, w, g);
    const auto s_ab = filter_valid(ab.data(), h, w, g);
    for (std::size_t j = 0; j < mu_a.size(); ++j) {
      const double ma = mu_a[j], mb = mu_b[j];
      const double va = s_aa[j] - ma * ma, vb = s_bb[j] - mb * mb, cov = s_ab[j] - ma * mb;
      const double num = (2.0 * (ma * mb) + kC1) * (2.0 * cov + kC2);
      const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

namespace {

void fit_gaussian(const std::vector<std::vector<double>>& rows, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const int d = static_cast<int>(rows.front().size());
  const int n = static_cast<int>(rows.size());
  mu = Eigen::VectorXd::Zero(d);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != d) fail(ErrorCode::ShapeMismatch, "feature vectors differ in length");
    mu += Eigen::Map<const Eigen::VectorXd>(r.data(), d);
  }
  mu /= n;
  cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& r : rows) {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(r.data(), d) - mu;
    cov.noalias() += x * x.transpose();
  }
  if (n > 1) cov /= (n - 1);
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptySet, "Frechet distance needs two non-empty sets");
  if (a.front().size() != b.front().size()) fail(ErrorCode::ShapeMismatch, "feature dimensions differ");
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  fit_gaussian(a, mu_a, cov_a);
  fit_gaussian(b, mu_b, cov_b);
  const Eigen::MatrixXd ra = sqrt_psd(cov_a);
  const Eigen::MatrixXd cross = sqrt_psd(ra * cov_b * ra);
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
  return std::max(0.0, d);
}

double toy_fid(std::span<const ImageTensor> set_a, std::span<const ImageTensor> set_b,
               const losses::PercepExtractor& ex) {
  if (set_a.empty() || set_b.empty()) fail(ErrorCode::EmptySet, "toy_fid needs two non-empty image sets");
  std::vector<std::vector<double>> fa, fb;
  for (const auto& x : set_a) fa.push_back(ex.embedding(x));
  for (const auto& x : set_b) fb.push_back(ex.embedding(x));
  return frechet_distance(fa, fb);
}

ImageTensor linear_blend(const ImageTensor& x_f, const ImageTensor& x_r, double alpha) {
  require_same_shape(x_f, x_r, "linear_blend");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in [0,1]");
  if (alpha == 0.0) return clamp01(x_r);
  if (alpha == 1.0) return clamp01(x_f);
  ImageTensor out(x_f.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = alpha * x_f.data()[i] + (1.0 - alpha) * x_r.data()[i];
  }
  return clamp01(out);
}

MetricRow measure(double key, std::span<const ImageTensor> outputs, std::span<const ImageTensor> gt,
                  const losses::PercepExtractor& ex) {
  if (outputs.size() != gt.size()) fail(ErrorCode::LengthMismatch, "outputs and ground truth differ in count");
  if (outputs.empty()) fail(ErrorCode::EmptySet, "nothing to measure");
  MetricRow row;
  row.key = key;
  const double inv = 1.0 / static_cast<double>(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    row.psnr += inv * psnr(outputs[i], gt[i]);
    row.ssim += inv * ssim(outputs[i], gt[i]);
    row.percep += inv * losses::percep_dist(ex, outputs[i], gt[i]);
  }
  row.toy_fid = toy_fid(outputs, gt, ex);
  return row;
}

std::vector<MetricRow> sweep_alpha(std::span<const ImageTensor> x_f, std::span<const ImageTensor> x_r,
                                   std::span<const ImageTensor> gt, std::span<const double> grid,
                                   const losses::PercepExtractor& ex) {
  if (x_f.size() != x_r.size() || x_f.size() != gt.size()) {
    fail(ErrorCode::LengthMismatch, "alpha sweep sets differ in length");
  }
  std::vector<MetricRow> rows;
  for (double alpha : grid) {
    std::vector<ImageTensor> out;
    out.reserve(x_f.size());
    for (std::size_t i = 0; i < x_f.size(); ++i) out.push_back(linear_blend(x_f[i], x_r[i], alpha));
    rows.push_back(measure(alpha, out, gt, ex));
  }
  return rows;
}

std::vector<double> default_t_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }
std::vector<double> default_alpha_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }

std::vector<MetricRow> sweep_t(const KnobModels& m, std::span<const ImageTensor> lr_set,
                               std::span<const ImageTensor> gt_set, std::span<const double> t_grid,
                               const losses::PercepExtractor& ex) {
  if (lr_set.size() != gt_set.size()) fail(ErrorCode::LengthMismatch, "LR and ground-truth sets differ in length");
  std::vector<diffusion::Restored> restored;
  restored.reserve(lr_set.size());
  for (const auto& lr : lr_set) restored.push_back(diffusion::student_restore(m.stage1, *m.codec, lr, m.scale, m.cond));
  std::vector<MetricRow> rows;
  for (double t : t_grid) {
    const diffusion::Timestep tt(t);
    std::vector<ImageTensor> out;
    out.reserve(lr_set.size());
    for (const auto& r : restored) {
      out.push_back(t == 0.0 ? r.x0 : nets::decode(*m.codec, diffusion::knob_latent(m.stage2, r.z0s, tt, m.cond, m.steps)));
    }
    rows.push_back(measure(t, out, gt_set, ex));
  }
  return rows;
}

ImageTensor data_consistency_refine(const ImageTensor& x0, const ImageTensor& y,
                                    const degradation::DegradationSample& sample, int scale, double rho, int iters) {
  if (!(rho > 0.0)) fail(ErrorCode::InvalidArgument, "rho must be > 0");
  if (iters < 0) fail(ErrorCode::InvalidArgument, "iters must be >= 0");
  ImageTensor x = x0;
  for (int k = 0; k < iters; ++k) {
    Tensor r = degradation::apply_operator(x, sample.kernel, scale);
    require_same_shape(r, y, "data_consistency_refine");
    axpy(-1.0, y, r);
    const Tensor g = degradation::apply_operator_adjoint(r, sample.kernel, scale, x.height(), x.width());
    axpy(-rho, g, x);
  }
  return x;
}

double consistency_residual(const ImageTensor& x, const ImageTensor& y, const degradation::DegradationSample& sample,
                            int scale) {
  const Tensor ax = degradation::apply_operator(x, sample.kernel, scale);
  require_same_shape(ax, y, "consistency_residual");
  return l2_norm(sub(ax, y));
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "spearman inputs differ in length");
  if (a.size() < 2) fail(ErrorCode::TooSmall, "spearman needs at least two points");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace tsr::eval
