#include "rvcalign/registration.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <complex>
#include <mutex>
#include <numeric>

#include "rvcalign/geometry.hpp"
#include "rvcalign/parallel.hpp"

namespace rvcalign {

namespace {

Eigen::ArrayXd gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::ArrayXd k(2 * r + 1);
  for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  return k / k.sum();
}

void blur(Eigen::ArrayXXd& img, double sigma) {
  if (sigma <= 0) return;
  const Eigen::ArrayXd k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Eigen::ArrayXXd tmp = Eigen::ArrayXXd::Zero(img.rows(), img.cols());
  for (int j = 0; j < img.cols(); ++j)
    for (int i = 0; i < img.rows(); ++i) {
      const double v = img(i, j);
      if (v == 0.0) continue;
      for (int d = -r; d <= r; ++d) {
        const int ii = i + d;
        if (ii >= 0 && ii < img.rows()) tmp(ii, j) += v * k[d + r];
      }
    }
  img.setZero();
  for (int j = 0; j < tmp.cols(); ++j)
    for (int i = 0; i < tmp.rows(); ++i) {
      const double v = tmp(i, j);
      if (v == 0.0) continue;
      for (int d = -r; d <= r; ++d) {
        const int jj = j + d;
        if (jj >= 0 && jj < img.cols()) img(i, jj) += v * k[d + r];
      }
    }
}

}  // namespace

Raster rasterize(const PointCloud2& pc, double resolution, double blur_sigma) {
  if (pc.empty()) throw Error(ErrorCode::EmptyCloud, "cannot rasterize an empty cloud");
  if (!(resolution > 0)) throw Error(ErrorCode::InvalidArgument, "raster resolution must be positive");
  Eigen::AlignedBox2d box;
  for (const auto& p : pc.points) box.extend(p);
  const double pad = 3.0 * std::max(0.0, blur_sigma);
  Raster r;
  r.resolution = resolution;
  r.origin = box.min() - Vec2::Constant(pad * resolution);
  const Vec2 span = (box.max() - r.origin) / resolution;
  const int nx = static_cast<int>(std::ceil(span.x() + pad)) + 1;
  const int ny = static_cast<int>(std::ceil(span.y() + pad)) + 1;
  r.image = Eigen::ArrayXXd::Zero(nx, ny);
  for (const auto& p : pc.points) {
    const Eigen::Vector2i c = r.pixel_of(p);
    r.image(std::clamp(c.x(), 0, nx - 1), std::clamp(c.y(), 0, ny - 1)) = 1.0;
  }
  blur(r.image, blur_sigma);
  const double mx = r.image.maxCoeff();
  if (mx > 0) r.image /= mx;
  return r;
}

// ---------------------------------------------------------------------------
// Chamfer objective

ChamferIndex::ChamferIndex(const PointCloud2& target) : tree_(target.points) {
  if (target.empty()) throw Error(ErrorCode::EmptyCloud, "Chamfer target is empty");
}

double ChamferIndex::loss(const PointCloud2& source) const {
  if (source.empty()) throw Error(ErrorCode::EmptyCloud, "Chamfer source is empty");
  double sum = 0.0;
  for (const auto& x : source.points) sum += std::sqrt(tree_.nearest(x).dist_sq);
  return sum / static_cast<double>(source.size());
}

double ChamferIndex::loss(const Pose2d& pose, const PointCloud2& source) const {
  if (source.empty()) throw Error(ErrorCode::EmptyCloud, "Chamfer source is empty");
  const Matrix2<double> R = pose.rotation();
  double sum = 0.0;
  for (const auto& h : source.points) sum += std::sqrt(tree_.nearest(R * h + pose.translation()).dist_sq);
  return sum / static_cast<double>(source.size());
}

ChamferIndex::LossGradient ChamferIndex::loss_and_gradient(const Pose2d& pose, const PointCloud2& source) const {
  if (source.empty()) throw Error(ErrorCode::EmptyCloud, "Chamfer source is empty");
  const double c = std::cos(pose.theta()), s = std::sin(pose.theta());
  const Matrix2<double> R = pose.rotation();
  Matrix2<double> dR;
  dR << -s, -c, c, -s;
  LossGradient out;
  out.min_tie_gap = std::numeric_limits<double>::infinity();
  for (const auto& h : source.points) {
    const Vec2 q = R * h + pose.translation();
    const auto [first, second] = tree_.nearest_two(q);
    const double d = std::sqrt(first.dist_sq);
    out.loss += d;
    if (std::isfinite(second.dist_sq)) out.min_tie_gap = std::min(out.min_tie_gap, std::sqrt(second.dist_sq) - d);
    if (d == 0.0) continue;
    const Vec2 e = (q - tree_.point(first.index)) / d;
    out.gradient[0] += e.dot(dR * h);
    out.gradient[1] += e.x();
    out.gradient[2] += e.y();
  }
  const double n = static_cast<double>(source.size());
  out.loss /= n;
  out.gradient /= n;
  return out;
}

double chamfer_1d(const PointCloud2& X, const PointCloud2& Y) {
  if (X.empty() || Y.empty()) throw Error(ErrorCode::EmptyCloud, "chamfer_1d needs non-empty clouds");
  return ChamferIndex(Y).loss(X);
}

// ---------------------------------------------------------------------------
// NCC initialisation

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftBuffers {
  int nx = 0, ny = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  FftBuffers(int nx_, int ny_) : nx(nx_), ny(ny_) {
    const std::size_t nc = static_cast<std::size_t>(ny) * (nx / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    real = fftw_alloc_real(static_cast<std::size_t>(nx) * ny);
    spec = fftw_alloc_complex(nc);
    // Column-major (nx rows, ny cols) is row-major [ny][nx] to FFTW.
    forward = fftw_plan_dft_r2c_2d(ny, nx, real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(ny, nx, spec, real, FFTW_ESTIMATE);
  }
  ~FftBuffers() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
  std::size_t complex_size() const { return static_cast<std::size_t>(ny) * (nx / 2 + 1); }
};

struct Peak {
  double score;
  int angle_index;
  int ux, uy;
  Pose2d pose;
};

}  // namespace

std::vector<PoseCandidate> ncc_init(const PointCloud2& source, const PointCloud2& target, const NccOptions& opts) {
  if (source.empty() || target.empty()) throw Error(ErrorCode::EmptyCloud, "ncc_init needs non-empty clouds");
  if (opts.k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (!(opts.angle_step_deg > 0)) throw Error(ErrorCode::InvalidArgument, "angle step must be positive");

  const Raster base = rasterize(target, opts.resolution, opts.blur_sigma);
  const int margin = static_cast<int>(std::ceil(opts.search_margin / opts.resolution));
  const int mx = static_cast<int>(base.image.rows()) + 2 * margin;
  const int my = static_cast<int>(base.image.cols()) + 2 * margin;
  Eigen::ArrayXXd map = Eigen::ArrayXXd::Zero(mx, my);
  map.block(margin, margin, base.image.rows(), base.image.cols()) = base.image;
  const Vec2 map_origin = base.origin - Vec2::Constant(margin * opts.resolution);

  // Integral images of the map and its square, with a zero first row/col.
  Eigen::ArrayXXd s1 = Eigen::ArrayXXd::Zero(mx + 1, my + 1), s2 = s1;
  for (int j = 0; j < my; ++j)
    for (int i = 0; i < mx; ++i) {
      const double v = map(i, j);
      s1(i + 1, j + 1) = v + s1(i, j + 1) + s1(i + 1, j) - s1(i, j);
      s2(i + 1, j + 1) = v * v + s2(i, j + 1) + s2(i + 1, j) - s2(i, j);
    }
  auto window = [](const Eigen::ArrayXXd& s, int x, int y, int w, int h) {
    return s(x + w, y + h) - s(x, y + h) - s(x + w, y) + s(x, y);
  };

  FftBuffers fft(mx, my);
  Eigen::Map<Eigen::ArrayXXd>(fft.real, mx, my) = map;
  fftw_execute_dft_r2c(fft.forward, fft.real, fft.spec);
  std::vector<std::complex<double>> map_spec(fft.complex_size());
  for (std::size_t i = 0; i < map_spec.size(); ++i) map_spec[i] = {fft.spec[i][0], fft.spec[i][1]};

  const int n_angles = std::max(1, static_cast<int>(std::lround(360.0 / opts.angle_step_deg)));
  const double norm = 1.0 / (static_cast<double>(mx) * my);
  std::vector<Peak> peaks;
  Eigen::ArrayXXd score(mx, my);

  for (int a = 0; a < n_angles; ++a) {
    const double theta = deg2rad(a * opts.angle_step_deg);
    const PointCloud2 rotated = transform(Pose2d(theta, Vec2::Zero()), source);
    const Raster tmpl = rasterize(rotated, opts.resolution, opts.blur_sigma);
    const int tx = static_cast<int>(tmpl.image.rows()), ty = static_cast<int>(tmpl.image.cols());
    if (tx > mx || ty > my) continue;
    const double n = static_cast<double>(tx) * ty;
    Eigen::ArrayXXd zero_mean = tmpl.image - tmpl.image.mean();
    const double t_norm = std::sqrt(zero_mean.square().sum());
    if (t_norm <= 1e-12) continue;

    Eigen::Map<Eigen::ArrayXXd> buf(fft.real, mx, my);
    buf.setZero();
    buf.block(0, 0, tx, ty) = zero_mean;
    fftw_execute_dft_r2c(fft.forward, fft.real, fft.spec);
    for (std::size_t i = 0; i < map_spec.size(); ++i) {
      const std::complex<double> t(fft.spec[i][0], -fft.spec[i][1]);
      const std::complex<double> prod = t * map_spec[i];
      fft.spec[i][0] = prod.real();
      fft.spec[i][1] = prod.imag();
    }
    fftw_execute_dft_c2r(fft.backward, fft.spec, fft.real);

    const int vx = mx - tx + 1, vy = my - ty + 1;
    score.setZero();
    for (int uy = 0; uy < vy; ++uy)
      for (int ux = 0; ux < vx; ++ux) {
        const double sum = window(s1, ux, uy, tx, ty);
        const double var = window(s2, ux, uy, tx, ty) - sum * sum / n;
        if (var <= 1e-9) continue;
        score(ux, uy) = buf(ux, uy) * norm / (t_norm * std::sqrt(var));
      }

    std::vector<Peak> local;
    for (int uy = 0; uy < vy; ++uy)
      for (int ux = 0; ux < vx; ++ux) {
        const double v = score(ux, uy);
        if (v <= 0.0) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int x = ux + dx, y = uy + dy;
            if (x < 0 || y < 0 || x >= vx || y >= vy) continue;
            const double w = score(x, y);
            // Plateaus keep only their first pixel in scan order.
            if (w > v || (w == v && (dy < 0 || (dy == 0 && dx < 0)))) {
              is_max = false;
              break;
            }
          }
        if (!is_max) continue;
        const Vec2 t = map_origin + Vec2(ux, uy) * opts.resolution - tmpl.origin;
        local.push_back({v, a, ux, uy, Pose2d(theta, t)});
      }
    const std::size_t keep = std::min<std::size_t>(local.size(), static_cast<std::size_t>(opts.k));
    std::partial_sort(local.begin(), local.begin() + keep, local.end(),
                      [](const Peak& l, const Peak& r) { return l.score > r.score; });
    peaks.insert(peaks.end(), local.begin(), local.begin() + keep);
  }

  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& l, const Peak& r) {
    if (l.score != r.score) return l.score > r.score;
    if (l.angle_index != r.angle_index) return l.angle_index < r.angle_index;
    if (l.uy != r.uy) return l.uy < r.uy;
    return l.ux < r.ux;
  });

  const ChamferIndex index(target);
  std::vector<PoseCandidate> out;
  for (const auto& p : peaks) {
    if (static_cast<int>(out.size()) >= opts.k) break;
    bool suppressed = false;
    for (const auto& c : out)
      if (poses_close(p.pose, c.pose, opts.nms_rot_deg, opts.nms_trans)) {
        suppressed = true;
        break;
      }
    if (suppressed) continue;
    out.push_back({p.pose, index.loss(p.pose, source), p.score});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-start refinement

namespace {

struct CentredSource {
  std::vector<Vec2> local;  // h - centroid
  Vec2 centroid = Vec2::Zero();
  double scale = 1.0;  // RMS radius, balances the angle against translation
};

CentredSource centre(const PointCloud2& source) {
  CentredSource c;
  for (const auto& h : source.points) c.centroid += h;
  c.centroid /= static_cast<double>(source.size());
  double ss = 0.0;
  c.local.reserve(source.size());
  for (const auto& h : source.points) {
    c.local.push_back(h - c.centroid);
    ss += c.local.back().squaredNorm();
  }
  c.scale = std::max(0.1, std::sqrt(ss / static_cast<double>(source.size())));
  return c;
}

PoseCandidate descend(const CentredSource& src, const PointCloud2& source, const ChamferIndex& index,
                      const PoseCandidate& init, const OptimizerOptions& o, std::size_t& iters) {
  const KdTree2& tree = index.tree();
  const std::size_t n = src.local.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Vec2> corr(n);

  double theta = init.pose.theta();
  Vec2 u = rotation2(theta) * src.centroid + init.pose.translation();

  auto requery = [&](double th, const Vec2& uu) {
    const Matrix2<double> R = rotation2(th);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto nb = tree.nearest(R * src.local[i] + uu);
      corr[i] = tree.point(nb.index);
      sum += std::sqrt(nb.dist_sq);
    }
    return sum * inv_n;
  };
  auto surrogate = [&](double th, const Vec2& uu) {
    const Matrix2<double> R = rotation2(th);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += (R * src.local[i] + uu - corr[i]).norm();
    return sum * inv_n;
  };

  double loss = requery(theta, u);
  const double s2 = src.scale * src.scale;
  double step = 0.5 * o.initial_step;
  for (int it = 0; it < o.max_iters; ++it) {
    const double c = std::cos(theta), s = std::sin(theta);
    Matrix2<double> R, dR;
    R << c, -s, s, c;
    dR << -s, -c, c, -s;
    double g_theta = 0.0;
    Vec2 g_u = Vec2::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 r = R * src.local[i] + u - corr[i];
      const double d = r.norm();
      if (d == 0.0) continue;
      const Vec2 e = r / d;
      g_theta += e.dot(dR * src.local[i]);
      g_u += e;
    }
    g_theta *= inv_n;
    g_u *= inv_n;
    const double g_norm2 = g_theta * g_theta / s2 + g_u.squaredNorm();
    if (g_norm2 <= 0.0) break;

    // Each line search starts from twice the last accepted step.
    step *= 2.0;
    bool accepted = false;
    double next_theta = theta;
    Vec2 next_u = u;
    for (int b = 0; b < o.max_backtracks; ++b) {
      next_theta = theta - step * g_theta / s2;
      next_u = u - step * g_u;
      if (surrogate(next_theta, next_u) <= loss - o.armijo * step * g_norm2) {
        accepted = true;
        break;
      }
      step *= o.shrink;
    }
    if (!accepted) break;
    theta = next_theta;
    u = next_u;
    ++iters;
    const double next_loss = requery(theta, u);
    const double improvement = loss - next_loss;
    loss = next_loss;
    if (improvement < o.tol) break;
  }

  PoseCandidate out;
  out.pose = Pose2d(theta, u - rotation2(theta) * src.centroid);
  out.loss = index.loss(out.pose, source);
  out.ncc_score = init.ncc_score;
  return out;
}

PoseCandidate icp_single(const PointCloud2& source, const ChamferIndex& index, const PoseCandidate& init,
                         const IcpOptions& o, std::size_t& iters) {
  const KdTree2& tree = index.tree();
  const std::size_t n = source.size();
  const std::size_t keep =
      std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil((1.0 - o.trim_fraction) * static_cast<double>(n))));
  std::vector<Vec2> matched(n);
  std::vector<double> dist(n);
  std::vector<std::size_t> order(n);
  std::vector<Vec2> src_sel, dst_sel;
  src_sel.reserve(n);
  dst_sel.reserve(n);

  Pose2d pose = init.pose;
  for (int it = 0; it < o.max_iters; ++it) {
    const Matrix2<double> R = pose.rotation();
    for (std::size_t i = 0; i < n; ++i) {
      const auto nb = tree.nearest(R * source.points[i] + pose.translation());
      matched[i] = tree.point(nb.index);
      dist[i] = nb.dist_sq;
    }
    src_sel.clear();
    dst_sel.clear();
    if (keep < n) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                       [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
      std::vector<char> use(n, 0);
      for (std::size_t i = 0; i < keep; ++i) use[order[i]] = 1;
      for (std::size_t i = 0; i < n; ++i)
        if (use[i]) {
          src_sel.push_back(source.points[i]);
          dst_sel.push_back(matched[i]);
        }
    } else {
      src_sel.assign(source.points.begin(), source.points.end());
      dst_sel = matched;
    }
    const Pose2d next = fit_se2(src_sel, dst_sel);
    const double d_theta = std::abs(wrap_angle(next.theta() - pose.theta()));
    const double d_t = (next.translation() - pose.translation()).norm();
    pose = next;
    ++iters;
    if (d_theta < o.tol && d_t < o.tol) break;
  }
  PoseCandidate out;
  out.pose = pose;
  out.loss = index.loss(pose, source);
  out.ncc_score = init.ncc_score;
  return out;
}

template <typename Refine>
RegistrationResult run_multistart(const std::vector<PoseCandidate>& inits, int threads, Refine&& refine) {
  if (inits.empty()) throw Error(ErrorCode::InvalidArgument, "no initial poses");
  const auto start = std::chrono::steady_clock::now();
  std::vector<PoseCandidate> refined(inits.size());
  std::vector<std::size_t> iters(inits.size(), 0);
  parallel_for(inits.size(), threads, [&](std::size_t i) { refined[i] = refine(inits[i], iters[i]); });

  std::vector<std::size_t> order(inits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return refined[a].loss < refined[b].loss; });
  RegistrationResult res;
  for (std::size_t i : order) res.candidates.push_back(refined[i]);
  res.best = res.candidates.front();
  res.iterations = std::accumulate(iters.begin(), iters.end(), std::size_t{0});
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace

RegistrationResult optimize_poses(const PointCloud2& source, const ChamferIndex& target,
                                  const std::vector<PoseCandidate>& inits, const OptimizerOptions& opts) {
  if (source.empty()) throw Error(ErrorCode::EmptyCloud, "optimize_poses source is empty");
  const CentredSource src = centre(source);
  return run_multistart(inits, opts.threads, [&](const PoseCandidate& init, std::size_t& iters) {
    return descend(src, source, target, init, opts, iters);
  });
}

RegistrationResult optimize_poses(const PointCloud2& source, const PointCloud2& target,
                                  const std::vector<PoseCandidate>& inits, const OptimizerOptions& opts) {
  const ChamferIndex index(target);
  return optimize_poses(source, index, inits, opts);
}

RegistrationResult icp_register(const PointCloud2& source, const ChamferIndex& target,
                                const std::vector<PoseCandidate>& inits, const IcpOptions& opts) {
  if (source.empty()) throw Error(ErrorCode::EmptyCloud, "icp_register source is empty");
  if (!(opts.trim_fraction >= 0.0 && opts.trim_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "trim fraction must lie in [0, 1)");
  return run_multistart(inits, opts.threads, [&](const PoseCandidate& init, std::size_t& iters) {
    return icp_single(source, target, init, opts, iters);
  });
}

RegistrationResult icp_register(const PointCloud2& source, const PointCloud2& target,
                                const std::vector<PoseCandidate>& inits, const IcpOptions& opts) {
  const ChamferIndex index(target);
  return icp_register(source, index, inits, opts);
}

Pose2d fit_se2(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  if (src.size() != dst.size() || src.empty()) throw Error(ErrorCode::InvalidArgument, "fit_se2 size mismatch");
  Vec2 ms = Vec2::Zero(), md = Vec2::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms += src[i];
    md += dst[i];
  }
  ms /= static_cast<double>(src.size());
  md /= static_cast<double>(src.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec2 a = src[i] - ms, b = dst[i] - md;
    sxx += a.dot(b);
    sxy += a.x() * b.y() - a.y() * b.x();
  }
  const double theta = std::atan2(sxy, sxx);
  return Pose2d(theta, md - rotation2(theta) * ms);
}

}  // namespace rvcalign
