#include "cmcflow/metric.hpp"

#include <cmath>
#include <stdexcept>

namespace cmcflow {

Vec4 cross4(const Vec4& X, const Vec4& Y, const Vec4& W) {
  // q_i = det[X Y e_i W]: cofactor expansion along the third column.
  auto det3 = [](const Vec4& a, const Vec4& b, const Vec4& c, int skip) {
    double m[3][3];
    int r = 0;
    for (int j = 0; j < 4; ++j) {
      if (j == skip) continue;
      m[r][0] = a[j];
      m[r][1] = b[j];
      m[r][2] = c[j];
      ++r;
    }
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  Vec4 q;
  for (int i = 0; i < 4; ++i) {
    q[i] = ((i % 2 == 0) ? 1.0 : -1.0) * det3(X, Y, W, i);
  }
  return q;
}

Vec4 MetricModel::project(const Vec4& v) const {
  const double n = v.norm();
  if (n <= tube_radius) {
    throw std::domain_error("projection undefined: point outside tubular neighborhood");
  }
  return v / n;
}

Mat4 MetricModel::tangent_projector(const Vec4& y) const {
  return Mat4::Identity() - y * y.transpose();
}

Vec4 MetricModel::second_fundamental(const Vec4& y, const Vec4& X, const Vec4& Y) const {
  return -X.dot(Y) * y;
}

double MetricModel::curvature(const Vec4& y, const Vec4& X, const Vec4& Y, const Vec4& Z,
                              const Vec4& W) const {
  const Mat4 ric = ricci_matrix(y);
  const double scal = scalar_curvature(y);
  auto g = [&](const Vec4& a, const Vec4& b) { return metric_dot(y, a, b); };
  auto p = [&](const Vec4& a, const Vec4& b) {
    return a.dot(ric * b) - 0.25 * scal * g(a, b);
  };
  return p(X, W) * g(Y, Z) + p(Y, Z) * g(X, W) - p(X, Z) * g(Y, W) - p(Y, W) * g(X, Z);
}

Mat4 MetricModel::curvature_operator(const Vec4& y, const Vec4& Y) const {
  const Mat4 ric = ricci_matrix(y);
  const double scal = scalar_curvature(y);
  const double w = energy_weight(y);
  const Mat4 gm = w * tangent_projector(y);  // metric extended by zero on normals
  const Mat4 pm = ric - 0.25 * scal * gm;
  const Vec4 pY = pm * Y;
  const Vec4 gY = gm * Y;
  const double pYY = Y.dot(pY);
  const double gYY = Y.dot(gY);
  return gYY * pm + pYY * gm - pY * gY.transpose() - gY * pY.transpose();
}

namespace {

class RoundS3 final : public MetricModel {
 public:
  double total_volume() const override { return 2.0 * M_PI * M_PI; }
  double metric_dot(const Vec4&, const Vec4& X, const Vec4& Y) const override { return X.dot(Y); }
  Vec4 cross(const Vec4& y, const Vec4& X, const Vec4& Y) const override {
    return cross4(X, Y, y);
  }
  double volume_form(const Vec4& y, const Vec4& X, const Vec4& Y, const Vec4& Z) const override {
    Eigen::Matrix4d M;
    M.col(0) = X;
    M.col(1) = Y;
    M.col(2) = Z;
    M.col(3) = y;
    return M.determinant();
  }
  Vec4 volume_form_riesz(const Vec4& y, const Vec4& X, const Vec4& Y) const override {
    return cross4(X, Y, y);
  }
  double ricci(const Vec4&, const Vec4& X, const Vec4& Y) const override { return 2.0 * X.dot(Y); }
  Mat4 ricci_matrix(const Vec4& y) const override { return 2.0 * tangent_projector(y); }
  double scalar_curvature(const Vec4&) const override { return 6.0; }
  Vec4 tension_correction(const Vec4& y, const Vec4& G1, const Vec4& G2) const override {
    return (G1.squaredNorm() + G2.squaredNorm()) * y;
  }
  Vec4 cmc_star(const Vec4& y, const Vec4& G1, const Vec4& G2) const override {
    return cross4(G1, G2, y);
  }
  bool embedded_round() const override { return true; }
};

class ConformalRound final : public MetricModel {
 public:
  explicit ConformalRound(AmbientScalar phi) : phi_(std::move(phi)) {
    total_volume_ = integrate_total_volume();
  }

  double total_volume() const override { return total_volume_; }
  double metric_dot(const Vec4& y, const Vec4& X, const Vec4& Y) const override {
    return std::exp(2.0 * phi_.value(y)) * X.dot(Y);
  }
  Vec4 cross(const Vec4& y, const Vec4& X, const Vec4& Y) const override {
    return std::exp(phi_.value(y)) * cross4(X, Y, y);
  }
  double volume_form(const Vec4& y, const Vec4& X, const Vec4& Y, const Vec4& Z) const override {
    Eigen::Matrix4d M;
    M.col(0) = X;
    M.col(1) = Y;
    M.col(2) = Z;
    M.col(3) = y;
    return std::exp(3.0 * phi_.value(y)) * M.determinant();
  }
  Vec4 volume_form_riesz(const Vec4& y, const Vec4& X, const Vec4& Y) const override {
    return std::exp(3.0 * phi_.value(y)) * cross4(X, Y, y);
  }

  double ricci(const Vec4& y, const Vec4& X, const Vec4& Y) const override {
    return X.dot(ricci_matrix(y) * Y);
  }
  Mat4 ricci_matrix(const Vec4& y) const override {
    // Conformal change in dimension 3:
    //   Ric~ = Ric - (∇²φ - dφ⊗dφ) - (Δφ + |∇φ|²) g,
    // all intrinsic to the round S^3.
    const Mat4 P = tangent_projector(y);
    const Vec4 ga = phi_.gradient(y);
    const Vec4 gs = P * ga;  // intrinsic gradient
    const Mat4 Ha = phi_.hessian(y);
    const double radial = ga.dot(y);
    // Intrinsic Hessian on tangent vectors: Hess_a(X,Y) - <X,Y> <∇φ, y>.
    const Mat4 Hs = P * Ha * P - radial * P;
    const double lap = Hs.trace();
    const double grad2 = gs.squaredNorm();
    return 2.0 * P - (Hs - gs * gs.transpose()) - (lap + grad2) * P;
  }
  double scalar_curvature(const Vec4& y) const override {
    const Mat4 P = tangent_projector(y);
    const Vec4 ga = phi_.gradient(y);
    const Vec4 gs = P * ga;
    const Mat4 Hs = P * phi_.hessian(y) * P - ga.dot(y) * P;
    return std::exp(-2.0 * phi_.value(y)) * (6.0 - 4.0 * Hs.trace() - 2.0 * gs.squaredNorm());
  }

  double energy_weight(const Vec4& y) const override { return std::exp(2.0 * phi_.value(y)); }
  Vec4 energy_weight_gradient(const Vec4& y) const override {
    return 2.0 * std::exp(2.0 * phi_.value(y)) * phi_.gradient(y);
  }
  bool unit_energy_weight() const override { return false; }

  Vec4 tension_correction(const Vec4& y, const Vec4& G1, const Vec4& G2) const override {
    const double e = G1.squaredNorm() + G2.squaredNorm();
    const Vec4 gs = tangent_projector(y) * phi_.gradient(y);
    return e * y + 2.0 * (gs.dot(G1) * G1 + gs.dot(G2) * G2) - e * gs;
  }
  Vec4 cmc_star(const Vec4& y, const Vec4& G1, const Vec4& G2) const override {
    return std::exp(-phi_.value(y)) * cross4(G1, G2, y);
  }

 private:
  double integrate_total_volume() const {
    // Product Gauss-Legendre rule in hyperspherical coordinates,
    // dV = sin²θ1 sinθ2 dθ1 dθ2 dθ3.
    const int n1 = 48, n2 = 48, n3 = 64;
    auto gauss = [](int n, double a, double b, VecX& x, VecX& w) {
      x.resize(n);
      w.resize(n);
      for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
          double p0 = 1.0, p1 = 0.0;
          for (int j = 0; j < n; ++j) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
          }
          double dp = n * (t * p0 - p1) / (t * t - 1.0);
          double t1 = t;
          t = t1 - p0 / dp;
          if (std::abs(t - t1) < 1e-15) break;
        }
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * t * p1 - j * p2) / (j + 1.0);
        }
        double dp = n * (t * p0 - p1) / (t * t - 1.0);
        x[i] = 0.5 * (b - a) * t + 0.5 * (a + b);
        w[i] = (b - a) / ((1.0 - t * t) * dp * dp);
      }
    };
    VecX x1, w1, x2, w2, x3, w3;
    gauss(n1, 0.0, M_PI, x1, w1);
    gauss(n2, 0.0, M_PI, x2, w2);
    gauss(n3, 0.0, 2.0 * M_PI, x3, w3);
    double total = 0.0;
    for (int i = 0; i < n1; ++i) {
      const double s1 = std::sin(x1[i]), c1 = std::cos(x1[i]);
      double sub = 0.0;
      for (int j = 0; j < n2; ++j) {
        const double s2 = std::sin(x2[j]), c2 = std::cos(x2[j]);
        double inner = 0.0;
        for (int k = 0; k < n3; ++k) {
          const Vec4 y(s1 * s2 * std::cos(x3[k]), s1 * s2 * std::sin(x3[k]), s1 * c2, c1);
          inner += w3[k] * std::exp(3.0 * phi_.value(y));
        }
        sub += w2[j] * s2 * inner;
      }
      total += w1[i] * s1 * s1 * sub;
    }
    return total;
  }

  AmbientScalar phi_;
  double total_volume_ = 0.0;
};

}  // namespace

std::shared_ptr<MetricModel> round_s3() { return std::make_shared<RoundS3>(); }

std::shared_ptr<MetricModel> conformal_round(AmbientScalar phi) {
  return std::make_shared<ConformalRound>(std::move(phi));
}

}  // namespace cmcflow
