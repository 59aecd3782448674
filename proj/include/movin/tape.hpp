#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "movin/common.hpp"

namespace movin {

/// Reverse-mode autodiff over dense matrices, templated on the scalar type
/// (float for speed, double for finite-difference verification).
///
/// Usage: build a fresh tape per forward pass, mark trainable leaves with
/// input() and data with constant(), compose ops (each returns a node id),
/// then call backward() on a 1x1 result node and read grad() off the leaves.
/// Node ids are created in topological order, which is what backward()
/// relies on; gradients of constant-only subgraphs are never materialized.
template <class S>
class Tape {
 public:
  using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  int input(const MatX& v) { return leaf(v, true); }
  int constant(const MatX& v) { return leaf(v, false); }

  int add(int a, int b) {
    sameShape(a, b, "add");
    return make(val(a) + val(b), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  int sub(int a, int b) {
    sameShape(a, b, "sub");
    return make(val(a) - val(b), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, g);
      t.accumulate(b, MatX(-g));
    });
  }

  int mul(int a, int b) {
    sameShape(a, b, "mul");
    return make(val(a).cwiseProduct(val(b)), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, g.cwiseProduct(t.val(b)));
      t.accumulate(b, g.cwiseProduct(t.val(a)));
    });
  }

  int scale(int a, S factor) {
    return make(val(a) * factor, {a},
                [a, factor](Tape& t, const MatX& g) { t.accumulate(a, MatX(g * factor)); });
  }

  /// Multiply by a 1x1 node (used to blend expert parameters).
  int scaleBy(int a, int s) {
    if (val(s).rows() != 1 || val(s).cols() != 1) throw ValidationError("scaleBy: s must be 1x1");
    return make(val(a) * val(s)(0, 0), {a, s}, [a, s](Tape& t, const MatX& g) {
      t.accumulate(a, MatX(g * t.val(s)(0, 0)));
      MatX ds(1, 1);
      ds(0, 0) = g.cwiseProduct(t.val(a)).sum();
      t.accumulate(s, ds);
    });
  }

  int matmul(int a, int b) {
    if (val(a).cols() != val(b).rows()) throw ValidationError("matmul: inner dims disagree");
    return make(val(a) * val(b), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, g * t.val(b).transpose());
      t.accumulate(b, t.val(a).transpose() * g);
    });
  }

  int transpose(int a) {
    return make(val(a).transpose(), {a},
                [a](Tape& t, const MatX& g) { t.accumulate(a, g.transpose()); });
  }

  int relu(int a) {
    return make(val(a).cwiseMax(S(0)), {a}, [a](Tape& t, const MatX& g) {
      t.accumulate(a, (t.val(a).array() > S(0)).template cast<S>().matrix().cwiseProduct(g));
    });
  }

  int logistic(int a) {
    MatX y = (S(1) / (S(1) + (-val(a).array()).exp())).matrix();
    const int out = make(std::move(y), {a}, nullptr);
    nodes_[out].back = [a, out](Tape& t, const MatX& g) {
      const auto& y2 = t.val(out).array();
      t.accumulate(a, (g.array() * y2 * (S(1) - y2)).matrix());
    };
    return out;
  }

  int expOf(int a) {
    const int out = make(val(a).array().exp().matrix(), {a}, nullptr);
    nodes_[out].back = [a, out](Tape& t, const MatX& g) {
      t.accumulate(a, g.cwiseProduct(t.val(out)));
    };
    return out;
  }

  int clampOf(int a, S lo, S hi) {
    return make(val(a).cwiseMax(lo).cwiseMin(hi), {a}, [a, lo, hi](Tape& t, const MatX& g) {
      const auto& x = t.val(a).array();
      t.accumulate(a, (g.array() * (x > lo && x < hi).template cast<S>()).matrix());
    });
  }

  /// Broadcast-add a 1 x n row vector to every row of a.
  int addRowVector(int a, int v) {
    rowVectorFor(a, v, "addRowVector");
    return make((val(a).rowwise() + val(v).row(0)).eval(), {a, v},
                [a, v](Tape& t, const MatX& g) {
                  t.accumulate(a, g);
                  t.accumulate(v, MatX(g.colwise().sum()));
                });
  }

  /// Broadcast-multiply every row of a by a 1 x n row vector.
  int mulRowVector(int a, int v) {
    rowVectorFor(a, v, "mulRowVector");
    return make((val(a).array().rowwise() * val(v).row(0).array()).matrix(), {a, v},
                [a, v](Tape& t, const MatX& g) {
                  t.accumulate(a, (g.array().rowwise() * t.val(v).row(0).array()).matrix());
                  t.accumulate(v, MatX(g.cwiseProduct(t.val(a)).colwise().sum()));
                });
  }

  int block(int a, int r0, int c0, int rows, int cols) {
    if (r0 < 0 || c0 < 0 || r0 + rows > val(a).rows() || c0 + cols > val(a).cols())
      throw ValidationError("block: range out of bounds");
    return make(val(a).block(r0, c0, rows, cols), {a},
                [a, r0, c0, rows, cols](Tape& t, const MatX& g) {
                  MatX z = MatX::Zero(t.val(a).rows(), t.val(a).cols());
                  z.block(r0, c0, rows, cols) = g;
                  t.accumulate(a, z);
                });
  }

  /// Reinterpret the elements in row-major order as a rows x cols matrix.
  int reshapeRowMajor(int a, int rows, int cols) {
    if (val(a).size() != static_cast<Eigen::Index>(rows) * cols)
      throw ValidationError("reshapeRowMajor: element count mismatch");
    MatX y(rows, cols);
    copyRowMajor(val(a), y);
    return make(std::move(y), {a}, [a, rows, cols](Tape& t, const MatX& g) {
      (void)rows;
      (void)cols;
      MatX z(t.val(a).rows(), t.val(a).cols());
      copyRowMajor(g, z);
      t.accumulate(a, z);
    });
  }

  int concatRows(int a, int b) {
    if (val(a).cols() != val(b).cols()) throw ValidationError("concatRows: column mismatch");
    MatX y(val(a).rows() + val(b).rows(), val(a).cols());
    y.topRows(val(a).rows()) = val(a);
    y.bottomRows(val(b).rows()) = val(b);
    return make(std::move(y), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, MatX(g.topRows(t.val(a).rows())));
      t.accumulate(b, MatX(g.bottomRows(t.val(b).rows())));
    });
  }

  int concatCols(int a, int b) {
    if (val(a).rows() != val(b).rows()) throw ValidationError("concatCols: row mismatch");
    MatX y(val(a).rows(), val(a).cols() + val(b).cols());
    y.leftCols(val(a).cols()) = val(a);
    y.rightCols(val(b).cols()) = val(b);
    return make(std::move(y), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, MatX(g.leftCols(t.val(a).cols())));
      t.accumulate(b, MatX(g.rightCols(t.val(b).cols())));
    });
  }

  /// Gather rows by index (repeats allowed); backward scatter-adds.
  int selectRows(int a, std::vector<int> idx) {
    MatX y(static_cast<Eigen::Index>(idx.size()), val(a).cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= val(a).rows())
        throw ValidationError("selectRows: index out of range");
      y.row(static_cast<Eigen::Index>(k)) = val(a).row(idx[k]);
    }
    return make(std::move(y), {a}, [a, idx = std::move(idx)](Tape& t, const MatX& g) {
      MatX z = MatX::Zero(t.val(a).rows(), t.val(a).cols());
      for (std::size_t k = 0; k < idx.size(); ++k)
        z.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
      t.accumulate(a, z);
    });
  }

  int softmaxRows(int a) {
    MatX y = val(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const S m = y.row(r).maxCoeff();
      y.row(r) = (y.row(r).array() - m).exp();
      y.row(r) /= y.row(r).sum();
    }
    const int out = make(std::move(y), {a}, nullptr);
    nodes_[out].back = [a, out](Tape& t, const MatX& g) {
      const MatX& y2 = t.val(out);
      MatX z(y2.rows(), y2.cols());
      for (Eigen::Index r = 0; r < y2.rows(); ++r) {
        const S dot = g.row(r).dot(y2.row(r));
        z.row(r) = (y2.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
      t.accumulate(a, z);
    };
    return out;
  }

  /// Column-wise max over consecutive row blocks of size blockSize;
  /// output has rows/blockSize rows. Backward routes to the argmax rows.
  int blockRowsMax(int a, int blockSize) {
    const Eigen::Index rows = val(a).rows();
    if (blockSize < 1 || rows % blockSize != 0)
      throw ValidationError("blockRowsMax: rows must be a multiple of blockSize");
    const Eigen::Index nb = rows / blockSize;
    const Eigen::Index cols = val(a).cols();
    MatX y(nb, cols);
    std::vector<int> arg(static_cast<std::size_t>(nb * cols));
    for (Eigen::Index b = 0; b < nb; ++b)
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::Index best = b * blockSize;
        for (Eigen::Index r = b * blockSize + 1; r < (b + 1) * blockSize; ++r)
          if (val(a)(r, c) > val(a)(best, c)) best = r;
        y(b, c) = val(a)(best, c);
        arg[static_cast<std::size_t>(b * cols + c)] = static_cast<int>(best);
      }
    return make(std::move(y), {a}, [a, arg = std::move(arg), cols](Tape& t, const MatX& g) {
      MatX z = MatX::Zero(t.val(a).rows(), t.val(a).cols());
      for (Eigen::Index b = 0; b < g.rows(); ++b)
        for (Eigen::Index c = 0; c < cols; ++c)
          z(arg[static_cast<std::size_t>(b * cols + c)], c) += g(b, c);
      t.accumulate(a, z);
    });
  }

  /// Per-row standardization (x - mean) / sqrt(var + eps); affine scaling
  /// belongs to the caller via mulRowVector/addRowVector.
  int layerNormRows(int a, S eps = S(1e-5)) {
    const MatX& x = val(a);
    const Eigen::Index n = x.cols();
    MatX y(x.rows(), n);
    std::vector<S> inv(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const S m = x.row(r).mean();
      const S var = (x.row(r).array() - m).square().sum() / S(n);
      const S i = S(1) / std::sqrt(var + eps);
      inv[static_cast<std::size_t>(r)] = i;
      y.row(r) = ((x.row(r).array() - m) * i).matrix();
    }
    const int out = make(std::move(y), {a}, nullptr);
    nodes_[out].back = [a, out, inv = std::move(inv), n](Tape& t, const MatX& g) {
      const MatX& xh = t.val(out);
      MatX z(xh.rows(), n);
      for (Eigen::Index r = 0; r < xh.rows(); ++r) {
        const S gm = g.row(r).mean();
        const S gx = g.row(r).cwiseProduct(xh.row(r)).mean();
        z.row(r) =
            ((g.row(r).array() - gm - xh.row(r).array() * gx) * inv[static_cast<std::size_t>(r)])
                .matrix();
      }
      t.accumulate(a, z);
    };
    return out;
  }

  int sum(int a) {
    MatX y(1, 1);
    y(0, 0) = val(a).sum();
    return make(std::move(y), {a}, [a](Tape& t, const MatX& g) {
      t.accumulate(a, MatX::Constant(t.val(a).rows(), t.val(a).cols(), g(0, 0)));
    });
  }

  int sumAbs(int a) {
    MatX y(1, 1);
    y(0, 0) = val(a).cwiseAbs().sum();
    return make(std::move(y), {a}, [a](Tape& t, const MatX& g) {
      t.accumulate(a, (t.val(a).array().sign() * g(0, 0)).matrix());
    });
  }

  /// Normalize a single row vector; the norm is floored at 1e-8 so the
  /// degenerate direction keeps a finite (if approximate) gradient.
  int normalizeRow(int a) {
    if (val(a).rows() != 1) throw ValidationError("normalizeRow: expects one row");
    const S norm = std::max(val(a).norm(), S(1e-8));
    const int out = make(val(a) / norm, {a}, nullptr);
    nodes_[out].back = [a, out, norm](Tape& t, const MatX& g) {
      const MatX& y = t.val(out);
      t.accumulate(a, MatX((g - y * g.cwiseProduct(y).sum()) / norm));
    };
    return out;
  }

  /// Cross product of two 1x3 rows.
  int crossRow(int a, int b) {
    if (val(a).rows() != 1 || val(a).cols() != 3 || val(b).rows() != 1 || val(b).cols() != 3)
      throw ValidationError("crossRow: expects 1x3 rows");
    return make(cross3(val(a), val(b)), {a, b}, [a, b](Tape& t, const MatX& g) {
      t.accumulate(a, cross3(t.val(b), g));
      t.accumulate(b, cross3(g, t.val(a)));
    });
  }

  /// Seeds d(root)/d(root) = 1 and sweeps the tape once in reverse. The root
  /// must be 1x1. Gradients accumulate, so use a fresh tape per backward.
  void backward(int root) {
    if (root < 0 || root >= size()) throw ValidationError("backward: bad root node");
    if (val(root).rows() != 1 || val(root).cols() != 1)
      throw ValidationError("backward: root must be a scalar node");
    accumulate(root, MatX::Ones(1, 1));
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needsGrad || n.grad.size() == 0 || !n.back) continue;
      n.back(*this, n.grad);
    }
  }

  const MatX& val(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  /// Gradient of the last backward() root w.r.t. node i; zeros if the node
  /// was never reached.
  const MatX& grad(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) n.grad = MatX::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool needsGrad(int i) const { return nodes_[static_cast<std::size_t>(i)].needsGrad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  void accumulate(int i, const MatX& g) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needsGrad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

 private:
  struct Node {
    MatX value;
    MatX grad;
    std::function<void(Tape&, const MatX&)> back;
    bool needsGrad = false;
  };

  static MatX cross3(const MatX& a, const MatX& b) {
    MatX y(1, 3);
    y(0, 0) = a(0, 1) * b(0, 2) - a(0, 2) * b(0, 1);
    y(0, 1) = a(0, 2) * b(0, 0) - a(0, 0) * b(0, 2);
    y(0, 2) = a(0, 0) * b(0, 1) - a(0, 1) * b(0, 0);
    return y;
  }

  static void copyRowMajor(const MatX& src, MatX& dst) {
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < dst.rows(); ++r)
      for (Eigen::Index c = 0; c < dst.cols(); ++c) {
        dst(r, c) = src(k / src.cols(), k % src.cols());
        ++k;
      }
  }

  int leaf(const MatX& v, bool needsGrad) {
    Node n;
    n.value = v;
    n.needsGrad = needsGrad;
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  int make(MatX value, std::initializer_list<int> parents,
           std::function<void(Tape&, const MatX&)> back) {
    Node n;
    n.value = std::move(value);
    for (int p : parents) n.needsGrad = n.needsGrad || nodes_[static_cast<std::size_t>(p)].needsGrad;
    if (n.needsGrad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  void sameShape(int a, int b, const char* op) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ValidationError(std::string(op) + ": shape mismatch");
  }

  void rowVectorFor(int a, int v, const char* op) const {
    if (val(v).rows() != 1 || val(v).cols() != val(a).cols())
      throw ValidationError(std::string(op) + ": v must be 1 x cols(a)");
  }

  std::vector<Node> nodes_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace movin
