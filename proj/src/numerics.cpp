// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/numerics.hpp"

#include <cmath>
#include <random>

#include "tmpsim/errors.hpp"

namespace tmpsim {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ConfigError("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double av = a.at(i, k);
      if (av == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c.at(i, j) += av * b.at(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ConfigError("add: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ConfigError("hadamard: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

namespace {

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad_scalar(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
}

Matrix random_matrix(int rows, int cols, std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

}  // namespace

Matrix gelu(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data) v = gelu_scalar(v);
  return out;
}

Matrix gelu_grad(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data) v = gelu_grad_scalar(v);
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ConfigError("max_abs_diff: shape mismatch");
  double dev = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    dev = std::max(dev, std::abs(a.data[i] - b.data[i]));
  }
  return dev;
}

GradIdentityCheck allreduce_grad_identity(int workers, int rows, int cols, unsigned seed) {
  if (workers < 1 || rows < 1 || cols < 1) {
    throw ConfigError("allreduce_grad_identity: workers and shape must be positive");
  }
  std::mt19937 rng(seed);
  std::vector<Matrix> inputs;
  for (int i = 0; i < workers; ++i) inputs.push_back(random_matrix(rows, cols, rng, 1.0));
  const Matrix weights = random_matrix(rows, cols, rng, 1.0);

  auto reduce = [&](const std::vector<Matrix>& xs) {
    Matrix y(rows, cols);
    for (const Matrix& x : xs) y = add(y, x);
    return y;
  };
  // phi(y) = sum(w .* y) + 0.5 * sum(y .* y); d phi / d y = w + y.
  auto loss = [&](const Matrix& y) {
    double phi = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      phi += weights.data[i] * y.data[i] + 0.5 * y.data[i] * y.data[i];
    }
    return phi;
  };

  const Matrix y = reduce(inputs);
  const Matrix grad_y = add(weights, y);

  GradIdentityCheck check;
  const double h = 1e-5;
  for (int i = 0; i < workers; ++i) {
    // Reverse mode through the sum: the adjoint passes through unchanged.
    const Matrix grad_xi = grad_y;
    check.autodiff_deviation = std::max(check.autodiff_deviation, max_abs_diff(grad_xi, grad_y));
    Matrix fd(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        std::vector<Matrix> bumped = inputs;
        bumped[i].at(r, c) += h;
        const double up = loss(reduce(bumped));
        bumped[i].at(r, c) -= 2 * h;
        const double down = loss(reduce(bumped));
        fd.at(r, c) = (up - down) / (2 * h);
      }
    }
    check.finite_difference_deviation =
        std::max(check.finite_difference_deviation, max_abs_diff(fd, grad_y));
  }
  return check;
}

ToyShardedModel make_toy_sharded_model(int workers, int batch, int model_dim, int hidden_dim,
                                       unsigned seed) {
  if (workers < 1 || batch < 1 || model_dim < 1 || hidden_dim < workers ||
      hidden_dim % workers != 0) {
    throw ConfigError("toy model: hidden_dim must be a positive multiple of workers");
  }
  std::mt19937 rng(seed);
  ToyShardedModel model;
  model.workers = workers;
  model.input = random_matrix(batch, model_dim, rng, 1.0);
  const int shard = hidden_dim / workers;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(model_dim));
  const double s_out = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (int i = 0; i < workers; ++i) {
    model.w_in.push_back(random_matrix(model_dim, shard, rng, s_in));
    model.w_out.push_back(random_matrix(shard, model_dim, rng, s_out));
  }
  return model;
}

namespace {

Matrix sharded_forward(const ToyShardedModel& model) {
  Matrix z(model.input.rows, model.w_out.front().cols);
  for (int i = 0; i < model.workers; ++i) {
    const Matrix y = gelu(matmul(model.input, model.w_in[i]));
    z = add(z, matmul(y, model.w_out[i]));
  }
  return z;
}

struct Grads {
  std::vector<Matrix> w_in;
  std::vector<Matrix> w_out;
  Matrix input;
  double loss = 0.0;
};

// Downstream of the AllReduce: phi = 0.5 * sum(gelu(z)^2).
double downstream_loss(const Matrix& z) {
  double phi = 0.0;
  for (double v : z.data) {
    const double g = gelu_scalar(v);
    phi += 0.5 * g * g;
  }
  return phi;
}

Matrix downstream_grad(const Matrix& z) {
  Matrix g = z;
  for (double& v : g.data) v = gelu_scalar(v) * gelu_grad_scalar(v);
  return g;
}

// Backward through the sharded FFN given the loss gradient at the AllReduce
// output. Activations come from a replay that starts at the stored input.
Grads backward_from(const ToyShardedModel& model, const Matrix& z_for_loss) {
  Grads grads;
  grads.loss = downstream_loss(z_for_loss);
  const Matrix grad_z = downstream_grad(z_for_loss);
  Matrix grad_x(model.input.rows, model.input.cols);
  for (int i = 0; i < model.workers; ++i) {
    const Matrix pre = matmul(model.input, model.w_in[i]);  // replayed
    const Matrix y = gelu(pre);
    // The adjoint of the AllReduce passes through to every partial output.
    const Matrix& grad_zi = grad_z;
    grads.w_out.push_back(matmul(transpose(y), grad_zi));
    const Matrix grad_y = matmul(grad_zi, transpose(model.w_out[i]));
    const Matrix grad_pre = hadamard(grad_y, gelu_grad(pre));
    grads.w_in.push_back(matmul(transpose(model.input), grad_pre));
    grad_x = add(grad_x, matmul(grad_pre, transpose(model.w_in[i])));
  }
  grads.input = std::move(grad_x);
  return grads;
}

}  // namespace

double sharded_output_deviation(const ToyShardedModel& model) {
  const int shard = model.w_in.front().cols;
  Matrix w_in_full(model.input.cols, shard * model.workers);
  Matrix w_out_full(shard * model.workers, model.w_out.front().cols);
  for (int i = 0; i < model.workers; ++i) {
    for (int r = 0; r < model.w_in[i].rows; ++r) {
      for (int c = 0; c < shard; ++c) {
        w_in_full.at(r, i * shard + c) = model.w_in[i].at(r, c);
      }
    }
    for (int r = 0; r < shard; ++r) {
      for (int c = 0; c < model.w_out[i].cols; ++c) {
        w_out_full.at(i * shard + r, c) = model.w_out[i].at(r, c);
      }
    }
  }
  const Matrix z_full = matmul(gelu(matmul(model.input, w_in_full)), w_out_full);
  return max_abs_diff(z_full, sharded_forward(model));
}

ElisionCheck recompute_elision_equivalence(const ToyShardedModel& model) {
  // Stored at the segment boundary during forward.
  const Matrix z_stored = sharded_forward(model);

  // Full replay: the recomputation reruns the AllReduce and the loss
  // gradient is taken at the replayed output.
  const Matrix z_replayed = sharded_forward(model);
  const Grads full = backward_from(model, z_replayed);

  // Elided replay: recomputation restarts after the communication; the
  // stored AllReduce output feeds the loss gradient directly.
  const Grads elided = backward_from(model, z_stored);

  ElisionCheck check;
  check.loss_bit_identical = full.loss == elided.loss;
  double dev = max_abs_diff(full.input, elided.input);
  for (int i = 0; i < model.workers; ++i) {
    dev = std::max(dev, max_abs_diff(full.w_in[i], elided.w_in[i]));
    dev = std::max(dev, max_abs_diff(full.w_out[i], elided.w_out[i]));
  }
  check.grad_deviation = dev;
  return check;
}

}  // namespace tmpsim
