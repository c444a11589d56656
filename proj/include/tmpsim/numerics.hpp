// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace tmpsim {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix gelu(const Matrix& a);
Matrix gelu_grad(const Matrix& a);  // elementwise derivative at a
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Checks that the gradient of a loss with respect to every summand of
/// y = sum_i x_i equals the gradient with respect to y itself.
struct GradIdentityCheck {
  double autodiff_deviation = 0.0;          // analytic, zero in exact arithmetic
  double finite_difference_deviation = 0.0; // vs central differences, step 1e-5
};
GradIdentityCheck allreduce_grad_identity(int workers, int rows, int cols, unsigned seed);

/// Column-parallel linear, GeLU, row-parallel linear; partial outputs are
/// summed across workers by a literal in-process AllReduce.
struct ToyShardedModel {
  int workers = 1;
  Matrix input;                  // batch x model_dim
  std::vector<Matrix> w_in;      // model_dim x (hidden/workers) column shards
  std::vector<Matrix> w_out;     // (hidden/workers) x model_dim row shards
};

ToyShardedModel make_toy_sharded_model(int workers, int batch, int model_dim, int hidden_dim,
                                       unsigned seed);

/// Max deviation between the summed sharded output and the unsharded model.
double sharded_output_deviation(const ToyShardedModel& model);

struct ElisionCheck {
  double grad_deviation = 0.0;   // replayed-AllReduce path vs elided path
  bool loss_bit_identical = false;
};

/// Computes weight and input gradients twice: once replaying the AllReduce
/// during recomputation, once restarting recomputation from the stored
/// post-AllReduce tensor with the replay omitted.
ElisionCheck recompute_elision_equivalence(const ToyShardedModel& model);

}  // namespace tmpsim
