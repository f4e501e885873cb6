#include "etcon/plant.hpp"

#include "etcon/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace etcon {

namespace {

std::vector<int> offsets_of(const std::vector<int>& sizes) {
    std::vector<int> out(sizes.size(), 0);
    for (std::size_t i = 1; i < sizes.size(); ++i) out[i] = out[i - 1] + sizes[i - 1];
    return out;
}

void require_pd(const Mat& m, const char* name) {
    require(m.rows() == m.cols(), ErrorKind::kValidation, std::string(name) + " must be square");
    require(num::is_pd(m), ErrorKind::kValidation, std::string(name) + " must be symmetric positive definite");
}

}  // namespace

PlantModel::PlantModel(Mat a, Mat b, Mat c, std::vector<int> input_sizes, std::vector<int> output_sizes, Mat q,
                       Mat r)
    : a_(std::move(a)),
      b_(std::move(b)),
      c_(std::move(c)),
      q_(std::move(q)),
      r_(std::move(r)),
      input_sizes_(std::move(input_sizes)),
      output_sizes_(std::move(output_sizes)) {
    const auto n = a_.rows();
    require(a_.cols() == n, ErrorKind::kStructural, "A must be square");
    require(b_.rows() == n, ErrorKind::kStructural, "B must have as many rows as A");
    require(c_.cols() == n, ErrorKind::kStructural, "C must have as many columns as A");
    require(!input_sizes_.empty(), ErrorKind::kValidation, "plant needs at least one agent");
    require(input_sizes_.size() == output_sizes_.size(), ErrorKind::kStructural,
            "input and output partitions must list the same number of agents");
    for (int s : input_sizes_) require(s >= 0, ErrorKind::kValidation, "partition sizes must be nonnegative");
    for (int s : output_sizes_) require(s >= 0, ErrorKind::kValidation, "partition sizes must be nonnegative");
    require(std::accumulate(input_sizes_.begin(), input_sizes_.end(), 0) == b_.cols(), ErrorKind::kStructural,
            "input partition sizes must sum to the number of columns of B");
    require(std::accumulate(output_sizes_.begin(), output_sizes_.end(), 0) == c_.rows(), ErrorKind::kStructural,
            "output partition sizes must sum to the number of rows of C");
    require(q_.rows() == n, ErrorKind::kStructural, "Q must be n x n");
    require(r_.rows() == c_.rows(), ErrorKind::kStructural, "R must be m x m");
    require_pd(q_, "Q");
    require_pd(r_, "R");
    input_offsets_ = offsets_of(input_sizes_);
    output_offsets_ = offsets_of(output_sizes_);
}

Mat PlantModel::b_block(int i) const { return b_.middleCols(input_offsets_[i], input_sizes_[i]); }

Mat PlantModel::c_block(int i) const { return c_.middleRows(output_offsets_[i], output_sizes_[i]); }

Mat PlantModel::selector(int i) const {
    Mat g = Mat::Zero(output_sizes_[i], n_outputs());
    g.middleCols(output_offsets_[i], output_sizes_[i]).setIdentity();
    return g;
}

DisturbanceSampler::DisturbanceSampler(const Mat& shape) {
    require(shape.rows() == shape.cols(), ErrorKind::kValidation, "disturbance shape must be square");
    const SymEig eig = num::sym_eig(shape);
    require(eig.values.size() == 0 || eig.values(0) > num::pd_tolerance(shape), ErrorKind::kValidation,
            "disturbance shape must be positive definite");
    inv_sqrt_ = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.vectors.transpose();
}

Vec DisturbanceSampler::sample(DisturbanceMode mode, std::mt19937_64& rng) const {
    const int d = dim();
    if (d == 0) return Vec(0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec u(d);
    double norm = 0.0;
    do {
        for (int k = 0; k < d; ++k) u(k) = gauss(rng);
        norm = u.norm();
    } while (norm == 0.0);
    u /= norm;
    if (mode == DisturbanceMode::kInterior) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        u *= std::pow(unit(rng), 1.0 / d);
    }
    return inv_sqrt_ * u;
}

namespace plant {

Vec sample_disturbance(const Mat& shape, DisturbanceMode mode, std::mt19937_64& rng) {
    return DisturbanceSampler(shape).sample(mode, rng);
}

PlantState apply_setpoint_jump(const PlantState& state, const Vec& jump) {
    require(jump.size() == state.x.size(), ErrorKind::kStructural, "setpoint jump has the wrong dimension");
    return {state.x + jump, state.t};
}

}  // namespace plant
}  // namespace etcon
