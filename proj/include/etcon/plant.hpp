#pragma once

// Physical LTI plant with per-agent input/output partitions and ellipsoidal
// disturbance sets {w : w'Qw <= 1}, {v : v'Rv <= 1}.

#include "etcon/numerics.hpp"

#include <random>
#include <vector>

namespace etcon {

class PlantModel {
public:
    PlantModel(Mat a, Mat b, Mat c, std::vector<int> input_sizes, std::vector<int> output_sizes, Mat q, Mat r);

    [[nodiscard]] int n_states() const { return static_cast<int>(a_.rows()); }
    [[nodiscard]] int n_inputs() const { return static_cast<int>(b_.cols()); }
    [[nodiscard]] int n_outputs() const { return static_cast<int>(c_.rows()); }
    [[nodiscard]] int n_agents() const { return static_cast<int>(input_sizes_.size()); }

    [[nodiscard]] const Mat& a() const { return a_; }
    [[nodiscard]] const Mat& b() const { return b_; }
    [[nodiscard]] const Mat& c() const { return c_; }
    [[nodiscard]] const Mat& q() const { return q_; }
    [[nodiscard]] const Mat& r() const { return r_; }
    [[nodiscard]] const std::vector<int>& input_sizes() const { return input_sizes_; }
    [[nodiscard]] const std::vector<int>& output_sizes() const { return output_sizes_; }

    [[nodiscard]] int input_offset(int i) const { return input_offsets_[i]; }
    [[nodiscard]] int output_offset(int i) const { return output_offsets_[i]; }

    /// Agent i's input columns B_i.
    [[nodiscard]] Mat b_block(int i) const;
    /// Agent i's output rows C_i.
    [[nodiscard]] Mat c_block(int i) const;
    /// Output selector Gamma_i = [0 .. I_{m_i} .. 0], so Gamma_i y = y_i.
    [[nodiscard]] Mat selector(int i) const;

private:
    Mat a_, b_, c_, q_, r_;
    std::vector<int> input_sizes_, output_sizes_;
    std::vector<int> input_offsets_, output_offsets_;
};

struct PlantState {
    Vec x;
    double t = 0.0;
};

enum class DisturbanceMode { kInterior, kBoundary };

/// Draws vectors d with d' shape d <= 1. Interior mode is uniform over the
/// ellipsoid; boundary mode is uniform in direction with d' shape d = 1.
class DisturbanceSampler {
public:
    explicit DisturbanceSampler(const Mat& shape);

    Vec sample(DisturbanceMode mode, std::mt19937_64& rng) const;
    [[nodiscard]] int dim() const { return static_cast<int>(inv_sqrt_.rows()); }

private:
    Mat inv_sqrt_;  // shape^{-1/2}
};

namespace plant {

/// One-shot sampling helper (builds a sampler each call).
Vec sample_disturbance(const Mat& shape, DisturbanceMode mode, std::mt19937_64& rng);

/// Adds `jump` to the physical state only; time is unchanged.
PlantState apply_setpoint_jump(const PlantState& state, const Vec& jump);

}  // namespace plant
}  // namespace etcon
