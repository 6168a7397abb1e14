#ifndef LEMOLE_EXPERTS_HPP
#define LEMOLE_EXPERTS_HPP

#include <cstddef>
#include <vector>

#include "lemole/matrix.hpp"
#include "lemole/rng.hpp"

namespace lemole {

enum class ExpertDomain { Time, Frequency };

/// Affine map from a length-w lookback suffix to an H-step forecast. The
/// weight is shared across channels; the bias is per channel.
struct LinearExpert {
    Matrix W;                    // H x w
    Matrix b;                    // H x C
    std::size_t window_length = 0;
};

struct LinearExpertGrads {
    Matrix dW;
    Matrix db;
};

/// Frequency-domain expert: rfft, one complex linear interpolation layer in
/// real/imaginary block form, zero-padded irfft over w+H samples.
struct FreqExpert {
    Matrix W_re, W_im;              // K_out x K_in
    std::vector<double> b_re, b_im; // K_out
    std::size_t window_length = 0;  // w
    std::size_t output_length = 0;  // w + H

    std::size_t bins_in() const { return window_length / 2 + 1; }
    std::size_t bins_out() const { return output_length / 2 + 1; }
};

struct FreqExpertGrads {
    Matrix dW_re, dW_im;
    std::vector<double> db_re, db_im;
};

struct ExpertBank {
    ExpertDomain domain = ExpertDomain::Time;
    std::vector<std::size_t> window_lengths; // descending
    std::size_t horizon = 0;
    std::size_t channels = 0;
    std::vector<LinearExpert> linear;
    std::vector<FreqExpert> freq;

    std::size_t size() const { return window_lengths.size(); }
};

LinearExpert make_linear_expert(std::size_t w, std::size_t H, std::size_t C, Rng& rng);

/// Identity-on-shared-bins interpolation plus uniform(-noise, +noise) on every
/// entry. A shared bin is a frequency representable in both lengths
/// (k_in * (w+H) divisible by w); with zero noise the expert reproduces
/// periodic continuation for periods dividing both w and w+H.
FreqExpert make_freq_expert(std::size_t w, std::size_t H, Rng& rng, double init_noise = 1e-3);

ExpertBank make_expert_bank(ExpertDomain domain, const std::vector<std::size_t>& window_lengths,
                            std::size_t H, std::size_t C, Rng& rng, double freq_init_noise = 1e-3);

Matrix linear_forward(const LinearExpert& expert, const Matrix& view);

/// Returns the gradient w.r.t. the view; parameter gradients are accumulated
/// into `grads` (which must be shaped like the expert).
Matrix linear_backward(const LinearExpert& expert, const Matrix& view, const Matrix& upstream,
                       LinearExpertGrads& grads);

Matrix freq_forward(const FreqExpert& expert, const Matrix& view);

Matrix freq_backward(const FreqExpert& expert, const Matrix& view, const Matrix& upstream,
                     FreqExpertGrads& grads);

std::vector<Matrix> bank_forward(const ExpertBank& bank, const std::vector<Matrix>& views);

LinearExpertGrads zero_grads(const LinearExpert& expert);
FreqExpertGrads zero_grads(const FreqExpert& expert);

} // namespace lemole

#endif // LEMOLE_EXPERTS_HPP
