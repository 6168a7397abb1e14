#include "lemole/experts.hpp"

#include <cmath>

#include "lemole/errors.hpp"
#include "lemole/fft.hpp"

namespace lemole {

LinearExpert make_linear_expert(std::size_t w, std::size_t H, std::size_t C, Rng& rng) {
    LinearExpert expert;
    expert.window_length = w;
    expert.W = Matrix(H, w);
    expert.b = Matrix(H, C);
    const double bound = 1.0 / std::sqrt(static_cast<double>(w));
    for (double& v : expert.W.storage()) v = rng.uniform(-bound, bound);
    return expert;
}

FreqExpert make_freq_expert(std::size_t w, std::size_t H, Rng& rng, double init_noise) {
    FreqExpert expert;
    expert.window_length = w;
    expert.output_length = w + H;
    const std::size_t k_in = expert.bins_in();
    const std::size_t k_out = expert.bins_out();
    expert.W_re = Matrix(k_out, k_in);
    expert.W_im = Matrix(k_out, k_in);
    expert.b_re.assign(k_out, 0.0);
    expert.b_im.assign(k_out, 0.0);
    for (std::size_t k = 0; k < k_in; ++k) {
        const std::size_t num = k * expert.output_length;
        if (num % w == 0 && num / w < k_out) expert.W_re(num / w, k) = 1.0;
    }
    if (init_noise != 0.0) {
        for (double& v : expert.W_re.storage()) v += rng.uniform(-init_noise, init_noise);
        for (double& v : expert.W_im.storage()) v += rng.uniform(-init_noise, init_noise);
    }
    return expert;
}

ExpertBank make_expert_bank(ExpertDomain domain, const std::vector<std::size_t>& window_lengths,
                            std::size_t H, std::size_t C, Rng& rng, double freq_init_noise) {
    if (window_lengths.empty()) fail(ErrorCode::InvalidArgument, "bank needs at least one expert");
    for (std::size_t m = 1; m < window_lengths.size(); ++m)
        if (window_lengths[m] > window_lengths[m - 1])
            fail(ErrorCode::NonDescendingWindows, "bank window lengths must be non-increasing");
    if (window_lengths.back() == 0) fail(ErrorCode::InvalidArgument, "zero window length");
    ExpertBank bank;
    bank.domain = domain;
    bank.window_lengths = window_lengths;
    bank.horizon = H;
    bank.channels = C;
    for (std::size_t w : window_lengths) {
        if (domain == ExpertDomain::Time)
            bank.linear.push_back(make_linear_expert(w, H, C, rng));
        else
            bank.freq.push_back(make_freq_expert(w, H, rng, freq_init_noise));
    }
    return bank;
}

Matrix linear_forward(const LinearExpert& expert, const Matrix& view) {
    if (view.rows() != expert.window_length || view.cols() != expert.b.cols())
        fail(ErrorCode::ShapeMismatch, "linear expert view shape");
    const std::size_t H = expert.W.rows();
    Matrix out = expert.b;
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t t = 0; t < expert.window_length; ++t) {
            const double w = expert.W(h, t);
            if (w == 0.0) continue;
            for (std::size_t c = 0; c < view.cols(); ++c) out(h, c) += w * view(t, c);
        }
    return out;
}

Matrix linear_backward(const LinearExpert& expert, const Matrix& view, const Matrix& upstream,
                       LinearExpertGrads& grads) {
    if (upstream.rows() != expert.W.rows() || upstream.cols() != view.cols())
        fail(ErrorCode::ShapeMismatch, "linear expert upstream shape");
    const std::size_t H = expert.W.rows();
    const std::size_t w = expert.window_length;
    const std::size_t C = view.cols();
    grads.db += upstream;
    Matrix view_grad(w, C);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t t = 0; t < w; ++t) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                acc += upstream(h, c) * view(t, c);
                view_grad(t, c) += expert.W(h, t) * upstream(h, c);
            }
            grads.dW(h, t) += acc;
        }
    return view_grad;
}

namespace {

// Complex linear layer in block form: t = (W_re + i W_im) s + (b_re + i b_im).
void complex_apply(const FreqExpert& e, const std::vector<cplx>& s, std::vector<cplx>& t) {
    const std::size_t k_out = e.bins_out();
    const std::size_t k_in = e.bins_in();
    t.assign(k_out, cplx(0.0, 0.0));
    for (std::size_t o = 0; o < k_out; ++o) {
        double re = e.b_re[o];
        double im = e.b_im[o];
        for (std::size_t i = 0; i < k_in; ++i) {
            const double wr = e.W_re(o, i);
            const double wi = e.W_im(o, i);
            re += wr * s[i].real() - wi * s[i].imag();
            im += wr * s[i].imag() + wi * s[i].real();
        }
        t[o] = cplx(re, im);
    }
}

} // namespace

Matrix freq_forward(const FreqExpert& expert, const Matrix& view) {
    if (view.rows() != expert.window_length)
        fail(ErrorCode::ShapeMismatch, "frequency expert view shape");
    const std::size_t H = expert.output_length - expert.window_length;
    const std::size_t C = view.cols();
    const double scale = static_cast<double>(expert.output_length) /
                         static_cast<double>(expert.window_length);
    Matrix out(H, C);
    std::vector<double> channel(expert.window_length);
    std::vector<cplx> t;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < expert.window_length; ++r) channel[r] = view(r, c);
        const auto s = rfft(channel);
        complex_apply(expert, s, t);
        const auto full = irfft(t, expert.output_length);
        // The horizon tail of the interpolated signal is the forecast.
        for (std::size_t h = 0; h < H; ++h) out(h, c) = full[expert.window_length + h] * scale;
    }
    return out;
}

Matrix freq_backward(const FreqExpert& expert, const Matrix& view, const Matrix& upstream,
                     FreqExpertGrads& grads) {
    const std::size_t H = expert.output_length - expert.window_length;
    if (upstream.rows() != H || upstream.cols() != view.cols())
        fail(ErrorCode::ShapeMismatch, "frequency expert upstream shape");
    const std::size_t C = view.cols();
    const std::size_t k_in = expert.bins_in();
    const std::size_t k_out = expert.bins_out();
    const double scale = static_cast<double>(expert.output_length) /
                         static_cast<double>(expert.window_length);

    Matrix view_grad(expert.window_length, C);
    std::vector<double> channel(expert.window_length);
    std::vector<double> full_grad(expert.output_length);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < expert.window_length; ++r) channel[r] = view(r, c);
        const auto s = rfft(channel);

        std::fill(full_grad.begin(), full_grad.end(), 0.0);
        for (std::size_t h = 0; h < H; ++h)
            full_grad[expert.window_length + h] = upstream(h, c) * scale;
        const auto t_grad = irfft_adjoint(full_grad);

        std::vector<cplx> s_grad(k_in, cplx(0.0, 0.0));
        for (std::size_t o = 0; o < k_out; ++o) {
            const double tr = t_grad[o].real();
            const double ti = t_grad[o].imag();
            grads.db_re[o] += tr;
            grads.db_im[o] += ti;
            for (std::size_t i = 0; i < k_in; ++i) {
                grads.dW_re(o, i) += tr * s[i].real() + ti * s[i].imag();
                grads.dW_im(o, i) += ti * s[i].real() - tr * s[i].imag();
                s_grad[i] += cplx(expert.W_re(o, i) * tr + expert.W_im(o, i) * ti,
                                  expert.W_re(o, i) * ti - expert.W_im(o, i) * tr);
            }
        }
        const auto x_grad = rfft_adjoint(s_grad, expert.window_length);
        for (std::size_t r = 0; r < expert.window_length; ++r) view_grad(r, c) += x_grad[r];
    }
    return view_grad;
}

std::vector<Matrix> bank_forward(const ExpertBank& bank, const std::vector<Matrix>& views) {
    if (views.size() != bank.size())
        fail(ErrorCode::ShapeMismatch, "view count does not match expert count");
    std::vector<Matrix> outs;
    outs.reserve(bank.size());
    for (std::size_t m = 0; m < bank.size(); ++m)
        outs.push_back(bank.domain == ExpertDomain::Time ? linear_forward(bank.linear[m], views[m])
                                                         : freq_forward(bank.freq[m], views[m]));
    return outs;
}

LinearExpertGrads zero_grads(const LinearExpert& expert) {
    return {Matrix(expert.W.rows(), expert.W.cols()), Matrix(expert.b.rows(), expert.b.cols())};
}

FreqExpertGrads zero_grads(const FreqExpert& expert) {
    FreqExpertGrads g;
    g.dW_re = Matrix(expert.W_re.rows(), expert.W_re.cols());
    g.dW_im = Matrix(expert.W_im.rows(), expert.W_im.cols());
    g.db_re.assign(expert.b_re.size(), 0.0);
    g.db_im.assign(expert.b_im.size(), 0.0);
    return g;
}

} // namespace lemole
