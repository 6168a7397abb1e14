#include "lemole/conditioning.hpp"

#include <cmath>

#include "lemole/data.hpp"
#include "lemole/errors.hpp"

namespace lemole {

FilmGenerator make_film_generator(std::size_t L, std::size_t d_llm, std::size_t H, std::size_t C,
                                  Rng& rng, double output_bias) {
    FilmGenerator gen;
    gen.channel_map = Matrix(d_llm, C);
    gen.channel_bias.assign(C, 0.0);
    gen.time_map = Matrix(L, H);
    gen.time_bias.assign(H, output_bias);
    for (double& v : gen.channel_map.storage()) v = rng.uniform(-1e-2, 1e-2);
    for (double& v : gen.time_map.storage()) v = rng.uniform(-1e-2, 1e-2);
    return gen;
}

Conv1d make_conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng) {
    if (kernel % 2 == 0) fail(ErrorCode::InvalidArgument, "conv kernel must be odd");
    Conv1d conv;
    conv.in_channels = in_channels;
    conv.out_channels = out_channels;
    conv.kernel = kernel;
    conv.kernels = Matrix(out_channels, in_channels * kernel);
    conv.bias.assign(out_channels, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
    for (double& v : conv.kernels.storage()) v = rng.uniform(-bound, bound);
    return conv;
}

LemoleModel make_model(const ModelConfig& config, Rng& rng) {
    const ModelHyper& h = config.hyper;
    if (h.T == 0 || h.H == 0 || h.C == 0 || h.M == 0)
        fail(ErrorCode::InvalidArgument, "model dimensions must be positive");
    LemoleModel model;
    model.hyper = h;
    model.mode = config.mode;
    model.has_static = config.has_static;
    model.has_dynamic = config.has_dynamic;

    auto lengths = config.window_lengths.empty() ? window_schedule(h.T, h.M) : config.window_lengths;
    if (lengths.size() != h.M) fail(ErrorCode::InvalidArgument, "window_lengths must have M entries");
    if (lengths.front() > h.T)
        fail(ErrorCode::WindowExceedsLookback, "w_1 exceeds the configured lookback T");
    model.bank = make_expert_bank(config.domain, lengths, h.H, h.C, rng, config.freq_init_noise);

    if (config.mode == ConditioningMode::Aggregate)
        model.agg_conv = make_conv1d(h.M, 1, h.conv_kernel, rng);

    // gamma generators start at 1, beta generators at 0 (near-identity FiLM).
    if (config.has_static) {
        model.gen_gamma_s = make_film_generator(h.L_S, h.d_llm, h.H, h.C, rng, 1.0);
        model.gen_beta_s = make_film_generator(h.L_S, h.d_llm, h.H, h.C, rng, 0.0);
    }
    if (config.has_dynamic) {
        model.gen_gamma_d = make_film_generator(h.L_D, h.d_llm, h.H, h.C, rng, 1.0);
        model.gen_beta_d = make_film_generator(h.L_D, h.d_llm, h.H, h.C, rng, 0.0);
    }

    const std::size_t fuse_in = config.mode == ConditioningMode::PerExpert
                                    ? h.M
                                    : 1 + (config.has_static ? 1 : 0) + (config.has_dynamic ? 1 : 0);
    model.final_conv = make_conv1d(fuse_in, 1, h.conv_kernel, rng);
    return model;
}

Matrix film_params(const FilmGenerator& gen, const Matrix& Z, Matrix* channel_stage) {
    if (Z.rows() != gen.time_map.rows() || Z.cols() != gen.channel_map.rows())
        fail(ErrorCode::ShapeMismatch, "embedding shape does not match FiLM generator");
    Matrix stage = matmul(Z, gen.channel_map); // L x C
    for (std::size_t l = 0; l < stage.rows(); ++l)
        for (std::size_t c = 0; c < stage.cols(); ++c) stage(l, c) += gen.channel_bias[c];
    Matrix out = matmul(transpose(gen.time_map), stage); // H x C
    for (std::size_t h = 0; h < out.rows(); ++h)
        for (std::size_t c = 0; c < out.cols(); ++c) out(h, c) += gen.time_bias[h];
    if (channel_stage) *channel_stage = std::move(stage);
    return out;
}

Matrix film_apply(const Matrix& gamma, const Matrix& beta, const Matrix& y) {
    gamma.require_same_shape(y, "film_apply gamma");
    beta.require_same_shape(y, "film_apply beta");
    Matrix out(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i)
        out.storage()[i] = gamma.storage()[i] * y.storage()[i] + beta.storage()[i];
    return out;
}

std::vector<Matrix> conv1d_forward(const Conv1d& conv, const std::vector<Matrix>& stack) {
    if (stack.size() != conv.in_channels)
        fail(ErrorCode::ShapeMismatch, "conv input channel count");
    const std::size_t H = stack.front().rows();
    const std::size_t C = stack.front().cols();
    const std::size_t pad = (conv.kernel - 1) / 2;
    std::vector<Matrix> out(conv.out_channels, Matrix(H, C));
    for (std::size_t o = 0; o < conv.out_channels; ++o) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < H; ++t) {
                double acc = conv.bias[o];
                for (std::size_t i = 0; i < conv.in_channels; ++i)
                    for (std::size_t j = 0; j < conv.kernel; ++j) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) -
                                                   static_cast<std::ptrdiff_t>(pad);
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(H)) continue;
                        acc += conv.tap(o, i, j) * stack[i](static_cast<std::size_t>(src), c);
                    }
                out[o](t, c) = acc;
            }
        }
    }
    return out;
}

std::vector<Matrix> conv1d_backward(const Conv1d& conv, const std::vector<Matrix>& stack,
                                    const std::vector<Matrix>& upstream, ConvGrads& grads) {
    if (upstream.size() != conv.out_channels)
        fail(ErrorCode::ShapeMismatch, "conv upstream channel count");
    const std::size_t H = stack.front().rows();
    const std::size_t C = stack.front().cols();
    const std::size_t pad = (conv.kernel - 1) / 2;
    std::vector<Matrix> d_stack(conv.in_channels, Matrix(H, C));
    for (std::size_t o = 0; o < conv.out_channels; ++o) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < H; ++t) {
                const double g = upstream[o](t, c);
                if (g == 0.0) continue;
                grads.d_bias[o] += g;
                for (std::size_t i = 0; i < conv.in_channels; ++i)
                    for (std::size_t j = 0; j < conv.kernel; ++j) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) -
                                                   static_cast<std::ptrdiff_t>(pad);
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(H)) continue;
                        grads.d_kernels(o, i * conv.kernel + j) +=
                            g * stack[i](static_cast<std::size_t>(src), c);
                        d_stack[i](static_cast<std::size_t>(src), c) += g * conv.tap(o, i, j);
                    }
            }
        }
    }
    return d_stack;
}

void film_generator_backward(const FilmGenerator& gen, const Matrix& Z, const Matrix& channel_stage,
                             const Matrix& upstream, FilmGrads& grads) {
    // out = time_map^T * stage + time_bias; stage = Z * channel_map + channel_bias
    grads.d_time_map += matmul(channel_stage, transpose(upstream)); // L x H
    for (std::size_t h = 0; h < upstream.rows(); ++h)
        for (std::size_t c = 0; c < upstream.cols(); ++c) grads.d_time_bias[h] += upstream(h, c);
    const Matrix d_stage = matmul(gen.time_map, upstream); // L x C
    grads.d_channel_map += matmul(transpose(Z), d_stage);  // d_llm x C
    for (std::size_t l = 0; l < d_stage.rows(); ++l)
        for (std::size_t c = 0; c < d_stage.cols(); ++c) grads.d_channel_bias[c] += d_stage(l, c);
}

ForwardTrace model_forward(const LemoleModel& model, const Matrix& lookback, const Matrix& Z_S,
                           const Matrix& Z_D) {
    if (lookback.rows() != model.hyper.T || lookback.cols() != model.hyper.C)
        fail(ErrorCode::ShapeMismatch, "lookback shape does not match model hyper");
    ForwardTrace trace;
    trace.views = expert_views(lookback, model.bank.window_lengths);
    trace.expert_outs = bank_forward(model.bank, trace.views);

    if (model.has_static) {
        trace.gamma_s = film_params(model.gen_gamma_s, Z_S, &trace.A_gamma_s);
        trace.beta_s = film_params(model.gen_beta_s, Z_S, &trace.A_beta_s);
        trace.Z_S = &Z_S;
    }
    if (model.has_dynamic) {
        trace.gamma_d = film_params(model.gen_gamma_d, Z_D, &trace.A_gamma_d);
        trace.beta_d = film_params(model.gen_beta_d, Z_D, &trace.A_beta_d);
        trace.Z_D = &Z_D;
    }

    if (model.mode == ConditioningMode::Aggregate) {
        trace.Y = conv1d_forward(model.agg_conv, trace.expert_outs).front();
        trace.final_stack.push_back(trace.Y);
        if (model.has_static) {
            trace.yp_s = film_apply(trace.gamma_s, trace.beta_s, trace.Y);
            trace.final_stack.push_back(trace.yp_s);
        }
        if (model.has_dynamic) {
            trace.yp_d = film_apply(trace.gamma_d, trace.beta_d, trace.Y);
            trace.final_stack.push_back(trace.yp_d);
        }
    } else {
        for (const Matrix& y_m : trace.expert_outs) {
            Matrix cur = model.has_static ? film_apply(trace.gamma_s, trace.beta_s, y_m) : y_m;
            trace.stage_static.push_back(cur);
            if (model.has_dynamic) cur = film_apply(trace.gamma_d, trace.beta_d, cur);
            trace.fused.push_back(std::move(cur));
        }
        trace.final_stack = trace.fused;
    }
    trace.y_hat = conv1d_forward(model.final_conv, trace.final_stack).front();
    return trace;
}

ModelGrads zero_grads(const LemoleModel& model) {
    ModelGrads g;
    for (const auto& e : model.bank.linear) g.linear.push_back(zero_grads(e));
    for (const auto& e : model.bank.freq) g.freq.push_back(zero_grads(e));
    if (!model.agg_conv.empty())
        g.agg = {Matrix(model.agg_conv.kernels.rows(), model.agg_conv.kernels.cols()),
                 std::vector<double>(model.agg_conv.bias.size(), 0.0)};
    g.final = {Matrix(model.final_conv.kernels.rows(), model.final_conv.kernels.cols()),
               std::vector<double>(model.final_conv.bias.size(), 0.0)};
    auto film_zero = [](const FilmGenerator& gen) {
        FilmGrads fg;
        if (!gen.empty()) {
            fg.d_channel_map = Matrix(gen.channel_map.rows(), gen.channel_map.cols());
            fg.d_channel_bias.assign(gen.channel_bias.size(), 0.0);
            fg.d_time_map = Matrix(gen.time_map.rows(), gen.time_map.cols());
            fg.d_time_bias.assign(gen.time_bias.size(), 0.0);
        }
        return fg;
    };
    g.gamma_s = film_zero(model.gen_gamma_s);
    g.beta_s = film_zero(model.gen_beta_s);
    g.gamma_d = film_zero(model.gen_gamma_d);
    g.beta_d = film_zero(model.gen_beta_d);
    return g;
}

namespace {

void expert_backward_into(const LemoleModel& model, std::size_t m, const Matrix& view,
                          const Matrix& upstream, ModelGrads& grads) {
    if (model.bank.domain == ExpertDomain::Time)
        linear_backward(model.bank.linear[m], view, upstream, grads.linear[m]);
    else
        freq_backward(model.bank.freq[m], view, upstream, grads.freq[m]);
}

} // namespace

void model_backward(const LemoleModel& model, const ForwardTrace& trace, const Matrix& upstream,
                    ModelGrads& grads) {
    upstream.require_same_shape(trace.y_hat, "model_backward upstream");
    if (model.has_static && trace.Z_S == nullptr)
        fail(ErrorCode::ShapeMismatch, "trace is missing the static embedding");
    if (model.has_dynamic && trace.Z_D == nullptr)
        fail(ErrorCode::ShapeMismatch, "trace is missing the dynamic embedding");
    const auto d_final_stack =
        conv1d_backward(model.final_conv, trace.final_stack, {upstream}, grads.final);

    Matrix d_gamma_s, d_beta_s, d_gamma_d, d_beta_d;
    if (model.has_static) {
        d_gamma_s = Matrix(model.hyper.H, model.hyper.C);
        d_beta_s = Matrix(model.hyper.H, model.hyper.C);
    }
    if (model.has_dynamic) {
        d_gamma_d = Matrix(model.hyper.H, model.hyper.C);
        d_beta_d = Matrix(model.hyper.H, model.hyper.C);
    }

    if (model.mode == ConditioningMode::Aggregate) {
        Matrix dY = d_final_stack[0];
        std::size_t idx = 1;
        if (model.has_static) {
            const Matrix& d_yp = d_final_stack[idx++];
            d_gamma_s += hadamard(d_yp, trace.Y);
            d_beta_s += d_yp;
            dY += hadamard(d_yp, trace.gamma_s);
        }
        if (model.has_dynamic) {
            const Matrix& d_yp = d_final_stack[idx++];
            d_gamma_d += hadamard(d_yp, trace.Y);
            d_beta_d += d_yp;
            dY += hadamard(d_yp, trace.gamma_d);
        }
        const auto d_experts = conv1d_backward(model.agg_conv, trace.expert_outs, {dY}, grads.agg);
        for (std::size_t m = 0; m < model.bank.size(); ++m)
            expert_backward_into(model, m, trace.views[m], d_experts[m], grads);
    } else {
        for (std::size_t m = 0; m < model.bank.size(); ++m) {
            Matrix cur = d_final_stack[m];
            if (model.has_dynamic) {
                d_gamma_d += hadamard(cur, trace.stage_static[m]);
                d_beta_d += cur;
                cur = hadamard(cur, trace.gamma_d);
            }
            if (model.has_static) {
                d_gamma_s += hadamard(cur, trace.expert_outs[m]);
                d_beta_s += cur;
                cur = hadamard(cur, trace.gamma_s);
            }
            expert_backward_into(model, m, trace.views[m], cur, grads);
        }
    }

    if (model.has_static) {
        film_generator_backward(model.gen_gamma_s, *trace.Z_S, trace.A_gamma_s, d_gamma_s,
                                grads.gamma_s);
        film_generator_backward(model.gen_beta_s, *trace.Z_S, trace.A_beta_s, d_beta_s,
                                grads.beta_s);
    }
    if (model.has_dynamic) {
        film_generator_backward(model.gen_gamma_d, *trace.Z_D, trace.A_gamma_d, d_gamma_d,
                                grads.gamma_d);
        film_generator_backward(model.gen_beta_d, *trace.Z_D, trace.A_beta_d, d_beta_d,
                                grads.beta_d);
    }
}

std::size_t count_params(const LemoleModel& model) {
    std::size_t total = 0;
    auto& mutable_model = const_cast<LemoleModel&>(model);
    for (const auto& ref : param_tensors(mutable_model)) total += ref.data->size();
    return total;
}

namespace {

void push_film(std::vector<TensorRef>& out, const std::string& prefix, FilmGenerator& gen) {
    if (gen.empty()) return;
    out.push_back({prefix + ".channel_map", &gen.channel_map.storage()});
    out.push_back({prefix + ".channel_bias", &gen.channel_bias});
    out.push_back({prefix + ".time_map", &gen.time_map.storage()});
    out.push_back({prefix + ".time_bias", &gen.time_bias});
}

void push_film_grads(std::vector<TensorRef>& out, const std::string& prefix, FilmGrads& g) {
    if (g.d_channel_map.empty()) return;
    out.push_back({prefix + ".channel_map", &g.d_channel_map.storage()});
    out.push_back({prefix + ".channel_bias", &g.d_channel_bias});
    out.push_back({prefix + ".time_map", &g.d_time_map.storage()});
    out.push_back({prefix + ".time_bias", &g.d_time_bias});
}

} // namespace

std::vector<TensorRef> param_tensors(LemoleModel& model) {
    std::vector<TensorRef> out;
    for (std::size_t m = 0; m < model.bank.linear.size(); ++m) {
        out.push_back({"expert" + std::to_string(m) + ".W", &model.bank.linear[m].W.storage()});
        out.push_back({"expert" + std::to_string(m) + ".b", &model.bank.linear[m].b.storage()});
    }
    for (std::size_t m = 0; m < model.bank.freq.size(); ++m) {
        const std::string p = "expert" + std::to_string(m);
        out.push_back({p + ".W_re", &model.bank.freq[m].W_re.storage()});
        out.push_back({p + ".W_im", &model.bank.freq[m].W_im.storage()});
        out.push_back({p + ".b_re", &model.bank.freq[m].b_re});
        out.push_back({p + ".b_im", &model.bank.freq[m].b_im});
    }
    if (!model.agg_conv.empty()) {
        out.push_back({"agg_conv.kernels", &model.agg_conv.kernels.storage()});
        out.push_back({"agg_conv.bias", &model.agg_conv.bias});
    }
    push_film(out, "gen_gamma_s", model.gen_gamma_s);
    push_film(out, "gen_beta_s", model.gen_beta_s);
    push_film(out, "gen_gamma_d", model.gen_gamma_d);
    push_film(out, "gen_beta_d", model.gen_beta_d);
    out.push_back({"final_conv.kernels", &model.final_conv.kernels.storage()});
    out.push_back({"final_conv.bias", &model.final_conv.bias});
    return out;
}

std::vector<TensorRef> grad_tensors(ModelGrads& grads) {
    std::vector<TensorRef> out;
    for (std::size_t m = 0; m < grads.linear.size(); ++m) {
        out.push_back({"expert" + std::to_string(m) + ".W", &grads.linear[m].dW.storage()});
        out.push_back({"expert" + std::to_string(m) + ".b", &grads.linear[m].db.storage()});
    }
    for (std::size_t m = 0; m < grads.freq.size(); ++m) {
        const std::string p = "expert" + std::to_string(m);
        out.push_back({p + ".W_re", &grads.freq[m].dW_re.storage()});
        out.push_back({p + ".W_im", &grads.freq[m].dW_im.storage()});
        out.push_back({p + ".b_re", &grads.freq[m].db_re});
        out.push_back({p + ".b_im", &grads.freq[m].db_im});
    }
    if (!grads.agg.d_kernels.empty()) {
        out.push_back({"agg_conv.kernels", &grads.agg.d_kernels.storage()});
        out.push_back({"agg_conv.bias", &grads.agg.d_bias});
    }
    push_film_grads(out, "gen_gamma_s", grads.gamma_s);
    push_film_grads(out, "gen_beta_s", grads.beta_s);
    push_film_grads(out, "gen_gamma_d", grads.gamma_d);
    push_film_grads(out, "gen_beta_d", grads.beta_d);
    out.push_back({"final_conv.kernels", &grads.final.d_kernels.storage()});
    out.push_back({"final_conv.bias", &grads.final.d_bias});
    return out;
}

void accumulate(ModelGrads& into, const ModelGrads& from) {
    auto dst = grad_tensors(into);
    auto src = grad_tensors(const_cast<ModelGrads&>(from));
    if (dst.size() != src.size()) fail(ErrorCode::ShapeMismatch, "gradient structure mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i)
        for (std::size_t j = 0; j < dst[i].data->size(); ++j)
            (*dst[i].data)[j] += (*src[i].data)[j];
}

void scale_grads(ModelGrads& grads, double factor) {
    for (const auto& ref : grad_tensors(grads))
        for (double& v : *ref.data) v *= factor;
}

} // namespace lemole
