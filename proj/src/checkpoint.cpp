#include "lemole/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "lemole/errors.hpp"

namespace lemole {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json tensor_shapes(LemoleModel& model) {
    // Shapes are reconstructible from the hyper block; they are declared
    // anyway so a checkpoint is self-describing.
    nlohmann::json shapes = nlohmann::json::object();
    auto add = [&](const std::string& name, std::size_t r, std::size_t c) {
        shapes[name] = {r, c};
    };
    for (std::size_t m = 0; m < model.bank.linear.size(); ++m) {
        const auto& e = model.bank.linear[m];
        add("expert" + std::to_string(m) + ".W", e.W.rows(), e.W.cols());
        add("expert" + std::to_string(m) + ".b", e.b.rows(), e.b.cols());
    }
    for (std::size_t m = 0; m < model.bank.freq.size(); ++m) {
        const auto& e = model.bank.freq[m];
        const std::string p = "expert" + std::to_string(m);
        add(p + ".W_re", e.W_re.rows(), e.W_re.cols());
        add(p + ".W_im", e.W_im.rows(), e.W_im.cols());
        add(p + ".b_re", e.b_re.size(), 1);
        add(p + ".b_im", e.b_im.size(), 1);
    }
    return shapes;
}

} // namespace

std::string checkpoint_to_json(const LemoleModel& model) {
    auto& m = const_cast<LemoleModel&>(model);
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["domain"] = model.bank.domain == ExpertDomain::Time ? "time" : "frequency";
    doc["conditioning_mode"] =
        model.mode == ConditioningMode::Aggregate ? "aggregate" : "per_expert";
    doc["has_static"] = model.has_static;
    doc["has_dynamic"] = model.has_dynamic;
    doc["window_lengths"] = model.bank.window_lengths;
    doc["hyper"] = {{"T", model.hyper.T},       {"H", model.hyper.H},
                    {"C", model.hyper.C},       {"M", model.hyper.M},
                    {"d_llm", model.hyper.d_llm}, {"L_S", model.hyper.L_S},
                    {"L_D", model.hyper.L_D},   {"conv_kernel", model.hyper.conv_kernel}};
    doc["shapes"] = tensor_shapes(m);
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& ref : param_tensors(m)) tensors[ref.name] = *ref.data;
    doc["tensors"] = tensors;
    return doc.dump();
}

void save_checkpoint(const std::string& path, const LemoleModel& model) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::MissingArtifact, "cannot write checkpoint " + path);
    out << checkpoint_to_json(model) << "\n";
}

LemoleModel checkpoint_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedResponse, "checkpoint parse error: " + std::string(e.what()));
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != kFormatVersion)
        fail(ErrorCode::MalformedResponse, "unsupported checkpoint format version");

    ModelConfig config;
    const auto& h = doc.at("hyper");
    config.hyper.T = h.at("T").get<std::size_t>();
    config.hyper.H = h.at("H").get<std::size_t>();
    config.hyper.C = h.at("C").get<std::size_t>();
    config.hyper.M = h.at("M").get<std::size_t>();
    config.hyper.d_llm = h.at("d_llm").get<std::size_t>();
    config.hyper.L_S = h.at("L_S").get<std::size_t>();
    config.hyper.L_D = h.at("L_D").get<std::size_t>();
    config.hyper.conv_kernel = h.at("conv_kernel").get<std::size_t>();
    config.window_lengths = doc.at("window_lengths").get<std::vector<std::size_t>>();
    config.domain =
        doc.at("domain").get<std::string>() == "frequency" ? ExpertDomain::Frequency
                                                           : ExpertDomain::Time;
    config.mode = doc.at("conditioning_mode").get<std::string>() == "per_expert"
                      ? ConditioningMode::PerExpert
                      : ConditioningMode::Aggregate;
    config.has_static = doc.at("has_static").get<bool>();
    config.has_dynamic = doc.at("has_dynamic").get<bool>();
    config.freq_init_noise = 0.0;

    Rng rng(0);
    LemoleModel model = make_model(config, rng);
    const auto& tensors = doc.at("tensors");
    for (const auto& ref : param_tensors(model)) {
        if (!tensors.contains(ref.name))
            fail(ErrorCode::MalformedResponse, "checkpoint missing tensor " + ref.name);
        const auto values = tensors.at(ref.name).get<std::vector<double>>();
        if (values.size() != ref.data->size())
            fail(ErrorCode::ShapeMismatch, "checkpoint tensor " + ref.name + " has " +
                                               std::to_string(values.size()) + " values, expected " +
                                               std::to_string(ref.data->size()));
        *ref.data = values;
    }
    return model;
}

LemoleModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingArtifact, "cannot open checkpoint " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_json(text);
}

} // namespace lemole
