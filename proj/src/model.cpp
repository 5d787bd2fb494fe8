#include "alens/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "alens/error.hpp"
#include "alens/npy.hpp"

namespace alens {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require_size(const std::vector<double>& v, std::size_t expected, const char* what) {
    if (v.size() != expected) {
        throw InvalidInputError(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected " +
                                std::to_string(expected));
    }
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
        throw InvalidInputError(std::string(what) + " contains non-finite values");
    }
}

void check_input(const Shape& expected, const Tensor3& input) {
    if (input.shape() != expected) {
        throw InvalidInputError("input shape " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                                "x" + std::to_string(input.channels()) + " does not match model input " +
                                std::to_string(expected.height) + "x" + std::to_string(expected.width) + "x" +
                                std::to_string(expected.channels));
    }
}

void check_class(const ToyModel& model, ClassId c) {
    if (c >= num_classes(model)) {
        throw UnknownClassError("class " + std::to_string(c) + " out of range for a " +
                                std::to_string(num_classes(model)) + "-class model");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double empirical_stddev(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        var += (v - mean) * (v - mean);
    }
    return std::sqrt(var / static_cast<double>(values.size()));
}

void redraw(std::vector<double>& values, std::uint64_t seed, std::size_t group) {
    const double scale = empirical_stddev(values);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(group)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : values) {
        v = scale * normal(rng);
    }
}

nlohmann::json shape_json(const Shape& s) {
    return {{"height", s.height}, {"width", s.width}, {"channels", s.channels}};
}

}  // namespace

LinearSoftmaxModel::LinearSoftmaxModel(Shape input, std::size_t classes, std::vector<double> weights,
                                       std::vector<double> biases)
    : input_(input), classes_(classes), weights_(std::move(weights)), biases_(std::move(biases)) {
    if (classes_ < 2) {
        throw InvalidInputError("a classifier needs at least 2 classes");
    }
    if (input_.size() == 0) {
        throw InvalidInputError("model input dimensions must be positive");
    }
    require_size(weights_, classes_ * input_.size(), "linear weights");
    require_size(biases_, classes_, "linear biases");
}

MlpModel::MlpModel(Shape input, std::size_t hidden, std::size_t classes, std::vector<double> hidden_weights,
                   std::vector<double> hidden_biases, std::vector<double> output_weights,
                   std::vector<double> output_biases)
    : input_(input),
      hidden_(hidden),
      classes_(classes),
      hidden_weights_(std::move(hidden_weights)),
      hidden_biases_(std::move(hidden_biases)),
      output_weights_(std::move(output_weights)),
      output_biases_(std::move(output_biases)) {
    if (classes_ < 2) {
        throw InvalidInputError("a classifier needs at least 2 classes");
    }
    if (hidden_ < 1 || input_.size() == 0) {
        throw InvalidInputError("MLP dimensions must be positive");
    }
    require_size(hidden_weights_, hidden_ * input_.size(), "hidden weights");
    require_size(hidden_biases_, hidden_, "hidden biases");
    require_size(output_weights_, classes_ * hidden_, "output weights");
    require_size(output_biases_, classes_, "output biases");
}

std::vector<double> MlpModel::hidden_preactivation(std::span<const double> x) const {
    std::vector<double> pre(hidden_);
    const auto n = input_size();
    for (std::size_t j = 0; j < hidden_; ++j) {
        pre[j] = hidden_biases_[j] + dot(std::span<const double>(hidden_weights_).subspan(j * n, n), x);
    }
    return pre;
}

std::size_t num_classes(const ToyModel& model) {
    return std::visit([](const auto& m) { return m.num_classes(); }, model);
}

const Shape& input_shape(const ToyModel& model) {
    return std::visit([](const auto& m) -> const Shape& { return m.input_shape(); }, model);
}

std::string architecture_name(const ToyModel& model) {
    return std::holds_alternative<LinearSoftmaxModel>(model) ? "linear" : "mlp";
}

std::vector<double> forward_logits(const ToyModel& model, const Tensor3& input) {
    check_input(input_shape(model), input);
    const auto x = input.values();
    return std::visit(
        overloaded{
            [&](const LinearSoftmaxModel& m) {
                std::vector<double> logits(m.num_classes());
                for (ClassId c = 0; c < m.num_classes(); ++c) {
                    logits[c] = m.biases()[c] + dot(m.class_weights(c), x);
                }
                return logits;
            },
            [&](const MlpModel& m) {
                auto act = m.hidden_preactivation(x);
                for (double& a : act) {
                    a = std::max(a, 0.0);
                }
                std::vector<double> logits(m.num_classes());
                const auto h = m.hidden_size();
                for (ClassId c = 0; c < m.num_classes(); ++c) {
                    logits[c] = m.output_biases()[c] +
                                dot(std::span<const double>(m.output_weights()).subspan(c * h, h), act);
                }
                return logits;
            },
        },
        model);
}

std::vector<double> softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

std::vector<double> predict_probs(const ToyModel& model, const Tensor3& input) {
    return softmax(forward_logits(model, input));
}

std::vector<Tensor3> logit_input_gradients(const ToyModel& model, const Tensor3& input) {
    check_input(input_shape(model), input);
    const auto& shape = input.shape();
    return std::visit(
        overloaded{
            [&](const LinearSoftmaxModel& m) {
                std::vector<Tensor3> grads;
                for (ClassId c = 0; c < m.num_classes(); ++c) {
                    const auto w = m.class_weights(c);
                    grads.emplace_back(shape, std::vector<double>(w.begin(), w.end()));
                }
                return grads;
            },
            [&](const MlpModel& m) {
                const auto pre = m.hidden_preactivation(input.values());
                const auto n = m.input_size();
                const auto h = m.hidden_size();
                std::vector<Tensor3> grads;
                for (ClassId c = 0; c < m.num_classes(); ++c) {
                    std::vector<double> g(n, 0.0);
                    for (std::size_t j = 0; j < h; ++j) {
                        if (pre[j] <= 0.0) {
                            continue;
                        }
                        const double upstream = m.output_weights()[c * h + j];
                        const double* row = m.hidden_weights().data() + j * n;
                        for (std::size_t i = 0; i < n; ++i) {
                            g[i] += upstream * row[i];
                        }
                    }
                    grads.emplace_back(shape, std::move(g));
                }
                return grads;
            },
        },
        model);
}

Tensor3 logit_input_gradient(const ToyModel& model, const Tensor3& input, ClassId class_id) {
    check_class(model, class_id);
    check_input(input_shape(model), input);
    if (const auto* linear = std::get_if<LinearSoftmaxModel>(&model)) {
        const auto w = linear->class_weights(class_id);
        return Tensor3(input.shape(), std::vector<double>(w.begin(), w.end()));
    }
    const auto& m = std::get<MlpModel>(model);
    const auto pre = m.hidden_preactivation(input.values());
    const auto n = m.input_size();
    const auto h = m.hidden_size();
    std::vector<double> g(n, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        if (pre[j] <= 0.0) {
            continue;
        }
        const double upstream = m.output_weights()[class_id * h + j];
        const double* row = m.hidden_weights().data() + j * n;
        for (std::size_t i = 0; i < n; ++i) {
            g[i] += upstream * row[i];
        }
    }
    return Tensor3(input.shape(), std::move(g));
}

Tensor3 softmax_prob_gradient(const ToyModel& model, const Tensor3& input, ClassId class_id) {
    check_class(model, class_id);
    const auto probs = predict_probs(model, input);
    const auto grads = logit_input_gradients(model, input);
    const auto n = input.shape().size();

    // Sum over competitors of p_k (grad z_c - grad z_k); equal to
    // grad z_c - sum_k p_k grad z_k but free of cancellation when p_c -> 1.
    const auto own = grads[class_id].values();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (k == class_id) {
            continue;
        }
        const auto g = grads[k].values();
        for (std::size_t i = 0; i < n; ++i) {
            out[i] += probs[k] * (own[i] - g[i]);
        }
    }
    for (auto& v : out) {
        v *= probs[class_id];
    }
    return Tensor3(input.shape(), std::move(out));
}

std::vector<ParameterGroup> parameter_groups(const ToyModel& model) {
    return std::visit(overloaded{
                          [](const LinearSoftmaxModel& m) {
                              return std::vector<ParameterGroup>{{"weights", m.weights()}, {"biases", m.biases()}};
                          },
                          [](const MlpModel& m) {
                              return std::vector<ParameterGroup>{{"output_weights", m.output_weights()},
                                                                 {"output_biases", m.output_biases()},
                                                                 {"hidden_weights", m.hidden_weights()},
                                                                 {"hidden_biases", m.hidden_biases()}};
                          },
                      },
                      model);
}

std::size_t randomized_group_count(const ToyModel& model, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ConfigError("randomization fraction must be in [0, 1]");
    }
    const auto groups = parameter_groups(model).size();
    // Slack keeps e.g. 0.5 · 4 from rounding up to 3 through representation error.
    const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(groups) - 1e-9));
    return std::min(count, groups);
}

ToyModel randomize_layers(const ToyModel& model, double fraction, std::uint64_t seed) {
    const auto count = randomized_group_count(model, fraction);
    ToyModel out = model;
    std::visit(overloaded{
                   [&](LinearSoftmaxModel& m) {
                       std::vector<std::vector<double>*> groups{&m.mutable_weights(), &m.mutable_biases()};
                       for (std::size_t g = 0; g < count; ++g) {
                           redraw(*groups[g], seed, g);
                       }
                   },
                   [&](MlpModel& m) {
                       std::vector<std::vector<double>*> groups{&m.mutable_output_weights(), &m.mutable_output_biases(),
                                                                &m.mutable_hidden_weights(), &m.mutable_hidden_biases()};
                       for (std::size_t g = 0; g < count; ++g) {
                           redraw(*groups[g], seed, g);
                       }
                   },
               },
               out);
    return out;
}

LinearSoftmaxModel make_random_linear(Shape input, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(input.size())));
    std::vector<double> w(classes * input.size());
    for (double& v : w) {
        v = normal(rng);
    }
    std::vector<double> b(classes);
    for (double& v : b) {
        v = 0.1 * normal(rng);
    }
    return LinearSoftmaxModel(input, classes, std::move(w), std::move(b));
}

MlpModel make_random_mlp(Shape input, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto n = input.size();
    std::normal_distribution<double> w1_dist(0.0, std::sqrt(2.0 / static_cast<double>(n)));
    std::normal_distribution<double> w2_dist(0.0, std::sqrt(2.0 / static_cast<double>(hidden)));
    std::normal_distribution<double> b_dist(0.0, 0.1);
    std::vector<double> w1(hidden * n), b1(hidden), w2(classes * hidden), b2(classes);
    for (double& v : w1) v = w1_dist(rng);
    for (double& v : b1) v = b_dist(rng);
    for (double& v : w2) v = w2_dist(rng);
    for (double& v : b2) v = b_dist(rng);
    return MlpModel(input, hidden, classes, std::move(w1), std::move(b1), std::move(w2), std::move(b2));
}

void save_model(const std::filesystem::path& dir, const ToyModel& model, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["architecture"] = architecture_name(model);
    manifest["input"] = shape_json(input_shape(model));
    manifest["classes"] = num_classes(model);
    manifest["seed"] = seed;
    nlohmann::json files = nlohmann::json::object();
    std::visit(overloaded{
                   [&](const LinearSoftmaxModel& m) {
                       npy::write(dir / "weights.npy", {{m.num_classes(), m.input_size()}, m.weights()});
                       npy::write(dir / "biases.npy", {{m.num_classes()}, m.biases()});
                       files["weights"] = "weights.npy";
                       files["biases"] = "biases.npy";
                   },
                   [&](const MlpModel& m) {
                       manifest["hidden"] = m.hidden_size();
                       npy::write(dir / "hidden_weights.npy", {{m.hidden_size(), m.input_size()}, m.hidden_weights()});
                       npy::write(dir / "hidden_biases.npy", {{m.hidden_size()}, m.hidden_biases()});
                       npy::write(dir / "output_weights.npy", {{m.num_classes(), m.hidden_size()}, m.output_weights()});
                       npy::write(dir / "output_biases.npy", {{m.num_classes()}, m.output_biases()});
                       files["hidden_weights"] = "hidden_weights.npy";
                       files["hidden_biases"] = "hidden_biases.npy";
                       files["output_weights"] = "output_weights.npy";
                       files["output_biases"] = "output_biases.npy";
                   },
               },
               model);
    manifest["parameters"] = files;
    std::ofstream out(dir / "model.json", std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + (dir / "model.json").string());
    }
    out << manifest.dump(2) << "\n";
}

ToyModel load_model(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) {
        throw IoError("cannot open " + (dir / "model.json").string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
        const Shape input{manifest.at("input").at("height").get<std::size_t>(),
                          manifest.at("input").at("width").get<std::size_t>(),
                          manifest.at("input").at("channels").get<std::size_t>()};
        const auto classes = manifest.at("classes").get<std::size_t>();
        const auto& files = manifest.at("parameters");
        const auto arch = manifest.at("architecture").get<std::string>();
        auto load = [&](const char* key) { return npy::read(dir / files.at(key).get<std::string>()).data; };
        if (arch == "linear") {
            return LinearSoftmaxModel(input, classes, load("weights"), load("biases"));
        }
        if (arch == "mlp") {
            return MlpModel(input, manifest.at("hidden").get<std::size_t>(), classes, load("hidden_weights"),
                            load("hidden_biases"), load("output_weights"), load("output_biases"));
        }
        throw ConfigError("unknown model architecture '" + arch + "'");
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError((dir / "model.json").string() + ": " + e.what(), e.byte);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "model.json").string() + ": " + e.what(), 0);
    }
}

}  // namespace alens
