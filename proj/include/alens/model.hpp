#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "alens/maps.hpp"

namespace alens {

/// f_c(x) = w_c · x + b_c over the flattened HxWxd input.
class LinearSoftmaxModel {
public:
    LinearSoftmaxModel(Shape input, std::size_t classes, std::vector<double> weights, std::vector<double> biases);

    const Shape& input_shape() const { return input_; }
    std::size_t num_classes() const { return classes_; }
    std::size_t input_size() const { return input_.size(); }

    /// Row c of the CxN weight matrix.
    std::span<const double> class_weights(ClassId c) const {
        return std::span<const double>(weights_).subspan(c * input_size(), input_size());
    }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& biases() const { return biases_; }
    std::vector<double>& mutable_weights() { return weights_; }
    std::vector<double>& mutable_biases() { return biases_; }

private:
    Shape input_;
    std::size_t classes_;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

/// f(x) = W2 · relu(W1 · x + b1) + b2. The rectifier's derivative at exactly 0 is taken as 0.
class MlpModel {
public:
    MlpModel(Shape input, std::size_t hidden, std::size_t classes, std::vector<double> hidden_weights,
             std::vector<double> hidden_biases, std::vector<double> output_weights, std::vector<double> output_biases);

    const Shape& input_shape() const { return input_; }
    std::size_t num_classes() const { return classes_; }
    std::size_t hidden_size() const { return hidden_; }
    std::size_t input_size() const { return input_.size(); }

    const std::vector<double>& hidden_weights() const { return hidden_weights_; }
    const std::vector<double>& hidden_biases() const { return hidden_biases_; }
    const std::vector<double>& output_weights() const { return output_weights_; }
    const std::vector<double>& output_biases() const { return output_biases_; }
    std::vector<double>& mutable_hidden_weights() { return hidden_weights_; }
    std::vector<double>& mutable_hidden_biases() { return hidden_biases_; }
    std::vector<double>& mutable_output_weights() { return output_weights_; }
    std::vector<double>& mutable_output_biases() { return output_biases_; }

    /// Hidden pre-activations W1 · x + b1.
    std::vector<double> hidden_preactivation(std::span<const double> x) const;

private:
    Shape input_;
    std::size_t hidden_;
    std::size_t classes_;
    std::vector<double> hidden_weights_;
    std::vector<double> hidden_biases_;
    std::vector<double> output_weights_;
    std::vector<double> output_biases_;
};

using ToyModel = std::variant<LinearSoftmaxModel, MlpModel>;

std::size_t num_classes(const ToyModel& model);
const Shape& input_shape(const ToyModel& model);
std::string architecture_name(const ToyModel& model);

std::vector<double> forward_logits(const ToyModel& model, const Tensor3& input);

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> predict_probs(const ToyModel& model, const Tensor3& input);

/// ∂f_c/∂x, same shape as the input.
Tensor3 logit_input_gradient(const ToyModel& model, const Tensor3& input, ClassId class_id);

/// ∂f_c/∂x for every class, sharing one forward pass.
std::vector<Tensor3> logit_input_gradients(const ToyModel& model, const Tensor3& input);

/// ∇p_c = p_c (∇z_c − Σ_k p_k ∇z_k), built from the per-class logit gradients.
Tensor3 softmax_prob_gradient(const ToyModel& model, const Tensor3& input, ClassId class_id);

struct ParameterGroup {
    std::string name;
    std::span<const double> values;
};

/// Parameter groups ordered from the output layer towards the input.
std::vector<ParameterGroup> parameter_groups(const ToyModel& model);

/// Number of groups randomize_layers replaces at `fraction`: ceil(fraction · groups).
std::size_t randomized_group_count(const ToyModel& model, double fraction);

/**
 * Cascading randomization. The first randomized_group_count() groups (output
 * first) are redrawn from N(0, s²) with s the group's empirical standard
 * deviation; the rest are copied. Group g draws from its own stream seeded by
 * (seed, g), so a larger fraction extends a smaller one.
 */
ToyModel randomize_layers(const ToyModel& model, double fraction, std::uint64_t seed);

LinearSoftmaxModel make_random_linear(Shape input, std::size_t classes, std::uint64_t seed);

/// He-style initialization; biases drawn small so some rectifiers are inactive.
MlpModel make_random_mlp(Shape input, std::size_t hidden, std::size_t classes, std::uint64_t seed);

/// Writes the parameter arrays plus model.json (architecture, dims, seed) into `dir`.
void save_model(const std::filesystem::path& dir, const ToyModel& model, std::uint64_t seed);
ToyModel load_model(const std::filesystem::path& dir);

}  // namespace alens
