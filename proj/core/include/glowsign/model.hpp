#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glowsign/dataset.hpp"

namespace glowsign {

// Small convolutional crop classifier: N conv blocks (3x3 pad-1 conv, ReLU,
// 2x2 max-pool) followed by an optional hidden dense layer and the class
// head. The default stack is ~100k parameters, sized for CPU training.
struct Architecture {
    int in_channels = 3;
    int input_size = 32;
    std::vector<int> conv_channels = {16, 32, 64};
    int fc_hidden = 64;  // 0 = classify straight off the conv features
    int num_classes = 0;

    void validate() const;
    int pooled_size() const;    // spatial side after all pool stages
    int feature_size() const;   // flattened conv output length
    size_t param_count() const;
    std::string descriptor() const;
    static Architecture from_descriptor(const std::string& text);
};

// A batch is a view over crop feature pointers plus class indices.
struct BatchView {
    std::vector<const double*> inputs;
    std::vector<int> labels;

    size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }
    void push(const double* chw, int label) {
        inputs.push_back(chw);
        labels.push_back(label);
    }
};

// Detector-style auxiliary loss terms. The reference model is a crop
// classifier, so the default backend contributes nothing; training a full
// detector requires plugging an external backend implementing these.
class DetectionTermBackend {
public:
    virtual ~DetectionTermBackend() = default;
    virtual double objectness_loss(const BatchView&) const { return 0.0; }
    virtual double location_loss(const BatchView&) const { return 0.0; }
};

class ConvNet {
public:
    ConvNet(Architecture arch, uint64_t init_seed);

    const Architecture& arch() const { return arch_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<std::string>& class_names() { return class_names_; }
    const std::vector<std::string>& class_names() const { return class_names_; }

    // Probability vector over classes for one CHW crop.
    std::vector<double> forward(const double* chw) const;

    // Mean cross-entropy over the batch; when grad is non-null, accumulates
    // weight * d(meanCE)/d(params) into it. Deterministic regardless of the
    // number of worker threads (per-sample gradients are reduced in sample
    // order).
    double batch_cross_entropy(const BatchView& batch, double weight = 1.0,
                               std::vector<double>* grad = nullptr) const;

private:
    Architecture arch_;
    std::vector<double> params_;
    std::vector<std::string> class_names_;
};

struct TrainingConfig {
    double lambda_mix = 0.5;
    int epochs = 8;
    int batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    uint64_t seed = 1;
    int crop_size = 32;

    void validate() const;
};

// Weighted mixture of clean and backdoor batch losses:
//   lambda * meanCE(clean) + (1 - lambda) * meanCE(backdoor).
// Both sides are expectations, so differing dataset sizes do not skew the
// objective. A zero-weighted side may be empty; otherwise an empty batch is
// an error. Auxiliary detector terms are added via `terms` (default none).
double mixed_loss(const ConvNet& net, const BatchView& clean, const BatchView& backdoor,
                  double lambda, std::vector<double>* grad = nullptr,
                  const DetectionTermBackend* terms = nullptr);

struct TrainLog {
    std::vector<double> epoch_loss;
};

// Trains on crops with the mixed objective. `class_vocab` fixes the class
// index order (callers append the NONE class); crops with labels outside
// the vocabulary are a vocabulary-mismatch error. Deterministic per config.
ConvNet train(const std::vector<Crop>& clean, const std::vector<Crop>& backdoor,
              const std::vector<std::string>& class_vocab, const TrainingConfig& config,
              TrainLog* log = nullptr);

struct Prediction {
    int class_index = -1;
    std::string label;
    std::vector<double> probs;
};

Prediction predict(const ConvNet& net, const Crop& crop);
// Predicted class indices for many crops (parallel, order-stable).
std::vector<int> predict_batch(const ConvNet& net, const std::vector<Crop>& crops);

// Fraction of crops whose argmax matches their label.
double accuracy(const ConvNet& net, const std::vector<Crop>& crops);

// Versioned self-describing binary checkpoint: magic, format version,
// architecture descriptor, class vocabulary, raw little-endian weights.
void save_checkpoint(const ConvNet& net, const std::filesystem::path& path);
ConvNet load_checkpoint(const std::filesystem::path& path);

}  // namespace glowsign
