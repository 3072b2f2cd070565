#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pih {

/// Small fully-connected regressor: in -> hidden -> hidden -> out with tanh
/// hidden activations and a linear output layer. Double precision throughout
/// so analytic gradients can be checked against finite differences.
class Mlp {
  public:
    Mlp() = default;
    Mlp(int in, int hidden, int out, std::uint64_t seed);

    int input_dim() const { return static_cast<int>(w1_.cols()); }
    int output_dim() const { return static_cast<int>(w3_.rows()); }
    int hidden_dim() const { return static_cast<int>(w1_.rows()); }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;  ///< rows = samples

    /// Mean squared error over rows of (x, y).
    double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;

    /// Backprop gradient of the MSE loss w.r.t. the flattened parameters.
    Eigen::VectorXd gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                             double* loss_out = nullptr) const;

    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    int parameter_count() const;

    struct TrainConfig {
        int epochs = 200;
        int batch = 256;
        double lr = 0.02;
        double momentum = 0.9;
        double lr_decay = 0.995;  ///< per epoch
        std::uint64_t seed = 1;
        std::vector<double>* loss_history = nullptr;  ///< full loss every 10 epochs
    };

    /// Mini-batch SGD with momentum; deterministic for a fixed seed.
    /// Returns the final full-dataset loss. Throws DivergedTraining on NaN.
    double train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& cfg);

    void save(const std::string& path) const;
    void save(std::ostream& out) const;
    static Mlp load(const std::string& path);
    static Mlp load(std::istream& in);

  private:
    Eigen::MatrixXd w1_, w2_, w3_;
    Eigen::VectorXd b1_, b2_, b3_;
};

}  // namespace pih
