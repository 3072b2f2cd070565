#include "pih/mlp.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "pih/errors.hpp"
#include "pih/rng.hpp"

namespace pih {

Mlp::Mlp(int in, int hidden, int out, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x6d6c70));
    auto init = [&rng](Eigen::MatrixXd& w, int rows, int cols) {
        w.resize(rows, cols);
        const double scale = std::sqrt(1.0 / cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-scale, scale);
    };
    init(w1_, hidden, in);
    init(w2_, hidden, hidden);
    init(w3_, out, hidden);
    b1_ = Eigen::VectorXd::Zero(hidden);
    b2_ = Eigen::VectorXd::Zero(hidden);
    b3_ = Eigen::VectorXd::Zero(out);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd h1 = (w1_ * x + b1_).array().tanh();
    Eigen::VectorXd h2 = (w2_ * h1 + b2_).array().tanh();
    return w3_ * h2 + b3_;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd h1 = ((x * w1_.transpose()).rowwise() + b1_.transpose()).array().tanh();
    Eigen::MatrixXd h2 = ((h1 * w2_.transpose()).rowwise() + b2_.transpose()).array().tanh();
    return (h2 * w3_.transpose()).rowwise() + b3_.transpose();
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
    Eigen::MatrixXd err = forward_batch(x) - y;
    return err.squaredNorm() / static_cast<double>(x.rows());
}

Eigen::VectorXd Mlp::gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              double* loss_out) const {
    const double n = static_cast<double>(x.rows());
    Eigen::MatrixXd a1 = (x * w1_.transpose()).rowwise() + b1_.transpose();
    Eigen::MatrixXd h1 = a1.array().tanh();
    Eigen::MatrixXd a2 = (h1 * w2_.transpose()).rowwise() + b2_.transpose();
    Eigen::MatrixXd h2 = a2.array().tanh();
    Eigen::MatrixXd yhat = (h2 * w3_.transpose()).rowwise() + b3_.transpose();

    Eigen::MatrixXd err = yhat - y;
    if (loss_out) *loss_out = err.squaredNorm() / n;

    // d(loss)/d(yhat) for loss = sum(err^2)/n
    Eigen::MatrixXd d3 = 2.0 / n * err;
    Eigen::MatrixXd g_w3 = d3.transpose() * h2;
    Eigen::VectorXd g_b3 = d3.colwise().sum();

    Eigen::MatrixXd d2 = (d3 * w3_).array() * (1.0 - h2.array().square());
    Eigen::MatrixXd g_w2 = d2.transpose() * h1;
    Eigen::VectorXd g_b2 = d2.colwise().sum();

    Eigen::MatrixXd d1 = (d2 * w2_).array() * (1.0 - h1.array().square());
    Eigen::MatrixXd g_w1 = d1.transpose() * x;
    Eigen::VectorXd g_b1 = d1.colwise().sum();

    Eigen::VectorXd flat(parameter_count());
    int off = 0;
    auto put = [&flat, &off](const Eigen::MatrixXd& m) {
        flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        off += static_cast<int>(m.size());
    };
    put(g_w1);
    put(g_b1);
    put(g_w2);
    put(g_b2);
    put(g_w3);
    put(g_b3);
    return flat;
}

Eigen::VectorXd Mlp::parameters() const {
    Eigen::VectorXd flat(parameter_count());
    int off = 0;
    auto put = [&flat, &off](const Eigen::MatrixXd& m) {
        flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        off += static_cast<int>(m.size());
    };
    put(w1_);
    put(b1_);
    put(w2_);
    put(b2_);
    put(w3_);
    put(b3_);
    return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
    int off = 0;
    auto take = [&flat, &off](Eigen::MatrixXd& m) {
        Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
        off += static_cast<int>(m.size());
    };
    auto take_v = [&flat, &off](Eigen::VectorXd& v) {
        v = flat.segment(off, v.size());
        off += static_cast<int>(v.size());
    };
    take(w1_);
    take_v(b1_);
    take(w2_);
    take_v(b2_);
    take(w3_);
    take_v(b3_);
}

int Mlp::parameter_count() const {
    return static_cast<int>(w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() +
                            b3_.size());
}

double Mlp::train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& cfg) {
    const int n = static_cast<int>(x.rows());
    Rng rng(mix_seed(cfg.seed, 0x747261696eULL));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(parameter_count());
    double lr = cfg.lr;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with our own rng keeps shuffles platform-stable
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }
        if (cfg.loss_history && epoch % 10 == 0) cfg.loss_history->push_back(loss(x, y));
        for (int start = 0; start < n; start += cfg.batch) {
            const int bs = std::min(cfg.batch, n - start);
            Eigen::MatrixXd bx(bs, x.cols()), by(bs, y.cols());
            for (int i = 0; i < bs; ++i) {
                bx.row(i) = x.row(order[start + i]);
                by.row(i) = y.row(order[start + i]);
            }
            Eigen::VectorXd g = gradient(bx, by);
            velocity = cfg.momentum * velocity - lr * g;
            set_parameters(parameters() + velocity);
        }
        lr *= cfg.lr_decay;
    }
    const double final_loss = loss(x, y);
    if (!std::isfinite(final_loss)) throw DivergedTraining("training loss is not finite");
    return final_loss;
}

void Mlp::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    save(out);
}

void Mlp::save(std::ostream& out) const {
    out.precision(17);
    out << "pih-mlp 1\n";
    out << input_dim() << " " << hidden_dim() << " " << output_dim() << "\n";
    auto dump = [&out](const Eigen::MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) out << m(i, j) << (j + 1 < m.cols() ? " " : "");
            out << "\n";
        }
    };
    dump(w1_);
    dump(b1_.transpose());
    dump(w2_);
    dump(b2_.transpose());
    dump(w3_);
    dump(b3_.transpose());
}

Mlp Mlp::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    return load(in);
}

Mlp Mlp::load(std::istream& in) {
    const std::string path = "<stream>";
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "pih-mlp" || version != 1) throw IoError("bad model file header: " + path);
    int din = 0, dh = 0, dout = 0;
    in >> din >> dh >> dout;
    Mlp m(din, dh, dout, 0);
    auto slurp = [&in, &path](Eigen::MatrixXd& mat) {
        for (int i = 0; i < mat.rows(); ++i)
            for (int j = 0; j < mat.cols(); ++j)
                if (!(in >> mat(i, j))) throw IoError("truncated model file: " + path);
    };
    Eigen::MatrixXd b1(1, dh), b2(1, dh), b3(1, dout);
    slurp(m.w1_);
    slurp(b1);
    slurp(m.w2_);
    slurp(b2);
    slurp(m.w3_);
    slurp(b3);
    m.b1_ = b1.row(0);
    m.b2_ = b2.row(0);
    m.b3_ = b3.row(0);
    return m;
}

}  // namespace pih
