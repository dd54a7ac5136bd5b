#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfl/rng.hpp"
#include "hfl/tensor.hpp"

namespace hfl {

struct Dataset {
    Tensor<float> images;  // (count, channels, H, W), values in [0,1]
    std::vector<int> labels;
    int classes = 0;
    std::string split = "train";

    int count() const { return images.empty() ? 0 : images.shape()[0]; }
    int channels() const { return images.shape()[1]; }
    int height() const { return images.shape()[2]; }
    int width() const { return images.shape()[3]; }

    Dataset subset(const std::vector<int>& indices) const {
        Dataset d;
        d.classes = classes;
        d.split = split;
        d.images = Tensor<float>({static_cast<int>(indices.size()), channels(), height(), width()});
        const std::size_t px = static_cast<std::size_t>(channels()) * height() * width();
        d.labels.reserve(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const int s = indices[i];
            if (s < 0 || s >= count()) throw std::out_of_range("dataset subset: bad index");
            std::copy(images.data() + s * px, images.data() + (s + 1) * px, d.images.data() + i * px);
            d.labels.push_back(labels[s]);
        }
        return d;
    }
};

struct TrainTest {
    Dataset train;
    Dataset test;
};

struct Partition {
    std::vector<std::vector<int>> shards;  // client -> sample indices
    double alpha = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    std::vector<int> sizes() const {
        std::vector<int> s;
        for (const auto& sh : shards) s.push_back(static_cast<int>(sh.size()));
        return s;
    }
};

// Class-balanced, size-imbalanced Dirichlet split: one proportion vector
// p ~ Dir(alpha * 1) drawn once and applied to every class, with
// largest-remainder rounding so shards are disjoint and exhaustive.
inline Partition dirichlet_partition(const Dataset& data, int num_clients, double alpha,
                                     std::uint64_t seed) {
    if (alpha <= 0) throw std::invalid_argument("dirichlet_partition: alpha must be > 0");
    if (num_clients < 1) throw std::invalid_argument("dirichlet_partition: need at least one client");
    Partition part;
    part.alpha = alpha;
    part.seed = seed;
    part.shards.resize(num_clients);

    Rng rng = make_rng(seed, 0x646972ULL);
    std::vector<double> p(num_clients);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    double total = 0;
    for (double& v : p) {
        v = std::max(gamma(rng), 1e-300);
        total += v;
    }
    for (double& v : p) v /= total;

    std::vector<std::vector<int>> by_class(data.classes);
    for (int i = 0; i < data.count(); ++i) by_class[data.labels[i]].push_back(i);

    for (int cls = 0; cls < data.classes; ++cls) {
        auto& pool = by_class[cls];
        std::shuffle(pool.begin(), pool.end(), rng);
        const int n = static_cast<int>(pool.size());
        std::vector<int> take(num_clients);
        std::vector<std::pair<double, int>> rem(num_clients);
        int assigned = 0;
        for (int c = 0; c < num_clients; ++c) {
            const double exact = p[c] * n;
            take[c] = static_cast<int>(std::floor(exact));
            rem[c] = {exact - take[c], c};
            assigned += take[c];
        }
        std::stable_sort(rem.begin(), rem.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (int i = 0; i < n - assigned; ++i) take[rem[i].second] += 1;
        int cursor = 0;
        for (int c = 0; c < num_clients; ++c) {
            if (take[c] == 0)
                part.warnings.push_back("client " + std::to_string(c) + " received 0 samples of class " +
                                        std::to_string(cls));
            for (int i = 0; i < take[c]; ++i) part.shards[c].push_back(pool[cursor++]);
        }
    }
    for (auto& sh : part.shards) std::sort(sh.begin(), sh.end());
    return part;
}

// Desk-scale stand-in for CIFAR: class-conditional smooth patterns plus
// per-sample Gaussian noise, deterministic from the seed.
inline TrainTest synthetic_dataset(int classes, int per_class_train, int per_class_test,
                                   int image_size, double noise, std::uint64_t seed,
                                   int channels = 1) {
    if (classes < 2) throw std::invalid_argument("synthetic_dataset: need >= 2 classes");
    if (per_class_train < 1) throw std::invalid_argument("synthetic_dataset: empty dataset");
    if (image_size % 8 != 0) throw std::invalid_argument("synthetic_dataset: image size must be divisible by 8");

    // class prototypes: low-frequency sinusoid fields
    std::vector<std::vector<float>> proto(classes);
    const int px = channels * image_size * image_size;
    for (int k = 0; k < classes; ++k) {
        Rng rng = make_rng(seed, 0x70726f746fULL, k);
        proto[k].resize(px);
        for (int c = 0; c < channels; ++c) {
            const double fx = uniform(rng) * 3.0 + 0.5;
            const double fy = uniform(rng) * 3.0 + 0.5;
            const double phase = uniform(rng) * 6.283185307;
            for (int y = 0; y < image_size; ++y)
                for (int x = 0; x < image_size; ++x)
                    proto[k][(c * image_size + y) * image_size + x] = static_cast<float>(
                        0.5 + 0.35 * std::sin(6.283185307 * (fx * x + fy * y) / image_size + phase));
        }
    }

    const auto make_split = [&](int per_class, std::uint64_t tag, const char* name) {
        Dataset d;
        d.classes = classes;
        d.split = name;
        const int n = classes * per_class;
        d.images = Tensor<float>({n, channels, image_size, image_size});
        d.labels.resize(n);
        for (int i = 0; i < n; ++i) {
            const int k = i % classes;
            d.labels[i] = k;
            Rng rng = make_rng(seed, tag, i);
            float* out = d.images.data() + static_cast<std::size_t>(i) * px;
            for (int j = 0; j < px; ++j) {
                const double v = proto[k][j] + noise * normal(rng);
                out[j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
        return d;
    };

    TrainTest tt;
    tt.train = make_split(per_class_train, 0x747261696eULL, "train");
    tt.test = make_split(std::max(per_class_test, 1), 0x74657374ULL, "test");
    return tt;
}

// Pad-4 zero padding, random crop back to the original size, horizontal flip
// with probability 0.5. Label-preserving; train-time only.
inline Tensor<float> augment(const Tensor<float>& batch, Rng& rng) {
    const int B = batch.shape()[0], C = batch.shape()[1], H = batch.shape()[2], W = batch.shape()[3];
    const int pad = 4;
    Tensor<float> out(batch.shape());
    for (int bi = 0; bi < B; ++bi) {
        const int dy = uniform_int(rng, 0, 2 * pad) - pad;
        const int dx = uniform_int(rng, 0, 2 * pad) - pad;
        const bool flip = uniform(rng) < 0.5;
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const int sy = y + dy;
                    const int sx = (flip ? W - 1 - x : x) + dx;
                    out.at4(bi, c, y, x) = (sy >= 0 && sy < H && sx >= 0 && sx < W)
                                               ? batch.at4(bi, c, sy, sx)
                                               : 0.0f;
                }
    }
    return out;
}

// CIFAR-10 binary records: 1 label byte + 3072 pixel bytes (R,G,B planes).
inline Dataset load_cifar_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cifar: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    constexpr std::size_t rec = 3073;
    if (bytes.empty() || bytes.size() % rec != 0)
        throw std::runtime_error("cifar: file length " + std::to_string(bytes.size()) +
                                 " is not a multiple of 3073: " + path);
    const int n = static_cast<int>(bytes.size() / rec);
    Dataset d;
    d.classes = 10;
    d.images = Tensor<float>({n, 3, 32, 32});
    d.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const unsigned char* r = bytes.data() + i * rec;
        if (r[0] > 9) throw std::runtime_error("cifar: label byte out of range in " + path);
        d.labels[i] = r[0];
        float* img = d.images.data() + static_cast<std::size_t>(i) * 3072;
        for (int j = 0; j < 3072; ++j) img[j] = r[1 + j] / 255.0f;
    }
    return d;
}

// `path` is either one .bin file (loaded as the train split) or the CIFAR-10
// batch directory with data_batch_1..5.bin and test_batch.bin.
inline TrainTest load_cifar_binary(const std::string& path) {
    namespace fs = std::filesystem;
    TrainTest tt;
    if (fs::is_directory(path)) {
        std::vector<Dataset> parts;
        for (int i = 1; i <= 5; ++i)
            parts.push_back(load_cifar_file((fs::path(path) / ("data_batch_" + std::to_string(i) + ".bin")).string()));
        int total = 0;
        for (const auto& p : parts) total += p.count();
        tt.train.classes = 10;
        tt.train.images = Tensor<float>({total, 3, 32, 32});
        int off = 0;
        for (const auto& p : parts) {
            std::copy(p.images.data(), p.images.data() + p.images.size(),
                      tt.train.images.data() + static_cast<std::size_t>(off) * 3072);
            tt.train.labels.insert(tt.train.labels.end(), p.labels.begin(), p.labels.end());
            off += p.count();
        }
        tt.test = load_cifar_file((fs::path(path) / "test_batch.bin").string());
        tt.test.split = "test";
    } else {
        tt.train = load_cifar_file(path);
        tt.test.classes = 10;
    }
    return tt;
}

}  // namespace hfl
