#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "satqfl/harness.hpp"

namespace satqfl::harness {

namespace {

constexpr std::uint64_t kDataTag = 0x6461'7461ULL;

/// Comma-separated when the line has a comma, whitespace-separated otherwise.
std::vector<std::string_view> split_fields(std::string_view line) {
    const auto trim = [](std::string_view f) {
        const auto b = f.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) {
            return std::string_view{};
        }
        return f.substr(b, f.find_last_not_of(" \t\r") - b + 1);
    };
    std::vector<std::string_view> out;
    const bool commas = line.find(',') != std::string_view::npos;
    std::size_t i = 0;
    while (i <= line.size()) {
        if (commas) {
            const auto j = std::min(line.find(',', i), line.size());
            out.push_back(trim(line.substr(i, j - i)));
            i = j + 1;
        } else {
            i = line.find_first_not_of(" \t\r", i);
            if (i == std::string_view::npos) {
                break;
            }
            const auto j = std::min(line.find_first_of(" \t\r", i), line.size());
            out.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

std::optional<double> parse_number(std::string_view s) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

}  // namespace

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open dataset " + path.string());
    }
    std::vector<std::vector<double>> rows;
    std::vector<double> raw_labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto fields = split_fields(line);
        std::vector<double> values;
        bool numeric = true;
        for (const auto f : fields) {
            const auto v = parse_number(f);
            if (!v) {
                numeric = false;
                break;
            }
            values.push_back(*v);
        }
        if (!numeric) {
            if (rows.empty() && width == 0) {
                width = fields.size();  // header row
                continue;
            }
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
        }
        if (width == 0) {
            width = values.size();
        }
        if (values.size() != width || width < 2) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(width) + " columns, found " + std::to_string(values.size()));
        }
        const double label = values.back();
        if (label != std::floor(label)) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": label is not an integer");
        }
        raw_labels.push_back(label);
        values.pop_back();
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw SchemaError(path.string() + ": no data rows");
    }
    Table t;
    t.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c + 1 < width; ++c) {
            t.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    const std::set<double> distinct(raw_labels.begin(), raw_labels.end());
    const std::vector<double> sorted(distinct.begin(), distinct.end());
    t.labels.reserve(raw_labels.size());
    for (const double l : raw_labels) {
        t.labels.push_back(static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), l) - sorted.begin()));
    }
    t.class_count = static_cast<int>(sorted.size());
    return t;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.precision(17);
    for (Eigen::Index c = 0; c < table.features.cols(); ++c) {
        out << "f" << c << ",";
    }
    out << "label\n";
    for (Eigen::Index r = 0; r < table.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < table.features.cols(); ++c) {
            out << table.features(r, c) << ",";
        }
        out << table.labels[static_cast<std::size_t>(r)] << "\n";
    }
}

Table synthetic_blobs(int rows, int features, int classes, std::uint64_t seed) {
    if (rows < 1 || features < 1 || classes < 2) {
        throw std::invalid_argument("synthetic_blobs: rows >= 1, features >= 1, classes >= 2 required");
    }
    // Class k sits at 3 * (+/-) e_{k mod features}; samples are truncated to
    // radius 1.4 around their centre, so distinct blobs never overlap.
    constexpr double kCentre = 3.0;
    constexpr double kSpread = 0.6;
    constexpr double kRadius = 1.4;
    Rng rng(seed);
    Table t;
    t.class_count = classes;
    t.features.resize(rows, features);
    t.labels.resize(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const int k = r % classes;
        Eigen::VectorXd centre = Eigen::VectorXd::Zero(features);
        centre(k % features) = ((k / features) % 2 == 0 ? 1.0 : -1.0) * kCentre;
        Eigen::VectorXd x(features);
        do {
            for (int c = 0; c < features; ++c) {
                x(c) = kSpread * rng.normal();
            }
        } while (x.norm() > kRadius);
        t.features.row(r) = (centre + x).transpose();
        t.labels[static_cast<std::size_t>(r)] = k;
    }
    return t;
}

PcaResult pca_reduce(const Eigen::MatrixXd& matrix, int k) {
    const auto rows = matrix.rows();
    const auto cols = matrix.cols();
    if (k < 1 || k > std::min(rows, cols)) {
        throw RankError("PCA rank " + std::to_string(k) + " outside [1, min(rows, cols)]");
    }
    PcaResult r;
    r.mean = matrix.colwise().mean().transpose();
    const Eigen::MatrixXd centred = matrix.rowwise() - r.mean.transpose();
    const double denom = rows > 1 ? static_cast<double>(rows - 1) : 1.0;
    const Eigen::MatrixXd cov = (centred.transpose() * centred) / denom;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("PCA eigendecomposition failed");
    }
    // Eigenvalues come back ascending; take the top k from the end.
    r.basis.resize(cols, k);
    r.explained_variance.resize(k);
    for (int j = 0; j < k; ++j) {
        const auto src = cols - 1 - j;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index pivot = 0;
        v.cwiseAbs().maxCoeff(&pivot);
        if (v(pivot) < 0.0) {
            v = -v;
        }
        r.basis.col(j) = v;
        r.explained_variance(j) = std::max(0.0, solver.eigenvalues()(src));
    }
    r.projected = centred * r.basis;
    return r;
}

PreparedData prepare_dataset(const Table& table, const DatasetSpec& spec, const std::vector<access::SatId>& satellites,
                             std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(table.features.rows());
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ConfigError("dataset.train_fraction", "must lie in (0, 1)");
    }
    if (spec.reduce_to < 1 || spec.reduce_to > table.features.cols()) {
        throw ConfigError("dataset.reduce_to", "must lie in [1, raw feature count]");
    }
    if (n < 2) {
        throw SchemaError("dataset needs at least two rows");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::derive(seed, {kDataTag}));
    rng.shuffle(order);

    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n))), 1, n - 1);
    if (satellites.size() > n_train) {
        throw EmptyShard(std::to_string(satellites.size()) + " satellites but only " + std::to_string(n_train) +
                         " training rows");
    }
    const auto cols = table.features.cols();
    Eigen::MatrixXd train(static_cast<Eigen::Index>(n_train), cols);
    Eigen::MatrixXd hold(static_cast<Eigen::Index>(n - n_train), cols);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = static_cast<Eigen::Index>(order[i]);
        if (i < n_train) {
            train.row(static_cast<Eigen::Index>(i)) = table.features.row(src);
        } else {
            hold.row(static_cast<Eigen::Index>(i - n_train)) = table.features.row(src);
        }
    }

    // Standardize with train statistics; constant columns keep unit scale.
    const Eigen::RowVectorXd mean = train.colwise().mean();
    Eigen::RowVectorXd scale(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double var = (train.col(c).array() - mean(c)).square().sum() /
                           std::max<double>(1.0, static_cast<double>(n_train) - 1.0);
        scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    train = (train.rowwise() - mean).array().rowwise() / scale.array();
    hold = (hold.rowwise() - mean).array().rowwise() / scale.array();

    const auto pca = pca_reduce(train, spec.reduce_to);
    Eigen::MatrixXd train_red = pca.projected;
    Eigen::MatrixXd hold_red = (hold.rowwise() - pca.mean.transpose()) * pca.basis;

    const Eigen::RowVectorXd lo = train_red.colwise().minCoeff();
    const Eigen::RowVectorXd hi = train_red.colwise().maxCoeff();
    const auto to_angles = [&](const Eigen::MatrixXd& m, Eigen::Index r) {
        std::vector<double> f(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double span = hi(c) - lo(c);
            const double u = span > 0.0 ? (m(r, c) - lo(c)) / span : 0.5;
            f[static_cast<std::size_t>(c)] = std::clamp(u, 0.0, 1.0) * std::numbers::pi;
        }
        return f;
    };

    PreparedData out;
    out.class_count = table.class_count;
    out.train_rows = n_train;
    std::vector<qfl::Example> train_examples(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
        train_examples[i] = {to_angles(train_red, static_cast<Eigen::Index>(i)), table.labels[order[i]]};
    }
    for (std::size_t i = n_train; i < n; ++i) {
        out.server_test.push_back({to_angles(hold_red, static_cast<Eigen::Index>(i - n_train)), table.labels[order[i]]});
    }
    const auto val_count = out.server_test.size() / 2;
    out.eval.val.assign(out.server_test.begin(), out.server_test.begin() + static_cast<std::ptrdiff_t>(val_count));
    out.eval.test.assign(out.server_test.begin() + static_cast<std::ptrdiff_t>(val_count), out.server_test.end());

    std::vector<access::SatId> sats = satellites;
    std::sort(sats.begin(), sats.end());
    for (const auto s : sats) {
        out.shards[s].owner = s;
    }
    if (sats.empty()) {
        return out;
    }
    std::vector<std::size_t> idx(n_train);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (spec.distribution == ShardPolicy::LabelSkew) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return train_examples[a].label < train_examples[b].label;
        });
        // Contiguous label-sorted chunks, sizes differing by at most one.
        const std::size_t base = n_train / sats.size();
        const std::size_t extra = n_train % sats.size();
        std::size_t at = 0;
        for (std::size_t s = 0; s < sats.size(); ++s) {
            const std::size_t take = base + (s < extra ? 1 : 0);
            for (std::size_t j = 0; j < take; ++j) {
                out.shards[sats[s]].examples.push_back(train_examples[idx[at++]]);
            }
        }
    } else {
        for (std::size_t i = 0; i < n_train; ++i) {
            out.shards[sats[i % sats.size()]].examples.push_back(train_examples[i]);
        }
    }
    return out;
}

PreparedData load_dataset(const DatasetSpec& spec, const std::vector<access::SatId>& satellites,
                          std::uint64_t seed) {
    const Table table = spec.source == "synthetic"
                            ? synthetic_blobs(spec.synthetic_rows, spec.synthetic_features, spec.synthetic_classes,
                                              Rng::derive(seed, {kDataTag, 1}))
                            : read_csv(spec.source);
    return prepare_dataset(table, spec, satellites, seed);
}

}  // namespace satqfl::harness
