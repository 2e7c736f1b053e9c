#include <gga/detector.hpp>

#include <gga/error.hpp>
#include <gga/rng.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>

namespace gga::detector {

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

std::vector<double> SurfaceFeatures::values() const {
    return {out_len, repetition_ratio, avg_word_len, unique_word_ratio, ans_prefix_flag, comma_count, qmark_count};
}

SurfaceFeatures surface_features(std::string_view text) {
    std::vector<std::string> words;
    {
        std::istringstream in{std::string(text)};
        std::string w;
        while (in >> w) words.push_back(w);
    }
    SurfaceFeatures f;
    f.out_len = static_cast<double>(words.size());
    if (!words.empty()) {
        const std::set<std::string> distinct(words.begin(), words.end());
        f.unique_word_ratio = static_cast<double>(distinct.size()) / static_cast<double>(words.size());
        double chars = 0.0;
        for (const auto& w : words) {
            // UTF-8 code points
            chars += static_cast<double>(std::count_if(w.begin(), w.end(), [](char c) {
                return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
            }));
        }
        f.avg_word_len = chars / static_cast<double>(words.size());
    }
    f.repetition_ratio = 1.0 - f.unique_word_ratio;

    std::string lower(text);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    f.ans_prefix_flag = lower.find("ans:") != std::string::npos ? 1.0 : 0.0;
    f.comma_count = static_cast<double>(std::count(text.begin(), text.end(), ','));
    f.qmark_count = static_cast<double>(std::count(text.begin(), text.end(), '?'));
    return f;
}

const std::vector<std::string>& core_feature_names() {
    static const std::vector<std::string> names = {"prd", "sas"};
    return names;
}

const std::vector<std::string>& surface_feature_names() {
    static const std::vector<std::string> names = {"out_len",         "repetition_ratio", "avg_word_len",
                                                   "unique_word_ratio", "ans_prefix_flag", "comma_count",
                                                   "qmark_count"};
    return names;
}

const std::vector<std::string>& baseline_feature_names() {
    static const std::vector<std::string> names = {"perplexity_log", "token_conf", "max_token_prob",
                                                   "bertscore_f1",   "embed_div",  "nli_contra"};
    return names;
}

std::vector<std::string> full_feature_names() {
    auto out = core_feature_names();
    const auto& surface = surface_feature_names();
    out.insert(out.end(), surface.begin(), surface.end());
    return out;
}

std::vector<std::string> subset_columns(std::string_view subset) {
    if (subset == "sas-only") return {"sas"};
    if (subset == "prd-only") return {"prd"};
    if (subset == "gga-core") return core_feature_names();
    if (subset == "gga-full") return full_feature_names();
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= subset.size(); ++i) {
        if (i == subset.size() || subset[i] == ',') {
            if (i > start) out.emplace_back(subset.substr(start, i - start));
            start = i + 1;
        }
    }
    if (out.empty()) throw InputError("empty feature subset");
    return out;
}

FeatureTable FeatureTable::select(std::span<const std::string> wanted) const {
    std::vector<std::size_t> idx;
    for (const auto& name : wanted) {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw InputError("feature table has no column '" + name + "'");
        idx.push_back(static_cast<std::size_t>(it - columns.begin()));
    }
    return {ids, std::vector<std::string>(wanted.begin(), wanted.end()), values.select_columns(idx)};
}

FeatureTable feature_table_from_csv(const CsvTable& csv) {
    const auto id_col = csv.index("id");
    FeatureTable t;
    std::vector<std::size_t> value_cols;
    for (std::size_t c = 0; c < csv.columns.size(); ++c) {
        if (c == id_col) continue;
        t.columns.push_back(csv.columns[c]);
        value_cols.push_back(c);
    }
    t.values = Matrix(csv.rows.size(), value_cols.size());
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        t.ids.push_back(csv.rows[r][id_col]);
        for (std::size_t i = 0; i < value_cols.size(); ++i) {
            const auto& cell = csv.rows[r][value_cols[i]];
            t.values(r, i) = cell.empty() ? std::nan("") : parse_double(cell);
        }
    }
    return t;
}

CsvTable to_csv(const FeatureTable& table) {
    CsvTable csv;
    csv.columns.push_back("id");
    csv.columns.insert(csv.columns.end(), table.columns.begin(), table.columns.end());
    for (std::size_t r = 0; r < table.ids.size(); ++r) {
        std::vector<std::string> row{table.ids[r]};
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            const double v = table.values(r, c);
            row.push_back(std::isnan(v) ? "" : format_double(v));
        }
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

ScalerParams fit_scaler(const Matrix& x, double clip_sigma) {
    if (x.rows() < 2) throw DegenerateMatrixError("scaler needs at least 2 rows, got " + std::to_string(x.rows()));
    ScalerParams p;
    p.clip_sigma = clip_sigma;
    const double n = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        const auto col = x.column(c);
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / n);
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        p.mean.push_back(mean);
        p.stddev.push_back(constant ? 0.0 : sd);
        p.constant.push_back(constant);
    }
    return p;
}

Matrix transform(const Matrix& x, const ScalerParams& p) {
    if (x.cols() != p.mean.size()) {
        throw ShapeError("scaler fitted on " + std::to_string(p.mean.size()) + " features, got " + std::to_string(x.cols()));
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            out(r, c) = p.constant[c] ? 0.0
                                      : std::clamp((x(r, c) - p.mean[c]) / p.stddev[c], -p.clip_sigma, p.clip_sigma);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

ModelKind model_kind_from_string(std::string_view s) {
    if (s == "gbdt") return ModelKind::kGbdt;
    if (s == "logistic") return ModelKind::kLogistic;
    throw InputError("model kind must be 'gbdt' or 'logistic', got '" + std::string(s) + "'");
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kGbdt ? "gbdt" : "logistic"; }

double Tree::predict(std::span<const double> row) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[i].value;
}

namespace {

double sigmoid(double z) {
    const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(p, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

void check_training_inputs(const Matrix& x, std::span<const int> y) {
    if (x.rows() != y.size()) throw InputError("feature rows and labels differ in length");
    if (x.cols() == 0) throw InputError("no feature columns");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw InputError("feature matrix contains a non-finite value");
    }
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw InputError("labels must be 0 or 1");
        pos += static_cast<std::size_t>(v);
    }
    if (pos == 0 || pos == y.size()) throw SingleClassError("training labels contain a single class");
}

// Exact greedy regression tree on first/second order gradients.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const std::vector<double>& grad, const std::vector<double>& hess, const GbdtParams& p)
        : x_(x), grad_(grad), hess_(hess), p_(p) {}

    Tree build(std::vector<std::size_t> rows) {
        Tree t;
        grow(t, std::move(rows), 0);
        return t;
    }

    // Leaf each row ends up in, filled by build().
    std::vector<std::pair<std::size_t, int>> assignments;

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    double score(double g, double h) const { return g * g / (h + p_.lambda); }

    int grow(Tree& t, std::vector<std::size_t> rows, int depth) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        double g = 0.0;
        double h = 0.0;
        for (auto r : rows) {
            g += grad_[r];
            h += hess_[r];
        }
        const Split split = depth < p_.max_depth ? best_split(rows, g, h) : Split{};
        if (split.feature < 0) {
            t.nodes[id].value = -g / (h + p_.lambda) * p_.learning_rate;
            for (auto r : rows) assignments.emplace_back(r, id);
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto r : rows) (x_(r, split.feature) < split.threshold ? left : right).push_back(r);
        t.nodes[id].feature = split.feature;
        t.nodes[id].threshold = split.threshold;
        const int l = grow(t, std::move(left), depth + 1);
        const int r = grow(t, std::move(right), depth + 1);
        t.nodes[id].left = l;
        t.nodes[id].right = r;
        return id;
    }

    Split best_split(const std::vector<std::size_t>& rows, double g, double h) const {
        Split best;
        const double parent = score(g, h);
        std::vector<std::size_t> order(rows);
        for (std::size_t f = 0; f < x_.cols(); ++f) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
            double gl = 0.0;
            double hl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                gl += grad_[order[k]];
                hl += hess_[order[k]];
                const double lo = x_(order[k], f);
                const double hi = x_(order[k + 1], f);
                if (!(lo < hi)) continue;
                const double hr = h - hl;
                if (hl < p_.min_child_weight || hr < p_.min_child_weight) continue;
                const double gain = 0.5 * (score(gl, hl) + score(g - gl, hr) - parent) - p_.gamma;
                if (gain > best.gain) {
                    double thr = lo + (hi - lo) / 2.0;
                    if (!(lo < thr)) thr = hi;
                    best = {static_cast<int>(f), thr, gain};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const std::vector<double>& grad_;
    const std::vector<double>& hess_;
    const GbdtParams& p_;
};

void fit_gbdt(DetectorModel& m, const Matrix& x, std::span<const int> y) {
    const std::size_t n = y.size();
    const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double neg = static_cast<double>(n) - pos;
    m.scale_pos_weight = m.gbdt.use_scale_pos_weight ? neg / pos : 1.0;
    m.base_margin = std::log(pos / neg);

    std::vector<double> margin(n, m.base_margin);
    std::vector<double> grad(n);
    std::vector<double> hess(n);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int t = 0; t < m.gbdt.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            const double w = y[i] == 1 ? m.scale_pos_weight : 1.0;
            grad[i] = w * (p - y[i]);
            hess[i] = w * p * (1.0 - p);
        }
        TreeBuilder builder(x, grad, hess, m.gbdt);
        m.trees.push_back(builder.build(all));
        const auto& tree = m.trees.back();
        for (const auto& [row, leaf] : builder.assignments) margin[row] += tree.nodes[leaf].value;
    }
}

// Damped Newton on 0.5 |w|^2 + C sum_i s_i logloss_i (intercept unpenalized).
void fit_logistic(DetectorModel& m, const Matrix& x, std::span<const int> y) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double neg = static_cast<double>(n) - pos;
    const double w_pos = m.logistic.balanced ? static_cast<double>(n) / (2.0 * pos) : 1.0;
    const double w_neg = m.logistic.balanced ? static_cast<double>(n) / (2.0 * neg) : 1.0;
    const double c = m.logistic.c;

    Eigen::MatrixXd design(n, p + 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < p; ++k) design(r, k) = x(r, k);
        design(r, p) = 1.0;
    }
    Eigen::VectorXd target(n);
    Eigen::VectorXd sample_w(n);
    for (std::size_t r = 0; r < n; ++r) {
        target(r) = y[r];
        sample_w(r) = y[r] == 1 ? w_pos : w_neg;
    }

    auto objective = [&](const Eigen::VectorXd& beta) {
        const Eigen::VectorXd z = design * beta;
        double loss = 0.5 * beta.head(p).squaredNorm();
        for (std::size_t r = 0; r < n; ++r) {
            // log(1 + e^z) - y z, stable
            const double softplus = z(r) > 0 ? z(r) + std::log1p(std::exp(-z(r))) : std::log1p(std::exp(z(r)));
            loss += c * sample_w(r) * (softplus - target(r) * z(r));
        }
        return loss;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    double f = objective(beta);
    int iter = 0;
    for (; iter < m.logistic.max_iter; ++iter) {
        const Eigen::VectorXd z = design * beta;
        Eigen::VectorXd resid(n);
        Eigen::VectorXd curv(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double prob = sigmoid(z(r));
            resid(r) = c * sample_w(r) * (prob - target(r));
            curv(r) = c * sample_w(r) * prob * (1.0 - prob);
        }
        Eigen::VectorXd grad = design.transpose() * resid;
        grad.head(p) += beta.head(p);
        if (grad.lpNorm<Eigen::Infinity>() < m.logistic.tolerance) break;

        Eigen::MatrixXd hess = design.transpose() * curv.asDiagonal() * design;
        hess.topLeftCorner(p, p) += Eigen::MatrixXd::Identity(p, p);
        hess.diagonal().array() += 1e-12;
        const Eigen::VectorXd step = hess.ldlt().solve(-grad);

        double t = 1.0;
        const double slope = grad.dot(step);
        Eigen::VectorXd next = beta + step;
        double f_next = objective(next);
        while (f_next > f + 1e-4 * t * slope && t > 1e-10) {
            t *= 0.5;
            next = beta + t * step;
            f_next = objective(next);
        }
        if (f_next > f) break;
        beta = next;
        f = f_next;
    }
    m.iterations = iter;
    m.weights.assign(beta.data(), beta.data() + p);
    m.bias = beta(p);
}

} // namespace

double raw_margin(const DetectorModel& m, std::span<const double> row) {
    if (m.kind == ModelKind::kGbdt) {
        double z = m.base_margin;
        for (const auto& t : m.trees) z += t.predict(row);
        return z;
    }
    double z = m.bias;
    for (std::size_t k = 0; k < m.weights.size(); ++k) z += m.weights[k] * row[k];
    return z;
}

std::vector<double> predict_proba(const DetectorModel& m, const Matrix& x) {
    if (x.cols() != m.feature_count()) {
        throw ShapeError("model expects " + std::to_string(m.feature_count()) + " features, got " +
                         std::to_string(x.cols()));
    }
    const Matrix scaled = transform(x, m.scaler);
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = sigmoid(raw_margin(m, scaled.row(r)));
    return out;
}

DetectorModel train(const Matrix& x, std::span<const int> y, ModelKind kind, const TrainParams& params,
                    std::uint64_t seed, std::vector<std::string> feature_names) {
    check_training_inputs(x, y);
    if (feature_names.empty()) {
        for (std::size_t c = 0; c < x.cols(); ++c) feature_names.push_back("f" + std::to_string(c));
    }
    if (feature_names.size() != x.cols()) throw ShapeError("feature name count does not match columns");

    DetectorModel m;
    m.kind = kind;
    m.seed = seed;
    m.feature_names = std::move(feature_names);
    m.gbdt = params.gbdt;
    m.logistic = params.logistic;
    m.scaler = fit_scaler(x);
    const Matrix scaled = transform(x, m.scaler);
    if (kind == ModelKind::kGbdt) {
        fit_gbdt(m, scaled, y);
    } else {
        fit_logistic(m, scaled, y);
    }
    m.threshold = threshold_search(predict_proba(m, x), y);
    return m;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const DetectorModel& m) {
    nlohmann::json j = {
        {"format_version", "gga-detector-1"},
        {"kind", to_string(m.kind)},
        {"feature_names", m.feature_names},
        {"threshold", m.threshold},
        {"seed", m.seed},
        {"scaler",
         {{"mean", m.scaler.mean},
          {"stddev", m.scaler.stddev},
          {"constant", m.scaler.constant},
          {"clip_sigma", m.scaler.clip_sigma}}},
    };
    if (m.kind == ModelKind::kGbdt) {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : m.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes) {
                if (n.feature < 0) {
                    nodes.push_back({{"leaf", n.value}});
                } else {
                    nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
                }
            }
            trees.push_back(std::move(nodes));
        }
        j["gbdt"] = {
            {"n_trees", m.gbdt.n_trees},
            {"max_depth", m.gbdt.max_depth},
            {"learning_rate", m.gbdt.learning_rate},
            {"min_child_weight", m.gbdt.min_child_weight},
            {"lambda", m.gbdt.lambda},
            {"gamma", m.gbdt.gamma},
            {"base_margin", m.base_margin},
            {"scale_pos_weight", m.scale_pos_weight},
            {"trees", trees},
        };
    } else {
        j["logistic"] = {
            {"c", m.logistic.c},
            {"tolerance", m.logistic.tolerance},
            {"max_iter", m.logistic.max_iter},
            {"balanced", m.logistic.balanced},
            {"weights", m.weights},
            {"bias", m.bias},
            {"iterations", m.iterations},
        };
    }
    return j;
}

DetectorModel model_from_json(const nlohmann::json& j) {
    DetectorModel m;
    try {
        if (j.at("format_version").get<std::string>() != "gga-detector-1") throw InputError("unsupported model format");
        m.kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.threshold = j.at("threshold").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto& s = j.at("scaler");
        m.scaler.mean = s.at("mean").get<std::vector<double>>();
        m.scaler.stddev = s.at("stddev").get<std::vector<double>>();
        m.scaler.constant = s.at("constant").get<std::vector<bool>>();
        m.scaler.clip_sigma = s.at("clip_sigma").get<double>();
        if (m.kind == ModelKind::kGbdt) {
            const auto& g = j.at("gbdt");
            m.gbdt.n_trees = g.at("n_trees").get<int>();
            m.gbdt.max_depth = g.at("max_depth").get<int>();
            m.gbdt.learning_rate = g.at("learning_rate").get<double>();
            m.gbdt.min_child_weight = g.at("min_child_weight").get<double>();
            m.gbdt.lambda = g.at("lambda").get<double>();
            m.gbdt.gamma = g.at("gamma").get<double>();
            m.base_margin = g.at("base_margin").get<double>();
            m.scale_pos_weight = g.at("scale_pos_weight").get<double>();
            for (const auto& tj : g.at("trees")) {
                Tree t;
                for (const auto& nj : tj) {
                    TreeNode n;
                    if (nj.contains("leaf")) {
                        n.value = nj.at("leaf").get<double>();
                    } else {
                        n.feature = nj.at("feature").get<int>();
                        n.threshold = nj.at("threshold").get<double>();
                        n.left = nj.at("left").get<int>();
                        n.right = nj.at("right").get<int>();
                    }
                    t.nodes.push_back(n);
                }
                m.trees.push_back(std::move(t));
            }
        } else {
            const auto& l = j.at("logistic");
            m.logistic.c = l.at("c").get<double>();
            m.logistic.tolerance = l.at("tolerance").get<double>();
            m.logistic.max_iter = l.at("max_iter").get<int>();
            m.logistic.balanced = l.at("balanced").get<bool>();
            m.weights = l.at("weights").get<std::vector<double>>();
            m.bias = l.at("bias").get<double>();
            m.iterations = l.at("iterations").get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed model JSON: ") + e.what());
    }
    if (m.scaler.mean.size() != m.feature_names.size() || m.scaler.stddev.size() != m.feature_names.size() ||
        m.scaler.constant.size() != m.feature_names.size()) {
        throw ShapeError("model scaler does not match its feature list");
    }
    return m;
}

std::string serialize(const DetectorModel& m) { return to_json(m).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Thresholds and metrics
// ---------------------------------------------------------------------------

const std::vector<double>& threshold_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g(kThresholdGridSize);
        const double step = (kThresholdMax - kThresholdMin) / static_cast<double>(kThresholdGridSize - 1);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = kThresholdMin + step * static_cast<double>(k);
        g.back() = kThresholdMax;
        return g;
    }();
    return grid;
}

namespace {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion(std::span<const double> probs, std::span<const int> y, double threshold) {
    Confusion c;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        if (y[i] == 1) {
            (pred ? c.tp : c.fn) += 1;
        } else {
            (pred ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void check_binary(std::span<const double> probs, std::span<const int> y) {
    if (probs.size() != y.size()) throw InputError("probabilities and labels differ in length");
    for (int v : y) {
        if (v != 0 && v != 1) throw InputError("labels must be 0 or 1");
    }
}

} // namespace

double threshold_search(std::span<const double> probs, std::span<const int> y) {
    check_binary(probs, y);
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) {
        throw SingleClassError("threshold search needs both classes");
    }
    double best_t = threshold_grid().front();
    double best_f1 = -1.0;
    for (double t : threshold_grid()) {
        const auto c = confusion(probs, y, t);
        const double score = f1(c.tp, c.fp, c.fn);
        if (score > best_f1) {
            best_f1 = score;
            best_t = t;
        }
    }
    return best_t;
}

double roc_auc(std::span<const double> probs, std::span<const int> y) {
    check_binary(probs, y);
    const auto n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double n_neg = static_cast<double>(y.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw SingleClassError("AUC needs both classes");

    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && probs[order[j + 1]] == probs[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (y[order[k]] == 1) rank_sum += avg_rank;
        }
        i = j + 1;
    }
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

EvalMetrics evaluate(std::span<const double> probs, std::span<const int> y, double threshold) {
    check_binary(probs, y);
    EvalMetrics m;
    m.threshold = threshold;
    m.n = y.size();
    m.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (m.positives > 0 && m.positives < m.n) m.auc = roc_auc(probs, y);

    const auto c = confusion(probs, y, threshold);
    m.precision_class1 = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    m.recall_class1 = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.f1_class1 = f1(c.tp, c.fp, c.fn);
    m.f1_class0 = f1(c.tn, c.fn, c.fp);
    m.f1_macro = 0.5 * (m.f1_class0 + m.f1_class1);
    return m;
}

nlohmann::json to_json(const EvalMetrics& m) {
    return {
        {"auc", m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr)},
        {"f1_class1", m.f1_class1},
        {"f1_class0", m.f1_class0},
        {"f1_macro", m.f1_macro},
        {"precision_class1", m.precision_class1},
        {"recall_class1", m.recall_class1},
        {"threshold", m.threshold},
        {"n", m.n},
        {"positives", m.positives},
    };
}

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw StratificationError("need at least 2 folds");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 0 && y[i] != 1) throw InputError("labels must be 0 or 1");
        by_class[y[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < folds) {
            throw StratificationError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                                      " rows, fewer than " + std::to_string(folds) + " folds");
        }
    }
    Rng rng(seed);
    std::vector<std::size_t> fold_of(y.size());
    std::size_t counter = 0;
    for (auto& members : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (auto i : members) fold_of[i] = counter++ % folds;
    }
    return fold_of;
}

nlohmann::json to_json(const CvResult& cv) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : cv.folds) folds.push_back(to_json(f.metrics));
    return {{"folds", folds}, {"mean", to_json(cv.mean)}};
}

CvResult cross_validate(const Matrix& x, std::span<const int> y, std::size_t folds, ModelKind kind,
                        const TrainParams& params, std::uint64_t seed) {
    check_training_inputs(x, y);
    const auto fold_of = stratified_folds(y, folds, seed);

    CvResult cv;
    cv.mean.threshold = 0.0;
    double auc_sum = 0.0;
    std::size_t auc_count = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows;
        std::vector<std::size_t> test_rows;
        for (std::size_t i = 0; i < y.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);
        std::vector<int> y_train;
        std::vector<int> y_test;
        for (auto i : train_rows) y_train.push_back(y[i]);
        for (auto i : test_rows) y_test.push_back(y[i]);

        const auto model = train(x.select_rows(train_rows), y_train, kind, params, seed);
        FoldResult fr;
        fr.test_indices = test_rows;
        fr.test_probs = predict_proba(model, x.select_rows(test_rows));
        fr.threshold = model.threshold;
        fr.metrics = evaluate(fr.test_probs, y_test, model.threshold);
        if (fr.metrics.auc) {
            auc_sum += *fr.metrics.auc;
            ++auc_count;
        }
        cv.mean.f1_class1 += fr.metrics.f1_class1 / static_cast<double>(folds);
        cv.mean.f1_class0 += fr.metrics.f1_class0 / static_cast<double>(folds);
        cv.mean.f1_macro += fr.metrics.f1_macro / static_cast<double>(folds);
        cv.mean.precision_class1 += fr.metrics.precision_class1 / static_cast<double>(folds);
        cv.mean.recall_class1 += fr.metrics.recall_class1 / static_cast<double>(folds);
        cv.mean.threshold += fr.threshold / static_cast<double>(folds);
        cv.mean.n += fr.metrics.n;
        cv.mean.positives += fr.metrics.positives;
        cv.folds.push_back(std::move(fr));
    }
    if (auc_count > 0) cv.mean.auc = auc_sum / static_cast<double>(auc_count);
    return cv;
}

} // namespace gga::detector
