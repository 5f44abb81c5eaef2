#pragma once

// Experiment configuration: INI sections [problem], [run], [analysis], [output].
// Unknown sections and keys are rejected; every seed must be given explicitly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "starpath/analyzer.hpp"
#include "starpath/dataio.hpp"
#include "starpath/error.hpp"
#include "starpath/model.hpp"
#include "starpath/problems.hpp"
#include "starpath/sgdrun.hpp"

namespace starpath {

enum class ProblemKind { least_squares, phase_retrieval, mlp };
enum class DataSource { idx, blobs };
enum class InitKind { zeros, normal, mlp_init };

struct ProblemConfig {
    ProblemKind kind = ProblemKind::least_squares;
    // synthetic families
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    std::uint64_t seed = 0;
    // mlp
    MlpSpec spec;
    std::size_t batch_size = 1;
    DataSource source = DataSource::idx;
    std::filesystem::path images;
    std::filesystem::path labels;
    std::size_t subset = 0;  // 0 keeps the whole file
    std::uint64_t subset_seed = 0;
    bool balanced = false;
    std::size_t blobs_per_class = 0;
    std::uint32_t blobs_classes = 0;
    std::size_t blobs_dim = 0;
    double blobs_separation = 0.0;
    std::uint64_t blobs_seed = 0;
};

struct RunSection {
    RunConfig run;
    std::optional<double> eta;
    std::optional<double> eta_times_inv_L;
    InitKind x0 = InitKind::zeros;
    std::uint64_t x0_seed = 0;
    double x0_scale = 1.0;
};

struct AnalysisSection {
    AnalyzerOptions options;
    ReferenceMode reference = ReferenceMode::final_iterate();
};

struct ExperimentConfig {
    std::filesystem::path source;  // the file this came from
    ProblemConfig problem;
    RunSection run;
    AnalysisSection analysis;
    std::filesystem::path output_dir = "out";
};

namespace detail {

using boost::property_tree::ptree;

class Section {
public:
    Section(const ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

    std::string field(const std::string& key) const { return name_ + "." + key; }

    std::string str(const std::string& key) const {
        if (!has(key)) throw ConfigError(field(key), "required");
        return tree_->get<std::string>(key);
    }
    std::string str(const std::string& key, const std::string& fallback) const {
        return has(key) ? str(key) : fallback;
    }

    std::uint64_t u64(const std::string& key) const {
        const std::string s = str(key);
        std::uint64_t v = 0;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || end != s.data() + s.size())
            throw ConfigError(field(key), "expected a nonnegative integer, got '" + s + "'");
        return v;
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? u64(key) : fallback;
    }

    double real(const std::string& key) const {
        const std::string s = str(key);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v))
            throw ConfigError(field(key), "expected a finite number, got '" + s + "'");
        return v;
    }
    double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = str(key);
        if (s == "true" || s == "yes" || s == "1") return true;
        if (s == "false" || s == "no" || s == "0") return false;
        throw ConfigError(field(key), "expected true or false, got '" + s + "'");
    }

    void allow(std::initializer_list<const char*> keys) const {
        if (!tree_) return;
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : *tree_)
            if (!ok.count(k)) throw ConfigError(field(k), "unknown key");
    }

private:
    const ptree* tree_;
    std::string name_;
};

inline std::vector<std::size_t> parse_layers(const Section& s, const std::string& key) {
    std::vector<std::size_t> out;
    std::stringstream in(s.str(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError(s.field(key), "empty layer size");
        item = item.substr(b, e - b + 1);
        std::size_t v = 0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || end != item.data() + item.size() || v == 0)
            throw ConfigError(s.field(key), "bad layer size '" + item + "'");
        out.push_back(v);
    }
    if (out.size() < 2) throw ConfigError(s.field(key), "need at least input and output sizes");
    return out;
}

inline ReferenceMode parse_reference(const Section& s, const std::string& key) {
    const std::string v = s.str(key, "final_iterate");
    if (v == "final_iterate") return ReferenceMode::final_iterate();
    if (v == "planted") return ReferenceMode::planted();
    if (v.rfind("epoch_end:", 0) == 0) {
        const std::string num = v.substr(10);
        std::uint64_t e = 0;
        const auto [end, ec] = std::from_chars(num.data(), num.data() + num.size(), e);
        if (ec == std::errc() && end == num.data() + num.size() && !num.empty())
            return ReferenceMode::epoch_end(e);
    }
    throw ConfigError(s.field(key), "expected final_iterate, planted or epoch_end:<E>, got '" + v + "'");
}

}  // namespace detail

/// Parses INI text. `base` resolves relative dataset paths (normally the config's directory).
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base = {}) {
    using detail::Section;
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [name, sub] : tree) {
        if (name != "problem" && name != "run" && name != "analysis" && name != "output")
            throw ConfigError(name, sub.empty() ? "key outside any section" : "unknown section");
    }
    auto section = [&](const char* name) {
        auto it = tree.find(name);
        return Section(it == tree.not_found() ? nullptr : &it->second, name);
    };

    ExperimentConfig cfg;
    const Section prob = section("problem");
    const Section run = section("run");
    const Section an = section("analysis");
    const Section out = section("output");

    // [problem]
    auto& pc = cfg.problem;
    const std::string kind = prob.str("kind");
    if (kind == "least_squares" || kind == "phase_retrieval") {
        prob.allow({"kind", "n", "d", "seed"});
        pc.kind = kind == "least_squares" ? ProblemKind::least_squares : ProblemKind::phase_retrieval;
        pc.n = prob.u64("n");
        pc.d = prob.u64("d");
        pc.seed = prob.u64("seed");
    } else if (kind == "mlp") {
        prob.allow({"kind", "layers", "activation", "loss", "init_seed", "batch_size", "dataset",
                    "images", "labels", "subset", "subset_seed", "balanced", "blobs_per_class",
                    "blobs_classes", "blobs_dim", "blobs_separation", "blobs_seed"});
        pc.kind = ProblemKind::mlp;
        pc.spec.layer_sizes = detail::parse_layers(prob, "layers");
        const std::string act = prob.str("activation", "relu");
        if (act == "relu")
            pc.spec.activation = Activation::relu;
        else if (act == "tanh")
            pc.spec.activation = Activation::tanh;
        else
            throw ConfigError(prob.field("activation"), "expected relu or tanh");
        const std::string loss = prob.str("loss", "crossentropy");
        if (loss == "crossentropy")
            pc.spec.loss = LossKind::softmax_crossentropy;
        else if (loss == "mse")
            pc.spec.loss = LossKind::mse;
        else
            throw ConfigError(prob.field("loss"), "expected crossentropy or mse");
        pc.spec.init_seed = prob.u64("init_seed");
        pc.batch_size = prob.u64("batch_size");
        if (pc.batch_size == 0) throw ConfigError(prob.field("batch_size"), "must be positive");
        const std::string src = prob.str("dataset", "idx");
        if (src == "idx") {
            pc.source = DataSource::idx;
            pc.images = base / prob.str("images");
            pc.labels = base / prob.str("labels");
            pc.subset = prob.u64("subset", 0);
            if (pc.subset > 0) pc.subset_seed = prob.u64("subset_seed");
            pc.balanced = prob.flag("balanced", false);
        } else if (src == "blobs") {
            pc.source = DataSource::blobs;
            pc.blobs_per_class = prob.u64("blobs_per_class");
            pc.blobs_classes = static_cast<std::uint32_t>(prob.u64("blobs_classes"));
            pc.blobs_dim = prob.u64("blobs_dim");
            pc.blobs_separation = prob.real("blobs_separation");
            pc.blobs_seed = prob.u64("blobs_seed");
        } else {
            throw ConfigError(prob.field("dataset"), "expected idx or blobs");
        }
    } else {
        throw ConfigError(prob.field("kind"), "expected least_squares, phase_retrieval or mlp");
    }

    // [run]
    run.allow({"eta", "eta_times_inv_L", "epochs", "seed", "record", "detail_every", "boundary_every", "x0",
               "x0_seed", "x0_scale"});
    auto& rs = cfg.run;
    if (run.has("eta") == run.has("eta_times_inv_L"))
        throw ConfigError("run.eta", "give exactly one of eta and eta_times_inv_L");
    if (run.has("eta")) rs.eta = run.real("eta");
    if (run.has("eta_times_inv_L")) {
        rs.eta_times_inv_L = run.real("eta_times_inv_L");
        if (pc.kind != ProblemKind::least_squares)
            throw ConfigError("run.eta_times_inv_L", "needs a problem with a known Lipschitz bound");
    }
    if (const double e = rs.eta.value_or(rs.eta_times_inv_L.value_or(1.0)); !(e > 0.0))
        throw ConfigError(rs.eta ? "run.eta" : "run.eta_times_inv_L", "must be positive");
    rs.run.epochs = run.u64("epochs");
    if (rs.run.epochs == 0) throw ConfigError("run.epochs", "must be positive");
    rs.run.seed = run.u64("seed");
    const std::string rec = run.str("record", "standard");
    const std::uint64_t m = run.u64("detail_every", 10);
    if (m == 0) throw ConfigError("run.detail_every", "must be >= 1");
    const std::uint64_t q = run.u64("boundary_every", 1);
    if (q == 0) throw ConfigError("run.boundary_every", "must be >= 1");
    if (rec == "standard")
        rs.run.record = {q, m, false};
    else if (rec == "boundaries")
        rs.run.record = RecordPolicy::sparse_boundaries(q);
    else if (rec == "every_mth")
        rs.run.record = RecordPolicy::every_iteration_in_every_mth_epoch(m);
    else if (rec == "full")
        rs.run.record = RecordPolicy::full_trace();
    else
        throw ConfigError("run.record", "expected standard, boundaries, every_mth or full");
    const std::string x0 = run.str("x0", pc.kind == ProblemKind::mlp ? "init" : "zeros");
    if (x0 == "zeros") {
        rs.x0 = InitKind::zeros;
    } else if (x0 == "normal") {
        rs.x0 = InitKind::normal;
        rs.x0_seed = run.u64("x0_seed");
        rs.x0_scale = run.real("x0_scale", 1.0);
    } else if (x0 == "init" && pc.kind == ProblemKind::mlp) {
        rs.x0 = InitKind::mlp_init;
    } else {
        throw ConfigError("run.x0", "expected zeros, normal" +
                                        std::string(pc.kind == ProblemKind::mlp ? " or init" : ""));
    }

    // [analysis]
    an.allow({"reference", "eps_loss", "audits", "subsequences", "variance", "lipschitz_trials",
              "lipschitz_seed", "iter_epochs_every"});
    auto& as = cfg.analysis;
    as.reference = detail::parse_reference(an, "reference");
    if (as.reference.kind == ReferenceMode::Kind::planted && pc.kind == ProblemKind::mlp)
        throw ConfigError("analysis.reference", "mlp problems have no planted minimizer");
    if (as.reference.kind == ReferenceMode::Kind::epoch_end && as.reference.epoch > rs.run.epochs)
        throw ConfigError("analysis.reference", "epoch beyond run.epochs");
    rs.run.reference = as.reference;
    as.options.eps_loss = an.real("eps_loss", 1e-3);
    as.options.audits = an.flag("audits", true);
    as.options.subsequences = an.flag("subsequences", true);
    as.options.variance = an.flag("variance", true);
    as.options.iter_epochs_every = an.u64("iter_epochs_every", 0);
    as.options.lipschitz_trials = an.u64("lipschitz_trials", 8);
    if (as.options.audits && pc.kind != ProblemKind::least_squares) {
        if (as.options.lipschitz_trials == 0)
            throw ConfigError("analysis.lipschitz_trials", "must be >= 1");
        as.options.lipschitz_seed = an.u64("lipschitz_seed");
    }

    // [output]
    out.allow({"dir"});
    cfg.output_dir = out.str("dir", "out");
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    ExperimentConfig cfg = parse_config(in, path.parent_path());
    cfg.source = path;
    return cfg;
}

/// A problem together with anything it borrows.
struct BuiltProblem {
    std::unique_ptr<FiniteSumProblem> problem;
    std::shared_ptr<const Dataset> dataset;
};

inline std::shared_ptr<const Dataset> build_dataset(const ProblemConfig& pc) {
    if (pc.source == DataSource::blobs)
        return std::make_shared<Dataset>(make_blobs(pc.blobs_per_class, pc.blobs_classes, pc.blobs_dim,
                                                    pc.blobs_separation, pc.blobs_seed));
    if (!std::filesystem::exists(pc.images))
        throw ConfigError("problem.images", "file not found: " + pc.images.string());
    if (!std::filesystem::exists(pc.labels))
        throw ConfigError("problem.labels", "file not found: " + pc.labels.string());
    Dataset ds = load_idx(pc.images, pc.labels);
    if (pc.subset > 0) ds = subset(ds, pc.subset, pc.subset_seed, pc.balanced);
    return std::make_shared<Dataset>(std::move(ds));
}

inline BuiltProblem build_problem(const ProblemConfig& pc) {
    BuiltProblem out;
    switch (pc.kind) {
        case ProblemKind::least_squares:
            out.problem = make_consistent_least_squares(pc.n, pc.d, pc.seed);
            break;
        case ProblemKind::phase_retrieval:
            out.problem = make_phase_retrieval(pc.n, pc.d, pc.seed);
            break;
        case ProblemKind::mlp:
            out.dataset = build_dataset(pc);
            out.problem = as_finite_sum(pc.spec, out.dataset, pc.batch_size);
            break;
    }
    return out;
}

/// Resolves eta, which may be given relative to the problem's Lipschitz bound.
inline RunConfig resolve_run(const RunSection& rs, const FiniteSumProblem& p) {
    RunConfig cfg = rs.run;
    if (rs.eta) {
        cfg.eta = *rs.eta;
    } else {
        const auto L = p.lipschitz_bound();
        if (!L) throw ConfigError("run.eta_times_inv_L", "problem has no Lipschitz bound");
        cfg.eta = *rs.eta_times_inv_L / *L;
    }
    return cfg;
}

inline ParamVector initial_point(const ExperimentConfig& cfg, const FiniteSumProblem& p) {
    switch (cfg.run.x0) {
        case InitKind::zeros: return ParamVector::zeros(p.dim());
        case InitKind::normal: {
            CounterRng rng(cfg.run.x0_seed, Stream::init);
            ParamVector x(p.dim());
            for (auto& v : x) v = cfg.run.x0_scale * rng.normal();
            return x;
        }
        case InitKind::mlp_init: return init_params(cfg.problem.spec);
    }
    return ParamVector::zeros(p.dim());
}

}  // namespace starpath
