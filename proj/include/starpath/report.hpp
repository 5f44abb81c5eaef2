#pragma once

// CSV output of a PathReport and a small reader for the plot command.
// Numbers use the shortest round-trip representation so files are byte-stable.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "starpath/analyzer.hpp"
#include "starpath/error.hpp"

namespace starpath {

inline constexpr const char* kEpochsHeader = "epoch,e_B,dist,full_loss,variance,weight_norm";
inline constexpr const char* kItersHeader = "k,epoch,t,xi,e_k,component_loss";
inline constexpr const char* kAuditsHeader = "epoch,checked,vacuous,violated,slack_used";
inline constexpr const char* kStepAuditsHeader =
    "epoch,checked,vacuous,violated,slack_used,violated_raw,distance_violations,descent_violations";
inline constexpr const char* kSubsequencesHeader = "component,epoch,k_post,loss_post,k_pre,loss_pre";

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline void write_epochs_csv(const PathReport& r, std::ostream& out) {
    out << kEpochsHeader << '\n';
    for (const auto& e : r.epochs)
        out << e.epoch << ',' << fmt(e.residual) << ',' << fmt(e.dist) << ',' << fmt(e.full_loss) << ','
            << fmt(e.variance) << ',' << fmt(e.weight_norm) << '\n';
}

inline void write_iters_csv(const PathReport& r, std::ostream& out) {
    out << kItersHeader << '\n';
    for (const auto& it : r.iters)
        out << it.k << ',' << it.epoch << ',' << it.t << ',' << it.xi << ',' << fmt(it.residual) << ','
            << fmt(it.component_loss) << '\n';
}

inline void write_audits_csv(const PathReport& r, std::ostream& out) {
    out << kAuditsHeader << '\n';
    if (!r.epoch_audit) return;
    for (const auto& a : r.epoch_audit->rows)
        out << a.epoch << ',' << int(a.checked) << ',' << int(a.vacuous) << ',' << int(a.violated) << ','
            << fmt(a.slack) << '\n';
}

inline void write_step_audits_csv(const PathReport& r, std::ostream& out) {
    out << kStepAuditsHeader << '\n';
    if (!r.step_audit) return;
    for (const auto& a : r.step_audit->rows)
        out << a.epoch << ',' << a.counts.checked << ',' << a.counts.vacuous << ',' << a.counts.violated
            << ',' << fmt(a.slack) << ',' << a.counts.violated_raw << ',' << a.distance_violations << ','
            << a.descent_violations << '\n';
}

inline void write_subsequences_csv(const PathReport& r, std::ostream& out) {
    out << kSubsequencesHeader << '\n';
    for (const auto& s : r.subsequences)
        for (std::size_t i = 0; i < s.post.size(); ++i)
            out << s.component << ',' << s.post[i].epoch << ',' << s.post[i].k << ',' << fmt(s.post[i].loss)
                << ',' << s.pre[i].k << ',' << fmt(s.pre[i].loss) << '\n';
}

/// Human-readable notes: reference point, L-hat, thresholds and totals.
inline void write_summary(const PathReport& r, const Trace& t, std::ostream& out) {
    const auto& ref = r.reference;
    out << "reference: " << ref.origin.label() << '\n';
    out << "reference full loss: " << fmt(ref.achieved_loss) << '\n';
    if (ref.approximate())
        out << "warning: reference loss exceeds eps_loss " << fmt(ref.eps_loss)
            << "; x* only approximates a common minimizer\n";
    out << "note: a single reference point is used for both epochwise and iterationwise residuals;"
           " the 'every minimizer' quantifier is not tested\n";
    out << "thresholds: sc fraction counts e_k < 0; audits use e_B <= 0 and e_k <= 0\n";
    out << "eta: " << fmt(t.config.eta) << '\n';
    out << "epochs completed: " << t.completed_epochs() << " of " << t.config.epochs << '\n';
    if (t.status == RunStatus::diverged) out << "run status: " << t.diagnostic << '\n';
    if (r.epoch_audit) {
        out << "L_hat: " << fmt(r.lipschitz.value) << " (" << r.lipschitz.source << ")\n";
        const auto& e = r.epoch_audit->totals;
        out << "epoch audit: checked " << e.checked << ", vacuous " << e.vacuous << ", violated " << e.violated
            << ", violated without slack " << e.violated_raw << '\n';
        const auto& s = r.step_audit->totals;
        out << "step audit: checked " << s.checked << ", vacuous " << s.vacuous << ", violated " << s.violated
            << ", violated without slack " << s.violated_raw << '\n';
    }
    const auto& fb = r.final_boundary;
    out << "final boundary: dist " << fmt(fb.dist) << ", full loss " << fmt(fb.full_loss) << ", variance "
        << fmt(fb.variance) << ", weight norm " << fmt(fb.weight_norm) << '\n';
    out << "replayed steps: " << r.replayed_steps << ", max recorded-loss mismatch "
        << fmt(r.max_loss_mismatch) << '\n';
}

// ---------------------------------------------------------------------------
// Reading

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw InputError("csv: no column '" + name + "'");
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_cell(const std::string& s, const std::string& where) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size())
        throw InputError(where + ": not a number '" + s + "'");
    return v;
}

}  // namespace detail

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
    t.header = detail::split_commas(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_commas(line);
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (cells.size() != t.header.size()) throw InputError(where + ": wrong number of cells");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(detail::parse_cell(c, where));
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Fraction of e_k < 0 per epoch, from iters.csv rows.
inline std::vector<std::pair<double, double>> fractions_from_iters(const CsvTable& iters) {
    const std::size_t ce = iters.column("epoch"), cr = iters.column("e_k");
    std::map<double, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& r : iters.rows) {
        auto& [neg, total] = counts[r[ce]];
        ++total;
        if (r[cr] < 0.0) ++neg;
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& [epoch, c] : counts)
        out.emplace_back(epoch, static_cast<double>(c.first) / static_cast<double>(c.second));
    return out;
}

}  // namespace starpath
