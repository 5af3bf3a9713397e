#include "historic/specification.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace historic {

LagFunction LagFunction::constant(int p, const Resolution& eps) {
    if (p < 1) throw ConfigError("lag", "constant lag must be at least 1");
    LagFunction f(Kind::constant, eps);
    f.constant_ = p;
    return f;
}

LagFunction LagFunction::table(std::vector<int> by_n, const Resolution& eps, std::map<int, std::vector<int>> by_class) {
    if (by_n.empty()) throw ConfigError("lag/table", "table must cover n = 1 at least");
    auto check = [](const std::vector<int>& v, const std::string& where) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] < 1) throw ConfigError(where + "/" + std::to_string(i), "lag values must be at least 1");
    };
    check(by_n, "lag/table");
    for (const auto& [cls, v] : by_class) {
        check(v, "lag/classes/" + std::to_string(cls));
        if (v.size() != by_n.size()) throw ConfigError("lag/classes/" + std::to_string(cls), "class table length differs from the base table");
    }
    LagFunction f(Kind::table, eps);
    f.by_n_ = std::move(by_n);
    f.by_class_ = std::move(by_class);
    return f;
}

LagFunction LagFunction::callback(Callback cb, const Resolution& eps, std::string label) {
    if (!cb) throw ConfigError("lag", "empty callback");
    LagFunction f(Kind::callback, eps);
    f.callback_ = std::move(cb);
    f.label_ = std::move(label);
    return f;
}

int LagFunction::value(const Word& x, int n) const {
    if (n < 1) throw PreconditionError("lag requested for n < 1");
    switch (kind_) {
        case Kind::constant: return constant_;
        case Kind::table: {
            if (n > table_size()) throw PreconditionError("lag table ends at n = " + std::to_string(table_size()));
            const auto idx = static_cast<std::size_t>(n - 1);
            if (!x.empty()) {
                auto it = by_class_.find(x.front());
                if (it != by_class_.end()) return it->second[idx];
            }
            return by_n_[idx];
        }
        case Kind::callback: {
            const int p = callback_(x, n);
            if (p < 1) throw PreconditionError("lag callback returned " + std::to_string(p));
            return p;
        }
    }
    return constant_;
}

int LagFunction::max_value(int n) const {
    switch (kind_) {
        case Kind::constant: return constant_;
        case Kind::table: {
            int p = value({}, n);
            for (const auto& [cls, v] : by_class_) p = std::max(p, v[static_cast<std::size_t>(n - 1)]);
            return p;
        }
        case Kind::callback: break;
    }
    throw PreconditionError("callback lag has no word-free maximum");
}

std::string LagFunction::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::constant: os << "constant " << constant_; break;
        case Kind::table: os << "table n<=" << by_n_.size() << (by_class_.empty() ? "" : " with classes"); break;
        case Kind::callback: os << label_; break;
    }
    os << " at m=" << eps_.m;
    return os.str();
}

int mixing_index(const SymbolicSystem& sys) { return sys.primitivity_index(); }

LagFunction mixing_lag(const SymbolicSystem& sys, const Resolution& eps) {
    return LagFunction::constant(mixing_index(sys) + eps.m, eps);
}

std::optional<Word> connector(const SymbolicSystem& sys, int from, int to, int c) {
    if (c < 0) throw PreconditionError("negative connector length");
    const int k = sys.alphabet_size();
    if (to < 0) {
        Word u;
        int cur = from;
        for (int i = 0; i < c; ++i) {
            cur = sys.successors(cur).front();
            u.push_back(static_cast<Symbol>(cur));
        }
        return u;
    }
    // reach[l][s]: symbol s can be followed by l further symbols and then `to`.
    std::vector<std::vector<char>> reach(static_cast<std::size_t>(c + 1), std::vector<char>(static_cast<std::size_t>(k), 0));
    for (int s = 0; s < k; ++s) reach[0][static_cast<std::size_t>(s)] = sys.allowed(s, to);
    for (int l = 1; l <= c; ++l)
        for (int s = 0; s < k; ++s)
            for (int b : sys.successors(s))
                if (reach[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(b)]) {
                    reach[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)] = 1;
                    break;
                }
    if (!reach[static_cast<std::size_t>(c)][static_cast<std::size_t>(from)]) return std::nullopt;
    Word u;
    int cur = from;
    for (int l = c; l >= 1; --l) {
        for (int b : sys.successors(cur))
            if (reach[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(b)]) {
                cur = b;
                break;
            }
        u.push_back(static_cast<Symbol>(cur));
    }
    return u;
}

ShadowCertificate glue(const GluingSpec& spec, const SymbolicSystem& sys, const std::optional<LagFunction>& lag) {
    const std::size_t count = spec.segments.size();
    if (count == 0) throw PreconditionError("gluing needs at least one segment");
    if (spec.gaps.size() + 1 != count) throw PreconditionError("gaps must number one less than segments");
    const int m = spec.eps.m;
    for (std::size_t i = 0; i < count; ++i) {
        if (spec.orbit_length(i) < 1)
            throw PreconditionError("segment " + std::to_string(i) + " shorter than its lookahead plus one symbol");
        sys.require_admissible(spec.segments[i], "segment");
    }

    ShadowCertificate cert;
    cert.eps = spec.eps;
    Word& z = cert.glued;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const Word& seg = spec.segments[i];
        cert.offsets.push_back(offset);
        z.insert(z.end(), seg.begin(), seg.end());
        if (i + 1 == count) break;
        const int gap = spec.gaps[i];
        const int n_i = spec.orbit_length(i);
        if (lag && gap < lag->value(seg, n_i))
            throw PreconditionError("gap " + std::to_string(i) + " = " + std::to_string(gap) + " is below the lag " +
                                    std::to_string(lag->value(seg, n_i)));
        // The lookahead of segment i overlaps the gap; a gap shorter than it must agree with the next segment.
        const int c = gap - m;
        if (c < 0) {
            const Word& next = spec.segments[i + 1];
            const std::size_t start = offset + static_cast<std::size_t>(n_i + gap);
            for (std::size_t q = start; q < z.size(); ++q)
                if (z[q] != next[q - start])
                    throw PreconditionError("gap " + std::to_string(i) + " overlaps disagreeing lookahead");
            z.resize(start);
        } else {
            auto u = connector(sys, seg.back(), spec.segments[i + 1].front(), c);
            if (!u) throw PreconditionError("no connector of length " + std::to_string(c) + " after segment " + std::to_string(i));
            z.insert(z.end(), u->begin(), u->end());
        }
        offset += static_cast<std::size_t>(n_i + gap);
    }

    cert.verified = sys.admissible(z);
    for (std::size_t i = 0; i < count; ++i) {
        const Word& seg = spec.segments[i];
        const Word window(z.begin() + static_cast<std::ptrdiff_t>(cert.offsets[i]),
                          z.begin() + static_cast<std::ptrdiff_t>(cert.offsets[i] + seg.size()));
        const Dyadic d = bowen_from_difference(first_difference(window, seg), spec.orbit_length(i));
        const bool ok = d.less_than(spec.eps);
        cert.verified = cert.verified && ok;
        std::ostringstream line;
        line << "segment " << i << " at " << cert.offsets[i] << ": d_" << spec.orbit_length(i) << " = "
             << (d.is_zero() ? std::string("0") : "2^-" + std::to_string(d.exponent())) << (ok ? " ok" : " FAIL");
        cert.transcript.push_back(line.str());
    }
    return cert;
}

LagDensityReport verify_lag_density(const LagFunction& lag, int n_max, int budget_levels) {
    if (lag.kind() == LagFunction::Kind::callback) throw PreconditionError("density check needs a constant or table lag");
    if (n_max < 2) throw PreconditionError("density check needs n_max >= 2");
    LagDensityReport r;
    double mid_max = 0;
    for (int n = 1; n <= n_max; ++n) {
        const double ratio = static_cast<double>(lag.max_value(n)) / n;
        r.ratios.push_back(ratio);
        if (ratio > r.max_ratio) {
            r.max_ratio = ratio;
            r.argmax_n = n;
        }
        if (2 * n > n_max)
            r.tail_max = std::max(r.tail_max, ratio);
        else if (4 * n > n_max)
            mid_max = std::max(mid_max, ratio);
    }
    // Vanishing density shows as the last half staying strictly below the quarter before it.
    r.decaying = r.tail_max < mid_max;
    r.violation = !r.decaying;
    for (int k = 1; k <= budget_levels; ++k) {
        const double budget = std::ldexp(1.0, -k);
        int start = 0;
        for (int n = n_max; n >= 1 && r.ratios[static_cast<std::size_t>(n - 1)] < budget; --n) start = n;
        r.budget_start.push_back(start);
    }
    return r;
}

}  // namespace historic
