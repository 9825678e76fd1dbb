#include "tailrisk/hac.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include <json.hpp>

#include "tailrisk/frailty.hpp"

namespace tailrisk {

HacNode hac_leaf(int asset_index) {
    if (asset_index < 0) throw std::invalid_argument("hac_leaf: index must be >= 0");
    HacNode n;
    n.leaf = asset_index;
    return n;
}

HacNode hac_internal(double theta, std::vector<HacNode> children) {
    if (children.size() < 2) throw std::invalid_argument("hac_internal: needs >= 2 children");
    HacNode n;
    n.gen.theta = theta;
    n.children = std::move(children);
    return n;
}

namespace {

int min_leaf(const HacNode& n) {
    if (n.is_leaf()) return n.leaf;
    int m = std::numeric_limits<int>::max();
    for (const auto& c : n.children) m = std::min(m, min_leaf(c));
    return m;
}

void canonicalize(HacNode& n) {
    for (auto& c : n.children) canonicalize(c);
    std::stable_sort(n.children.begin(), n.children.end(),
                     [](const HacNode& a, const HacNode& b) { return min_leaf(a) < min_leaf(b); });
}

void collect_leaves(const HacNode& n, std::vector<int>& leaves) {
    if (n.is_leaf()) {
        leaves.push_back(n.leaf);
        return;
    }
    for (const auto& c : n.children) collect_leaves(c, leaves);
}

void stamp_family(HacNode& n, GeneratorFamily family) {
    if (n.is_leaf()) return;
    n.gen.family = family;
    n.gen.validate();
    for (auto& c : n.children) stamp_family(c, family);
}

// root-to-leaf theta chain; valid only when no node has two internal children
bool fully_nested_chain(const HacNode& n, std::vector<double>& thetas) {
    if (n.is_leaf()) return true;
    thetas.push_back(n.gen.theta);
    const HacNode* inner = nullptr;
    for (const auto& c : n.children) {
        if (c.is_leaf()) continue;
        if (inner) return false;
        inner = &c;
    }
    return inner ? fully_nested_chain(*inner, thetas) : true;
}

// shortest decimal form that parses back to the same double
std::string format_double(double x) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

std::string format_node(const HacNode& n, bool with_theta) {
    if (n.is_leaf()) return std::to_string(n.leaf + 1);
    std::string s = "(";
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) s += ' ';
        s += format_node(n.children[i], with_theta);
    }
    s += ')';
    if (with_theta) {
        s += '@';
        s += format_double(n.gen.theta);
    }
    return s;
}

}  // namespace

std::string format_structure(const HacNode& root, bool with_theta) {
    return format_node(root, with_theta);
}

HacModel make_hac_model(GeneratorFamily family, HacNode root) {
    stamp_family(root, family);
    canonicalize(root);

    std::vector<int> leaves;
    collect_leaves(root, leaves);
    if (leaves.empty()) throw std::invalid_argument("hac model: empty tree");
    std::vector<int> sorted = leaves;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != static_cast<int>(i))
            throw std::invalid_argument(
                "hac model: leaf indices must be 0..d-1, each exactly once");

    HacModel m;
    m.family = family;
    m.root = std::move(root);
    m.dimension = static_cast<int>(leaves.size());
    m.structure_string = format_structure(m.root);
    std::vector<double> chain;
    if (!m.root.is_leaf() && fully_nested_chain(m.root, chain)) m.theta_vector = std::move(chain);
    return m;
}

namespace {

bool nesting_ok(const HacNode& n) {
    if (n.is_leaf()) return true;
    for (const auto& c : n.children) {
        if (!c.is_leaf() && !(n.gen.theta <= c.gen.theta * (1.0 + 1e-12))) return false;
        if (!nesting_ok(c)) return false;
    }
    return true;
}

double cdf_node(const HacNode& n, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (n.is_leaf()) return u[n.leaf];
    double s = 0.0;
    for (const auto& c : n.children) s += psi(n.gen, cdf_node(c, u));
    return psi_inverse(n.gen, s);
}

}  // namespace

bool check_nesting(const HacModel& model) { return nesting_ok(model.root); }

double hac_cdf(const HacModel& model, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (u.size() != model.dimension) throw std::domain_error("hac_cdf: dimension mismatch");
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (!(u[i] > 0.0 && u[i] <= 1.0)) throw std::domain_error("hac_cdf: u out of (0,1]");
    if (model.root.is_leaf()) return u[0];
    return cdf_node(model.root, u);
}

HacModel estimate_structure(const Eigen::Ref<const Eigen::MatrixXd>& tau_matrix,
                            GeneratorFamily family, EstimateDiagnostics* diag) {
    const Eigen::Index d = tau_matrix.rows();
    if (d < 2 || tau_matrix.cols() != d)
        throw std::invalid_argument("estimate_structure: need a square matrix, d >= 2");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (std::fabs(tau_matrix(i, i) - 1.0) > 1e-12)
            throw std::invalid_argument("estimate_structure: diagonal must be 1");
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::fabs(tau_matrix(i, j) - tau_matrix(j, i)) > 1e-12)
                throw std::invalid_argument("estimate_structure: matrix must be symmetric");
            if (!(tau_matrix(i, j) >= -1.0 - 1e-12 && tau_matrix(i, j) <= 1.0 + 1e-12))
                throw std::invalid_argument("estimate_structure: entries must be in [-1,1]");
        }
    }
    constexpr double kTauFloor = 1e-6;

    struct Cluster {
        HacNode node;
        std::vector<int> members;
        bool internal = false;
        double theta = 0.0;
    };
    std::vector<Cluster> active;
    for (int i = 0; i < d; ++i) active.push_back({hac_leaf(i), {i}, false, 0.0});

    auto avg_tau = [&](const Cluster& a, const Cluster& b) {
        double s = 0.0;
        for (int i : a.members)
            for (int j : b.members) s += tau_matrix(i, j);
        return s / (static_cast<double>(a.members.size()) * b.members.size());
    };

    while (active.size() > 1) {
        std::size_t bi = 0, bj = 1;
        double best = -2.0;
        for (std::size_t i = 0; i < active.size(); ++i)
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                double t = avg_tau(active[i], active[j]);
                if (t > best + 1e-15) {
                    best = t;
                    bi = i;
                    bj = j;
                }
            }
        if (diag) diag->merge_taus.push_back(best);
        double tau_use = best;
        if (tau_use < kTauFloor) {
            tau_use = kTauFloor;
            if (diag) ++diag->floored_taus;
        }
        double theta = theta_from_tau(family, tau_use);
        for (const Cluster* c : {&active[bi], &active[bj]})
            if (c->internal && theta > c->theta) {
                theta = c->theta;
                if (diag) ++diag->clamped_thetas;
            }

        Cluster merged;
        merged.node = hac_internal(theta, {active[bi].node, active[bj].node});
        merged.members = active[bi].members;
        merged.members.insert(merged.members.end(), active[bj].members.begin(),
                              active[bj].members.end());
        merged.internal = true;
        merged.theta = theta;
        active.erase(active.begin() + bj);
        active.erase(active.begin() + bi);
        active.push_back(std::move(merged));
    }
    return make_hac_model(family, std::move(active.front().node));
}

double nested_generator_compose(const ArchimedeanGenerator& parent,
                                const ArchimedeanGenerator& child, double t) {
    if (parent.family != child.family)
        throw std::invalid_argument("nested_generator_compose: mixed families");
    if (!(t >= 0.0)) throw std::domain_error("nested_generator_compose: t must be >= 0");
    const double a = parent.theta / child.theta;
    switch (parent.family) {
        case GeneratorFamily::gumbel:
            return std::pow(t, a);
        case GeneratorFamily::clayton:
            return std::expm1(a * std::log1p(t));
        case GeneratorFamily::joe: {
            double l = std::log(-std::expm1(-t));  // ln(1 - e^-t) < 0
            return -std::log1p(-std::exp(a * l));
        }
        case GeneratorFamily::frank: {
            double p0 = -std::expm1(-parent.theta);
            double inner = -std::expm1(-t) + std::exp(-child.theta - t);  // 1-(1-e^-th1)e^-t
            double pw = -std::expm1(a * std::log(inner));                 // 1 - inner^a
            return std::log(p0) - std::log(pw);
        }
    }
    throw std::logic_error("nested_generator_compose: bad enum");
}

namespace {

constexpr double kSumCutoff = 1e4;  // beyond this many summands use the asymptotic law

// one summand of the Frank inner sum (V0 = 1); exact rejection with the better
// of two proposals: Sibuya(alpha) with acceptance p1^(X-1), or log-series(p1)
// with acceptance Gamma(k-a)/(Gamma(1-a)Gamma(k))
double frank_inner_one(double alpha, double theta0, double theta1, RngStream& rng) {
    const double p1 = -std::expm1(-theta1);
    if (p1 <= theta0) {
        const double lp1 = std::log(p1);
        for (;;) {
            double x = sample_sibuya(alpha, rng);
            if (std::log(rng.next_uniform()) < (x - 1.0) * lp1) return x;
        }
    }
    const double lg1ma = std::lgamma(1.0 - alpha);
    for (;;) {
        double k = sample_log_series(p1, rng);
        double lacc = std::lgamma(k - alpha) - lg1ma - std::lgamma(k);
        if (std::log(rng.next_uniform()) < lacc) return k;
    }
}

}  // namespace

double sample_inner_frailty(const ArchimedeanGenerator& parent,
                            const ArchimedeanGenerator& child, double v, RngStream& rng) {
    if (parent.family != child.family)
        throw std::invalid_argument("sample_inner_frailty: mixed families");
    if (!(v > 0.0)) throw std::domain_error("sample_inner_frailty: v must be > 0");
    const double a = parent.theta / child.theta;
    if (a > 1.0 + 1e-12) throw std::invalid_argument("sample_inner_frailty: nesting violated");
    if (a >= 1.0 - 1e-14) return v;

    switch (parent.family) {
        case GeneratorFamily::gumbel: {
            double lv = std::log(v) / a + std::log(sample_positive_stable(a, rng));
            return std::exp(std::min(lv, 700.0));
        }
        case GeneratorFamily::clayton:
            return sample_tilted_stable(a, v, rng);
        case GeneratorFamily::joe: {
            double count = std::max(1.0, std::floor(v + 0.5));
            if (count > kSumCutoff) {
                double lv = std::log(count) / a + std::log(sample_positive_stable(a, rng));
                return std::exp(std::min(lv, 700.0));
            }
            double s = 0.0;
            for (long i = 0; i < static_cast<long>(count); ++i) s += sample_sibuya(a, rng);
            return s;
        }
        case GeneratorFamily::frank: {
            double count = std::max(1.0, std::floor(v + 0.5));
            if (count > kSumCutoff) {
                // one-summand law has closed-form first two moments; CLT regime
                double p0 = -std::expm1(-parent.theta), p1 = -std::expm1(-child.theta);
                double m1 = a * p1 * std::exp(child.theta - parent.theta) / p0;
                double ex2 =
                    m1 + a * (1.0 - a) * p1 * p1 *
                             std::exp(2.0 * child.theta - parent.theta) / p0;
                double var1 = std::max(0.0, ex2 - m1 * m1);
                double g = rng.next_gaussian();
                double s = count * m1 + std::sqrt(count * var1) * g;
                return std::max(count, std::floor(s + 0.5));
            }
            double s = 0.0;
            for (long i = 0; i < static_cast<long>(count); ++i)
                s += frank_inner_one(a, parent.theta, child.theta, rng);
            return s;
        }
    }
    throw std::logic_error("sample_inner_frailty: bad enum");
}

namespace {

double clamp_open_unit(double u) {
    constexpr double lo = 1e-300;
    const double hi = 1.0 - 1.1102230246251565e-16;
    return std::min(std::max(u, lo), hi);
}

void sample_node(const HacNode& node, double v, RngStream& rng, Eigen::MatrixXd& out, int row) {
    for (const auto& c : node.children) {
        if (c.is_leaf()) {
            double e = rng.next_exponential();
            out(row, c.leaf) = clamp_open_unit(frailty_laplace(node.gen, e / v));
        } else {
            double vc = sample_inner_frailty(node.gen, c.gen, v, rng);
            sample_node(c, vc, rng, out, row);
        }
    }
}

}  // namespace

UniformSample sample_hac(const HacModel& model, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_hac: n >= 1 required");
    if (model.root.is_leaf() || model.dimension < 2)
        throw std::invalid_argument("sample_hac: model must have >= 2 leaves");
    if (!check_nesting(model))
        throw std::invalid_argument("sample_hac: nesting condition violated");
    UniformSample out;
    out.values.resize(n, model.dimension);
    for (int i = 0; i < n; ++i) {
        RngStream rng = substream(seed, 0x4AC5u, static_cast<std::uint64_t>(i));
        double v0 = sample_frailty(model.root.gen, rng);
        sample_node(model.root, v0, rng, out.values, i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// text / JSON forms

namespace {

struct Parser {
    const std::string& s;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("parse error at position " + std::to_string(pos) + ": " +
                                    what);
    }
    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    char peek() const { return pos < s.size() ? s[pos] : '\0'; }

    HacNode parse_node() {
        skip_ws();
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
            std::size_t start = pos;
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
            int idx = std::atoi(s.substr(start, pos - start).c_str());
            if (idx < 1) fail("leaf indices are 1-based");
            return hac_leaf(idx - 1);
        }
        if (peek() != '(') fail("expected leaf index or '('");
        ++pos;
        std::vector<HacNode> children;
        for (;;) {
            skip_ws();
            if (peek() == ')') {
                ++pos;
                break;
            }
            if (peek() == '\0') fail("unterminated '('");
            children.push_back(parse_node());
        }
        if (children.size() < 2) fail("internal node needs >= 2 children");
        skip_ws();
        if (peek() != '@') fail("internal node needs a @theta annotation");
        ++pos;
        char* end = nullptr;
        double theta = std::strtod(s.c_str() + pos, &end);
        if (end == s.c_str() + pos) fail("malformed theta");
        pos = static_cast<std::size_t>(end - s.c_str());
        return hac_internal(theta, std::move(children));
    }
};

using ojson = nlohmann::ordered_json;

ojson node_to_json(const HacNode& n) {
    if (n.is_leaf()) return ojson{{"leaf", n.leaf + 1}};
    ojson j;
    j["theta"] = n.gen.theta;
    ojson kids = ojson::array();
    for (const auto& c : n.children) kids.push_back(node_to_json(c));
    j["children"] = std::move(kids);
    return j;
}

HacNode node_from_json(const ojson& j) {
    if (j.contains("leaf")) return hac_leaf(j.at("leaf").get<int>() - 1);
    std::vector<HacNode> kids;
    for (const auto& c : j.at("children")) kids.push_back(node_from_json(c));
    return hac_internal(j.at("theta").get<double>(), std::move(kids));
}

}  // namespace

HacModel parse_structure(const std::string& text, GeneratorFamily family) {
    Parser p{text};
    HacNode root = p.parse_node();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    return make_hac_model(family, std::move(root));
}

std::string hac_to_json_string(const HacModel& model) {
    ojson j;
    j["family"] = family_name(model.family);
    j["dimension"] = model.dimension;
    j["structure"] = model.structure_string;
    j["root"] = node_to_json(model.root);
    return j.dump();
}

HacModel hac_from_json_string(const std::string& text) {
    ojson j = ojson::parse(text);
    return make_hac_model(family_from_name(j.at("family").get<std::string>()),
                          node_from_json(j.at("root")));
}

}  // namespace tailrisk
