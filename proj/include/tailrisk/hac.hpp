#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tailrisk/archimedean.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

// Node of a nested Archimedean tree. Leaves carry a 0-based asset index,
// internal nodes a generator and >= 2 children. Value semantics throughout.
struct HacNode {
    int leaf = -1;
    ArchimedeanGenerator gen{GeneratorFamily::gumbel, 1.0};
    std::vector<HacNode> children;

    bool is_leaf() const { return children.empty(); }
};

HacNode hac_leaf(int asset_index);
HacNode hac_internal(double theta, std::vector<HacNode> children);

struct HacModel {
    GeneratorFamily family = GeneratorFamily::gumbel;
    HacNode root;
    int dimension = 0;
    std::string structure_string;      // canonical text form with @theta annotations
    std::vector<double> theta_vector;  // root-to-leaf thetas for fully nested trees, else empty
};

// Validates (every asset index 0..d-1 appears exactly once, thetas in range),
// stamps the family on every internal node, canonicalizes child order
// (ascending smallest leaf index) and fills the derived fields.
HacModel make_hac_model(GeneratorFamily family, HacNode root);

// Sufficient nesting condition specialized to homogeneous one-parameter
// families: theta_parent <= theta_child for every internal parent-child pair.
bool check_nesting(const HacModel& model);

// Recursive evaluation: each internal node combines its children through its
// own generator, C_node = psi_inverse(sum_children psi(value)).
double hac_cdf(const HacModel& model, const Eigen::Ref<const Eigen::VectorXd>& u);

struct EstimateDiagnostics {
    std::vector<double> merge_taus;  // raw cluster-average tau per merge, first merge first
    int floored_taus = 0;            // merges whose average tau sat below the positivity floor
    int clamped_thetas = 0;          // merges where theta was clamped to keep nesting
};

// Bottom-up agglomeration: repeatedly joins the two clusters with the largest
// average pairwise tau; each new node's theta comes from theta_from_tau of
// that average (floored at 1e-6) and is clamped to min(child theta) so the
// output always satisfies check_nesting.
HacModel estimate_structure(const Eigen::Ref<const Eigen::MatrixXd>& tau_matrix,
                            GeneratorFamily family, EstimateDiagnostics* diag = nullptr);

// Exact nested sampling by recursive frailty composition (one substream per
// row; output is identical however rows are scheduled).
UniformSample sample_hac(const HacModel& model, int n, std::uint64_t seed);

// Text form: leaves are 1-based indices, internal nodes are
// "(child child ...)@theta", e.g. "((1 2)@3.31 3)@1.04".
HacModel parse_structure(const std::string& text, GeneratorFamily family);
std::string format_structure(const HacNode& root, bool with_theta = true);

std::string hac_to_json_string(const HacModel& model);
HacModel hac_from_json_string(const std::string& text);

// psiLT_parent^{-1} composed with psiLT_child in the Laplace-transform
// convention; the inner frailty given V has conditional transform
// exp(-V * nested_generator_compose(parent, child, t)).
double nested_generator_compose(const ArchimedeanGenerator& parent,
                                const ArchimedeanGenerator& child, double t);

// One draw of the inner frailty V_child | V_parent = v.
double sample_inner_frailty(const ArchimedeanGenerator& parent,
                            const ArchimedeanGenerator& child, double v, RngStream& rng);

}  // namespace tailrisk
