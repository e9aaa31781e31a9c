#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetlab/model.hpp"
#include "hetlab/singular.hpp"

namespace hetlab {

// Monotonicity-interval transition structure of a circle map.  Breakpoints
// are the critical points, plus the profile zeros for singular maps; the map
// is strictly monotone on each interval between consecutive breakpoints.
struct TransitionGraph {
    std::vector<double> breakpoints;                    // sorted, in [0, 2*pi)
    std::vector<std::pair<double, double>> intervals;   // lift pairs, hi > lo
    std::vector<std::vector<int>> Q;                    // r x r 0/1; q_im = 1 iff J_m in h(J_i)
    std::optional<int> mixing_N;                        // least N <= 32 with Q^N positive
    double lambda0 = 0.0;                               // pooled expansion-rate fit
    bool h7a = false;                                   // exp(lambda0 / 3) > 2
};

TransitionGraph transition_matrix(const CircleMap& map);

std::string transition_graph_to_text(const TransitionGraph& g);
std::string transition_graph_to_json(const TransitionGraph& g);

// One resolved row of the J_delta collection: a subinterval J of the
// one-sided component `side` of C_delta^(vertex) with h^n(J) = C_delta^(j).
struct JDeltaEntry {
    int vertex = 0;
    int side = +1;                   // -1: left of the critical point, +1: right
    double J_lo = 0.0, J_hi = 0.0;   // lift coordinates
    int n = 0;
    int j = -1;
    bool resolved = false;
    std::string failure;             // NoIntersectionWithinCap | SubdivisionDepthExceeded
    std::vector<double> diam_trace;  // lift-image lengths until the first C_delta contact
};

struct JDeltaGraph {
    double delta = 0.0;
    std::vector<double> critical_points;
    std::vector<JDeltaEntry> entries;
    std::vector<std::pair<int, int>> edges;  // vertex -> j, from resolved entries
    std::vector<bool> accessible;            // filled by accessible_vertices
};

// Iterates each one-sided component of C_delta (endpoint-tracked, monotone
// pieces only) until its image meets C_delta, then resolves the entry by the
// three-case disambiguation: full-component containment; monotonicity-interval
// containment with one extra step; otherwise endpoint-guided truncation to the
// component of the image outside C_delta (depth-capped).
JDeltaGraph build_jdelta(const CircleMap& map, double delta, int step_cap);

// accessible[v] true iff every vertex has a directed path to v.
std::vector<bool> accessible_vertices(const JDeltaGraph& g);

std::string jdelta_to_text(const JDeltaGraph& g);
std::string jdelta_to_json(const JDeltaGraph& g);

struct SinkRecord {
    double a = 0.0;
    int period = 0;
    std::vector<double> orbit;   // starts at the critical point, wrapped
    double multiplier = 0.0;     // |prod h'| along the orbit
    int n_index = 0;             // lattice index assigned in ascending-a order
    double mu = 0.0;             // exp(-(2*pi*n_index + a) / (omega * K_F))
};

// Bisection scan for parameters a near a_hat at which some critical point of
// the F singular limit is periodic with period <= period_cap.
std::vector<SinkRecord> find_superstable_sinks(const ModelConfig& cfg, double a_hat,
                                               double search_radius = 0.5,
                                               int period_cap = 8);

} // namespace hetlab
