#pragma once

#include <string>
#include <vector>

#include "hetlab/model.hpp"

namespace hetlab {

enum class SectionId { In1, Out1, In2, Out2 };

struct ReturnMapPoint {
    double y = 0.0;
    double theta = 0.0;  // angles are kept unreduced; callers wrap for storage
};

enum class MapStatus {
    Ok,
    StableManifoldHit,  // y on (or below) the local stable manifold
    OutOfSection,       // image leaves the configured section bounds
    SingularHit,        // |y + phi2| below resolution in the G return map
    DomainError,        // preconditions violated (e.g. mu1 = 0 for F)
};

const char* to_string(MapStatus s);

struct MapResult {
    ReturnMapPoint p;
    double flight_time = 0.0;   // local passage time; global legs count as 0
    MapStatus status = MapStatus::Ok;
    bool below_manifold = false; // global image crossed into y < 0
};

// 2x2 Jacobian in (y, theta) order.
struct Jac2 {
    double dy_dy = 1.0, dy_dth = 0.0;
    double dth_dy = 0.0, dth_dth = 1.0;
    double det() const { return dy_dy * dth_dth - dy_dth * dth_dy; }
};

Jac2 operator*(const Jac2& a, const Jac2& b);  // apply b first, then a

// Map evaluation engine: a ModelConfig plus its derived constants.
class MapEngine {
public:
    explicit MapEngine(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    const DerivedConstants& consts() const { return dc_; }

    // Section-bound violations become OutOfSection errors when enforced
    // (validation mode); sweeps run with enforcement off.
    bool enforce_sections = true;

    // Passage past saddle i in {1, 2}: In_i -> Out_i.
    MapResult local_map(int i, ReturnMapPoint p) const;
    // Travel along the connections: Out1 -> In2 resp. Out2 -> In1.
    MapResult global_map_12(ReturnMapPoint p) const;
    MapResult global_map_21(ReturnMapPoint p) const;

    // Full returns Out1 -> Out1 (F) and Out2 -> Out2 (G).  The simplified
    // closed form is used when it is exact (b1 = b2 = eps0 = 1, constant
    // corrections, single active parameter); otherwise the four factor maps
    // are composed.
    MapResult return_map_F(ReturnMapPoint p) const;
    MapResult return_map_G(ReturnMapPoint p) const;

    // The explicit four-factor composition, regardless of simplifiability.
    MapResult compose_F(ReturnMapPoint p) const;
    MapResult compose_G(ReturnMapPoint p) const;

    Jac2 jacobian_F(ReturnMapPoint p) const;
    Jac2 jacobian_G(ReturnMapPoint p) const;

    bool closed_form_F_applies() const;
    bool closed_form_G_applies() const;

private:
    MapResult local_signed(int i, ReturnMapPoint p) const;
    Jac2 jac_local(int i, ReturnMapPoint p) const;
    Jac2 jac_global12(ReturnMapPoint p) const;
    Jac2 jac_global21(ReturnMapPoint p) const;
    Jac2 jac_composed(char which, ReturnMapPoint p) const;

    ModelConfig cfg_;
    DerivedConstants dc_;
};

struct OrbitRow {
    int n = 0;
    double y = 0.0;
    double theta = 0.0;       // wrapped to [0, 2*pi)
    double flight_time = 0.0;
};

struct OrbitResult {
    std::vector<OrbitRow> rows;
    int skipped = 0;          // singular/manifold hits sidestepped by jitter
    MapStatus last_status = MapStatus::Ok;
};

// Iterate the F or G return map; rows cover the post-burn-in iterates.
// Singular and manifold hits are sidestepped by a deterministic angular
// jitter and counted in `skipped`.
OrbitResult run_orbit(const MapEngine& eng, char which, ReturnMapPoint p0,
                      int burn_in, int n);

// CSV with header n,y,theta,flight_time.
std::string orbit_to_csv(const OrbitResult& orbit);

} // namespace hetlab
