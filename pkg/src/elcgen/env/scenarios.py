"""Standard attack scenarios: a fast ego closing on a target in the adjacent lane."""

import numpy as np

from .episode import ScenarioConfig, VehicleSpec


def standard_scenario(rng, lanes=3, lane_width=3.5, dt=0.05):
    """One scenario drawn from ``rng``.

    The target drives in the middle lane; the ego starts in an outer lane
    behind it and 4 to 9 m/s faster, so the trigger fires within a few
    seconds.  Two background vehicles share the road.
    """
    mid = lanes // 2
    yc = lambda lane: (lane + 0.5) * lane_width
    ego_lane = mid - 1 if rng.random() < 0.5 else mid + 1
    other_lane = 2 * mid - ego_lane
    v_t = rng.uniform(18.0, 25.0)
    dv = rng.uniform(4.0, 9.0)
    gap = dv * rng.uniform(3.2, 4.2) + 5.0
    x_t = 60.0
    vehicles = [
        VehicleSpec(role="ego", x=x_t - gap, y=yc(ego_lane), v=v_t + dv),
        VehicleSpec(role="target", x=x_t, y=yc(mid), v=v_t),
        VehicleSpec(role="background", x=x_t + rng.uniform(-15.0, 15.0), y=yc(other_lane),
                    v=v_t + rng.uniform(-2.0, 2.0)),
        VehicleSpec(role="background", x=x_t + rng.uniform(60.0, 90.0), y=yc(ego_lane),
                    v=v_t + rng.uniform(-1.0, 1.0)),
    ]
    return ScenarioConfig(lanes=lanes, lane_width_m=lane_width, dt_s=dt, vehicles=vehicles)


def standard_scenarios(n, seed, **kw):
    """``n`` reproducible scenarios derived from ``seed``."""
    from ..rng import substream
    rng = substream(seed, "scenarios")
    return [standard_scenario(rng, **kw) for _ in range(n)]


def closing_scenario(gap, dv, v_target=20.0, dt=0.05, lateral=0.0, max_duration=10.0):
    """Scripted constant-closing case: ego directly behind (or ``lateral`` m beside) the target.

    Background traffic is absent and the target holds speed, so TTC evolves
    analytically; used for trigger-timing checks.
    """
    vehicles = [
        VehicleSpec(role="ego", x=0.0, y=1.75, v=v_target + dv),
        VehicleSpec(role="target", x=gap, y=1.75 + lateral, v=v_target),
    ]
    return ScenarioConfig(lanes=3, lane_width_m=3.5, dt_s=dt, vehicles=vehicles, max_duration_s=max_duration)


def analytic_trigger_step(gap, dv, dt, threshold=2.5, lateral=0.0):
    """First step k ≥ 0 whose TTC falls below ``threshold`` in :func:`closing_scenario`.

    Both vehicles hold their speed, so the longitudinal gap after k steps is
    gap − dv·k·dt.  With lateral offset h the TTC formula reduces to
    d³ / (dv·dx²) (closing speed dv·dx/d, cosine dx/d).  Returns None when
    the vehicles never close.
    """
    if dv <= 0:
        return None
    k = 0
    while True:
        dx = gap - dv * k * dt
        if dx <= 0:
            return None
        d = np.hypot(dx, lateral)
        if d ** 3 / (dv * dx * dx) < threshold:
            return k
        k += 1
