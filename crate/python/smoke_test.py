"""Smoke test of the fmcf extension module.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import math
import sys

import fmcf


def close(a, b, rel):
    return abs(a / b - 1.0) <= rel


def main():
    s = 0.5
    assert fmcf.FracOrder(s).value == s
    try:
        fmcf.FracOrder(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("s = 1.5 accepted")

    w = fmcf.omega_bar(s)
    circle = fmcf.ClosedCurve.circle(2.0, 512)
    h = fmcf.curve_curvature(circle, 0, s)
    assert close(h.value, w * 2.0 ** -s, 1e-2), (h, w)
    assert len(circle) == 512 and close(circle.area, 4.0 * math.pi, 1e-3)

    # reversing the orientation flips the sign
    r = fmcf.curve_curvature(circle.reversed(), 511, s)
    assert abs(h.value + r.value) <= 2.0 * (h.error_estimate + r.error_estimate)

    values = fmcf.set_curvature([fmcf.ClosedCurve.ellipse(1.0, 0.5, 256)], s, fmcf.QuadConfig(rel_tol=1e-5))
    assert len(values) == 1 and len(values[0]) == 256
    assert values[0][0].value > values[0][64].value

    strip = fmcf.verify_strip_positivity(0.1, 0.05, s)
    assert strip["min_value"] - strip["min_value_error"] > 0.0
    assert fmcf.strip_curvature(0.1, 0.05, 0.0, s).value > 0.0

    t_ext = fmcf.ball_extinction_time(0.3, s)
    traj = fmcf.run_flow([fmcf.ClosedCurve.circle(0.3, 96)], s, fmcf.FlowConfig(target_spacing=2.0 * math.pi * 0.3 / 96))
    kinds = [e["kind"] for e in traj.events]
    assert "extinction" in kinds, kinds
    t_sim = next(e["time"] for e in traj.events if e["kind"] == "extinction")
    assert close(t_sim, t_ext, 0.1), (t_sim, t_ext)
    assert traj.summary()["snapshots"][0]["front_count"] == 1

    report = fmcf.scenario_shrinking_circle(1.0, s, fmcf.FlowConfig(target_spacing=2.0 * math.pi / 256))
    assert report["verdict"] == "reproduced", report["reasons"]

    print(f"ok: omega_bar({s}) = {w:.7f}, strip min {strip['min_value']:.4f}, extinction {t_sim:.4e} vs {t_ext:.4e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
