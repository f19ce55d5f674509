"""Smoke test for the compiled extension. Run after `maturin develop` or
installing the wheel: `python python/smoke_test.py`."""

import math

import hard_disks_py as hd


def main():
    params = hd.ModelParams(2, 0.02, 0.15)
    assert params.dim == 2 and math.isclose(params.lam, 0.15)
    assert math.isclose(params.intensity, 0.15 / (math.pi * 0.02**2))

    s = hd.sample(params, seed=42)
    again = hd.sample(params, seed=42)
    assert s.points == again.points
    assert s.bad_pair_trace == again.bad_pair_trace
    assert s.bad_pair_trace[-1] == 0 and len(s.bad_pair_trace) == s.iterations + 1
    assert hd.bad_pairs(s.points, params.radius) == []
    assert math.isclose(hd.estimate_density(s.points, params), s.density)
    stats = s.stats()
    assert stats["seed"] == 42 and stats["final_count"] == len(s)

    csv = s.to_csv().splitlines()
    assert csv[0] == "x0,x1" and len(csv) == len(s) + 1
    svg = s.to_svg(500)
    assert svg.count("<circle") == len(s)
    assert hd.render_svg([], 0.1).count("<circle") == 0

    assert hd.bad_pairs([[0.1, 0.1], [0.12, 0.1], [0.9, 0.9]], 0.02) == [(0, 1)]

    small = hd.ModelParams(2, 0.25, 0.3)
    oracle = hd.classical_rejection(small, seed=7)
    assert hd.bad_pairs(oracle.points, 0.25) == []

    report = hd.bounds_report(2, 0.21027)
    assert abs(report["lambda_bar_improved"] - 0.21027) < 1e-4
    assert report["alpha_lower"] > 0.0887
    assert abs(hd.lambda_bar(2) - 2 ** -2.5) < 1e-12
    assert abs(hd.jjp_constant(2) - 0.42220) < 1e-4
    assert abs(hd.jjp_constant() - 0.63724) < 1e-4
    assert abs(hd.lens_area(0.0) - math.pi) < 1e-12

    try:
        hd.ModelParams(2, 0.5, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("radius 0.5 accepted")
    try:
        hd.sample(hd.ModelParams(2, 0.01, 0.3), seed=1, max_iterations=1)
    except RuntimeError:
        pass
    else:
        raise AssertionError("cap not reported")

    print(f"ok: {len(s)} disks, T={s.iterations}, density={s.density:.4f}")


if __name__ == "__main__":
    main()
