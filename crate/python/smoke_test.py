"""Smoke test for the cryo_edram extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml
    pip install target/wheels/cryo_edram-*.whl

then run ``python python/smoke_test.py``.
"""

import math
import os
import tempfile

import cryo_edram


def close(a, b, tol):
    return abs(a / b - 1.0) <= tol


def main():
    profile = cryo_edram.Profile.calibrate()
    assert profile.defaulted == []
    for r in profile.residuals():
        assert not r["mandatory"] or abs(r["error"]) <= r["tolerance"], r["name"]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "profile.toml")
        profile.save(path)
        again = cryo_edram.Profile.load(path)
        assert again.to_toml() == profile.to_toml()

    warm = profile.nominal_retention(300.0)
    cold = profile.nominal_retention(4.2)
    assert close(warm, 112.09e-6, 0.01), warm
    assert close(cold, 67.01, 0.01), cold

    m = profile.sample_array(300.0)
    assert (m.rows, m.cols, len(m)) == (32, 128, 4096)
    s = m.stats()
    assert close(s["cv"], 0.15, 0.15), s
    t_min = m.min_refresh_period()
    assert m.error_rate(t_min) == 0.0
    assert m.error_rate(2.0 * s["max"]) == 1.0
    assert profile.sample_array(300.0, seed=3).to_list() != m.to_list()

    best = profile.optimal_vdd(4.2)
    assert math.isclose(best["vdd"], 1.0), best
    sweep = profile.sweep(300.0, grid=[0.6, 1.1])
    assert [p["vdd"] for p in sweep] == [0.6, 1.1]

    c = profile.compare_temperatures()
    assert abs(c["efficiency_ratio"] - 2.63) <= 0.15, c["efficiency_ratio"]
    assert c["cryo"]["refresh_fraction"] < 0.01

    try:
        profile.sample_array(500.0)
    except cryo_edram.CryoEdramError:
        pass
    else:
        raise AssertionError("500 K accepted")

    print(
        f"ok: retention {warm:.4g} s / {cold:.4g} s, "
        f"DVS optimum {best['vdd']} V at 4.2 K, "
        f"TOPS/W ratio {c['efficiency_ratio']:.3f}"
    )


if __name__ == "__main__":
    main()
