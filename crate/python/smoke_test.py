"""Smoke test for the `regdist` extension module."""

import json
import math

import regdist


def main():
    p = regdist.GeometryParams(7, 2.0, 1.0)
    led = regdist.ledger(p)
    assert abs(led["c1"] - 2.0943951023931953) < 1e-9, led["c1"]
    assert led["c_pde"] is None

    magic = regdist.GeometryParams.magic(6, 2.0)
    assert magic.alpha == 2.0 and magic.is_magic()
    assert regdist.family_criterion(magic) == "magic_degenerate"
    assert regdist.family_criterion(regdist.GeometryParams(4, 1.0, 0.5)) == "d1_degenerate"
    c = regdist.asymptotic_constants(magic)
    assert abs(c["cf"]) < 1e-12

    flat = regdist.Measure.flat(4, 1, density="1", truncation=40.0, cell=0.02)
    q = regdist.GeometryParams(4, 1.0, 0.7)
    got = flat.smooth_distance(q, [0.0, 0.0, 0.5, 0.0])
    want = regdist.flat_smooth_distance(q, 1.0, 0.5)
    assert abs(got - want) / want < 1e-3, (got, want)

    cantor = regdist.Measure.from_json(json.dumps(
        {"kind": "cantor", "n": 3, "ratio": 0.25, "branches": 2, "depth": 6, "embed_dim": 1}
    ))
    assert len(cantor) == 64 and cantor.ambient_dim == 3
    assert abs(cantor.total_mass() - 1.0) < 1e-12
    assert cantor.distance_to_support([0.0, 0.3, 0.0]) > 0.29

    assert abs(regdist.gamma_fn(5.0) - 24.0) < 1e-10
    k = regdist.bessel_k(0.5, 2.0)
    assert abs(k - math.sqrt(math.pi / 4.0) * math.exp(-2.0)) < 1e-10
    for z in (0.3, 1.0, 4.0):
        assert abs(regdist.bessel_ft(3.0, 2.0, z) - math.exp(-z)) < 1e-10

    assert regdist.bmo_norm("1", 1) == 0.0
    try:
        regdist.GeometryParams(3, 2.0, 1.0)
    except ValueError as e:
        print("rejected as expected:", e)
    else:
        raise AssertionError("n - d <= 2 accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
