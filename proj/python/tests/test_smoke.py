# SPDX-License-Identifier: Apache-2.0
import json
import math

import pytest

import passage_kit as pk


BM = pk.spec("levy", triplet=pk.brownian())


def test_psi_roundtrip():
    t = json.dumps(pk.brownian())
    assert pk.eval_psi(t, 2.0) == pytest.approx(2.0, abs=1e-14)
    r = pk.psi_inverse(t, 2.0)
    assert r["z"] == pytest.approx(2.0, abs=1e-12)


def test_transform_brownian():
    v = pk.first_passage_transform(BM, 1.0, 1.0, 0.0)
    assert v == pytest.approx(math.exp(-math.sqrt(2.0)), rel=1e-12)


def test_transform_killed_drift():
    kd = pk.spec(
        "killed_drift",
        v={"kind": "constant", "c": 1.0},
        omega={"kind": "constant", "c": 0.5},
        theta=0.0,
    )
    assert pk.first_passage_transform(kd, 1.0, 2.0, 1.0) == pytest.approx(
        math.exp(-1.5), rel=1e-13
    )


def test_pssmp_coefficients():
    ps = pk.spec("pssmp", triplet=pk.brownian(), alpha=1.0)
    a = pk.pssmp_coefficients(ps, 3)
    assert a == pytest.approx([1.0, 2.0, 1.0, 2.0 / 9.0], rel=1e-12)


def test_validate_rejects_subordinator():
    d = pk.validate_triplet(
        json.dumps(pk.triplet(sigma2=0.0, jumps={"type": "atoms", "components": [{"rate": 1.0, "size": 2.0}]}))
    )
    assert not d["pass"]


def test_mc_agrees_with_closed_form():
    rep = pk.compare_mc_closed(BM, 1.0, 1.0, 0.0, 20000, 7, threads=2)
    assert abs(rep["z_score"]) < 4.5
    assert rep["within_band"]


def test_mc_is_deterministic_across_threads():
    a = pk.compare_mc_closed(BM, 1.0, 1.0, 0.0, 20000, 7, threads=1)
    b = pk.compare_mc_closed(BM, 1.0, 1.0, 0.0, 20000, 7, threads=4)
    assert a["estimate"] == b["estimate"]
    assert a["std_error"] == b["std_error"]


def test_fit_phi_grid_recovers_sqrt():
    rows_x, rows_l, rows_q, rows_v = [], [], [], []
    for q in (0.5, 1.0, 2.0):
        for gap in (0.5, 1.0, 2.0):
            rows_x.append(gap)
            rows_l.append(0.0)
            rows_q.append(q)
            rows_v.append(pk.first_passage_transform(BM, q, gap, 0.0))
    fit = pk.fit_phi_grid(rows_x, rows_l, rows_q, rows_v)
    for q, phi in zip(fit["q"], fit["phi"]):
        assert phi == pytest.approx(math.sqrt(2.0 * q), rel=1e-12)


def test_sigma2_lattice():
    vals = [(n, 0.5 * n * n) for n in range(1, 17)]
    assert pk.extract_sigma2_lattice(vals, 1.0) == pytest.approx(1.0, abs=1e-12)
