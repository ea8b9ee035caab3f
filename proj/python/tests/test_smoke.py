# SPDX-License-Identifier: Apache-2.0
import json

import numpy as np
import pytest

import rvesurr


def test_strain_of_identity_is_zero():
    assert rvesurr.u_to_e([1, 1, 1, 0, 0, 0]) == [0.0] * 6
    e = rvesurr.u_to_e([1.1, 1, 1, 0, 0, 0])
    assert abs(e[0] - 0.105) < 1e-15


def test_random_path_shapes():
    u, e = rvesurr.random_path(seed=3, delta_r=1e-2, delta_r_min=1e-3)
    assert u.shape == e.shape and u.shape[1] == 6
    assert np.allclose(u[0], [1, 1, 1, 0, 0, 0])
    steps = np.diff(u, axis=0)
    norms = np.sqrt((steps[:, [0, 1, 2]] ** 2).sum(1) + 2 * (steps[:, [3, 4, 5]] ** 2).sum(1))
    assert norms.max() <= 1e-2 * (1 + 1e-9)
    assert norms.min() > 1e-3 * (1 - 1e-9)


def test_parameter_counts():
    assert rvesurr.gru_parameters(100, 70) == 51600
    n = rvesurr.rnn_parameter_count([3, 70], 100, [800, 1607])
    assert n == (3 + 1) * 70 + 51600 + 101 * 800 + 801 * 1607


def test_split_partition():
    x = list(np.arange(180.0))
    parts = rvesurr.split_outputs(x, 18)
    assert len(parts) == 18 and parts[1][0] == 10.0
    assert sum(parts, []) == x
    assert rvesurr.group_ranges(180, 9)[1] == (20, 40)
    with pytest.raises(rvesurr.InvalidInput):
        rvesurr.group_ranges(40, 7)


def test_pca_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(50, 30))
    m = rvesurr.fit_pca(x, p=30)
    a = x - x.mean(0)
    ref = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
    assert np.allclose(m.eigenvalues, ref, atol=1e-8)
    r = [m.residual_fraction(p) for p in range(31)]
    assert all(b <= a + 1e-15 for a, b in zip(r, r[1:]))
    assert r[-1] == 0.0


def test_dataset_and_record_round_trip(tmp_path):
    recs = rvesurr.generate_dataset(3, 1, d_gamma=8, n_fiber=2, seed=5, delta_r=2e-2)
    assert len(recs) == 4
    for r in recs:
        assert r["gamma"].shape[1] == 8 and r["tau"].shape[1] == 10
        assert (np.diff(r["gamma"], axis=0) >= 0).all()
    f = tmp_path / "d.rveseq"
    rvesurr.write_records(str(f), recs)
    back = rvesurr.read_records(str(f))
    assert all(np.array_equal(a["gamma"], b["gamma"]) for a, b in zip(recs, back))
    t = rvesurr.pre_trim(recs[0], crit=1e-3)
    assert t["gamma"].size == 0 or t["gamma"].max() <= 1e-3


def test_pipeline_end_to_end(tmp_path):
    cfg = {
        "paths": {"n_random": 4, "n_cyclic": 1, "delta_r": 0.02, "delta_r_min": 0.002},
        "ensemble": {"d_gamma": 8, "n_fiber": 2},
        "dataset": {"lengths": [10], "batch_size": 4},
        "pca": {"p": 4},
        "train": {"kind": "III", "nnw_in": [3, 6], "n_hidden": 6, "q": 2, "n_batches": 5},
        "trial": {"target_p": 2, "start_n_h": 4, "increment": 4, "max_n_h": 4, "n_batches": 3,
                  "nnw_in": [3, 6], "nnw_out_hidden": [4]},
        "eval": {"snapshot_steps": [2]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    root = tmp_path / "out"
    with pytest.raises(rvesurr.MissingArtifact):
        rvesurr.run_stage(str(path), "eval", root=str(root))
    rvesurr.run_stage(str(path), "all", root=str(root))
    b = rvesurr.read_bundle(str(root / "train" / "bundle"))
    assert b.trained and b.kind == "III" and b.q == 2
    fields, normalized = b.predict(np.zeros((5, 3)))
    assert fields.shape == (5, 8) and normalized.shape == (5, 8)
    recs = rvesurr.read_records(str(root / "data" / "data.rveseq"))
    mse, per = rvesurr.evaluate(b, recs)
    assert mse >= 0 and len(per) == len(recs)
    summary = json.loads((root / "eval" / "summary.json").read_text())
    assert summary["mse_full_dim"] >= summary["pca_floor_mse"] - 1e-9
