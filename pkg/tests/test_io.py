import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from phenowave import io
from phenowave.continuum import Snapshot, run_continuum
from phenowave.ibm import resolve_rho_max, run_ibm
from phenowave.model import InitialProfile, ModelParams, build_laws
from phenowave.wave import compare_to_oracle, wave_profile


def snap(t, nx=4, ny=3, seed=0):
    rng = np.random.default_rng(seed)
    x = np.arange(nx) * 0.1
    y = np.arange(ny) * 0.5
    n = rng.random((nx, ny)) * 1e3
    return Snapshot(t, x, y, n, n.sum(1), rng.random(nx), rng.random(nx))


def test_empty_list_writes_header_only(tmp_path):
    path = io.emit_snapshot([], "summary", tmp_path / "a.csv")
    assert path.read_text() == "t,x,rho,M,E,ybar\n"
    io.emit_snapshot([], "full", tmp_path / "b.csv", dim=2)
    assert (tmp_path / "b.csv").read_text() == "t,x,x2,y,n\n"
    assert io.read_snapshots(tmp_path / "a.csv") == []


def test_unknown_schema(tmp_path):
    with pytest.raises(ValueError):
        io.emit_snapshot([snap(0.0)], "wide", tmp_path / "c.csv")
    with pytest.raises(ValueError):
        io.header("full", 3)


def test_round_trip_is_bit_exact(tmp_path):
    snaps = [snap(0.5, seed=1), snap(1.25, seed=2)]
    io.emit_snapshot(snaps, "full", tmp_path / "full.csv")
    io.emit_snapshot(snaps, "summary", tmp_path / "summary.csv")
    back = io.read_fields(tmp_path / "full.csv", tmp_path / "summary.csv")
    for a, b in zip(snaps, back):
        assert a.t == b.t
        for f in ("x", "y", "n", "rho", "M", "E"):
            assert np.array_equal(getattr(a, f), getattr(b, f)), f


@settings(max_examples=30, deadline=None)
@given(arrays(float, (3, 2), elements=st.floats(-1e300, 1e300, allow_subnormal=True)))
def test_round_trip_property(tmp_path_factory, n):
    path = tmp_path_factory.mktemp("rt") / "f.csv"
    s = Snapshot(0.0, np.array([0.0, 0.1, 0.2]), np.array([0.0, 1.0]), n, None, None, None)
    io.emit_snapshot(s, "full", path)
    assert np.array_equal(io.read_snapshots(path)[0].n, n)


def test_planar_summary_round_trip(tmp_path):
    x = np.arange(3) * 0.1
    rho = np.arange(9.0).reshape(3, 3)
    s = Snapshot(2.0, x, np.array([0.0, 1.0]), np.ones((3, 3, 2)), rho, rho / 2, 1 - rho / 10)
    io.emit_snapshot(s, "summary", tmp_path / "p.csv")
    (back,) = io.read_snapshots(tmp_path / "p.csv")
    assert np.array_equal(back.rho, rho) and np.array_equal(back.E, s.E)


def test_ndjson_append(tmp_path):
    path = tmp_path / "log.ndjson"
    io.append_ndjson(path, {"b": np.float64(1.5), "a": np.arange(2)})
    io.append_ndjson(path, {"seed": np.random.SeedSequence(4)})
    recs = io.read_ndjson(path)
    assert recs[0] == {"a": [0, 1], "b": 1.5}
    assert recs[1]["seed"]["entropy"] == 4
    assert path.read_text().splitlines()[0] == '{"a": [0, 1], "b": 1.5}'
    with pytest.raises(TypeError):
        io.append_ndjson(path, {"bad": object()})


def test_engines_are_interchangeable_after_round_trip(tmp_path):
    p = ModelParams(tau=0.2, dx=0.1, dy=0.05, eps=1e-2, X=6.0)
    prof = InitialProfile()
    p = resolve_rho_max(p, prof)
    laws = build_laws(p)
    ib = run_ibm(p, laws, prof, [1.0], seed=0)
    co = run_continuum(p, laws, prof, [1.0])
    metrics = []
    for name, s in (("ib", ib), ("co", co)):
        io.emit_snapshot(s, "full", tmp_path / f"{name}_full.csv")
        io.emit_snapshot(s, "summary", tmp_path / f"{name}_summary.csv")
        (back,) = io.read_fields(tmp_path / f"{name}_full.csv", tmp_path / f"{name}_summary.csv")
        metrics.append(compare_to_oracle(wave_profile(back, p), laws, p))
        assert metrics[-1] == compare_to_oracle(wave_profile(s[0], p), laws, p)
    assert metrics[0].keys() == metrics[1].keys()
