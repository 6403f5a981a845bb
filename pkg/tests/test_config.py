import pytest

from phenowave.config import PRESETS, RunSpec, auto_tau, build_bundle, default_snapshots, load_config, merged_raw
from phenowave.model import ConfigError


def test_full_scale_preset_loads():
    params, laws, profile, spec = load_config("full-1d-eps1e2")
    assert params.eps == 1e-2 and params.dx == 0.05 and params.dy == 0.02
    assert params.tau == pytest.approx(0.05**2 / 2)
    assert (params.alpha, params.zeta, params.p_min) == (0.1, 1e-5, 1e-7)
    assert (params.kappa_M, params.kappa_E, params.E_max, params.Y, params.X, params.T) == (1, 1, 1, 1, 100, 30)
    assert profile.ybar0 == 0.2 and profile.A0 == 100
    assert spec.snapshots == [10, 20, 30]


def test_missing_rho_max_comes_from_initial_lattice():
    params, *_ = load_config("full-1d-eps1e2")
    assert params.rho_max == 99840.0
    params, *_ = load_config("desk-1d-eps1e2")
    assert params.rho_max == 49920.0


def test_rho_max_given_is_kept(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("preset: desk-1d-eps1e2\nrho_max: 1234.5\n")
    params, *_ = load_config(f)
    assert params.rho_max == 1234.5


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_validates(name):
    params, laws, profile, spec = load_config(name)
    assert spec.snapshots[-1] <= params.T


def test_theta_above_one_names_the_constraint(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("eps: 0.5\ndx: 0.05\ntau: 0.01\n")
    with pytest.raises(ConfigError, match=r"theta in \(0, 1\]"):
        load_config(f)


def test_unknown_keys_and_bad_files(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("eps: 0.01\nfoo: 1\n")
    with pytest.raises(ConfigError, match="foo"):
        load_config(f)
    f.write_text("eps: [0.01\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(f)
    f.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(f)
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError, match="unknown preset"):
        merged_raw({"preset": "nope"})
    with pytest.raises(ConfigError, match="eps is required"):
        merged_raw({"dx": 0.1})
    with pytest.raises(ConfigError, match="tau must be"):
        build_bundle(merged_raw({"eps": 0.01, "tau": "fast"}))


def test_run_spec_validation():
    with pytest.raises(ConfigError, match="sorted"):
        RunSpec(snapshots=[2.0, 1.0]).validate(10)
    with pytest.raises(ConfigError, match="lie in"):
        RunSpec(snapshots=[11.0]).validate(10)
    with pytest.raises(ConfigError, match="replicates"):
        RunSpec(replicates=0).validate(10)
    with pytest.raises(ConfigError, match="mode"):
        RunSpec(mode="plot").validate(10)
    with pytest.raises(ConfigError, match="sweep_eps"):
        RunSpec(mode="sweep").validate(10)
    with pytest.raises(ConfigError, match="dim: 2"):
        RunSpec(mode="ibm2d").validate(10)
    with pytest.raises(ConfigError, match="ibm2d"):
        RunSpec(mode="compare", dim=2).validate(10)


def test_default_snapshots():
    assert default_snapshots(1e-2, 30) == [10, 20, 30]
    assert default_snapshots(5e-3, 30) == [10, 20, 30]
    assert default_snapshots(1e-3, 15) == [5, 10, 15]
    assert default_snapshots(1e-2, 4) == [4]


def test_auto_tau_meets_every_bound():
    params, laws, *_ = load_config("desk-1d-eps1e2")
    assert params.tau == pytest.approx(auto_tau(0.1, 0.02, 1e-2, 0.1, 1.0))
    assert params.eta <= 1 and params.theta <= 1 and params.beta <= 1
    assert params.tau * (2 * params.D_M / params.dx**2 + params.kappa_M) <= 1


def test_config_hash_tracks_file_content(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("preset: desk-1d-eps1e2\n")
    h1 = load_config(f)[3].config_hash
    f.write_text("preset: desk-1d-eps1e2\nseed: 3\n")
    h2 = load_config(f)[3].config_hash
    assert h1 != h2 and len(h1) == 64
