import pytest

from compmap import config
from compmap.config import PRESETS, ExperimentConfig
from compmap.pipeline import FusionMode


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name, tmp_path):
    cfg = PRESETS[name]
    assert config.loads(cfg.dumps()) == cfg
    assert config.loads(cfg.dumps()).dumps() == cfg.dumps()
    cfg.save(tmp_path / "c.yaml")
    assert config.load(tmp_path / "c.yaml") == cfg
    assert config.load(name) == cfg


def test_preset_values():
    ii, tum = PRESETS["interiornet"], PRESETS["tum"]
    assert (ii.sigma.k_sigma, ii.sigma.sigma_min, ii.sigma.sigma_max) == (0.0016, 0.005, 0.02)
    assert (ii.tau.k_tau, ii.tau.tau_min, ii.tau.tau_max) == (0.026, 0.06, 0.16)
    assert (tum.sigma.k_sigma, tum.sigma.sigma_min, tum.sigma.sigma_max) == (0.0025, 0.0098, 0.0294)
    assert (tum.tau.k_tau, tum.tau.tau_min, tum.tau.tau_max) == (0.05, 0.06, 0.16)
    d = ExperimentConfig()
    assert (d.thresholds.recon_free, d.thresholds.gt_free) == (0.0004, 0.03)
    assert d.fusion.gate_factor == 2.0 and d.mode is FusionMode.RAW_PLUS_COMPLETED
    assert d.map.size == 128


def test_unknown_keys_are_rejected():
    with pytest.raises(ValueError, match="colour"):
        config.loads("map:\n  colour: red\n")
    with pytest.raises(ValueError):
        config.loads("mapp: {}\n")
    with pytest.raises(ValueError):
        config.loads("map: 3\n")


def test_component_invariants_are_enforced():
    with pytest.raises(ValueError):
        config.loads("fusion:\n  mode: x\n")
    with pytest.raises(ValueError):
        config.loads("sigma:\n  sigma_min: 0.5\n")
    with pytest.raises(ValueError):
        config.loads("thresholds:\n  gt_free: 1.5\n")


def test_partial_files_fill_defaults():
    cfg = config.loads("fusion:\n  gate_factor: 3\n")
    assert cfg.fusion.gate_factor == 3.0 and isinstance(cfg.fusion.gate_factor, float)
    assert cfg.map == ExperimentConfig().map
    assert config.loads("") == ExperimentConfig()


def test_overrides():
    cfg = ExperimentConfig().override(["fusion.mode=r", "map.voxel_res=0.1", "map.map_dim=3.2",
                                       "holes.blob_radius_range=[2, 4]"])
    assert cfg.mode is FusionMode.RAW_ONLY
    assert cfg.map.size == 32
    assert cfg.holes.blob_radius_range == (2, 4)
    with pytest.raises(ValueError):
        ExperimentConfig().override(["fusion.nope=1"])
    with pytest.raises(ValueError):
        ExperimentConfig().override(["fusion.mode"])
    with pytest.raises(ValueError):
        ExperimentConfig().override(["fusion.mode.deeper=1"])


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        config.load("/nonexistent/config.yaml")
