import dataclasses
import json

import pytest

from darcy_smc.config import (
    RunConfig,
    config_hash,
    parse_config,
    parse_config_data,
    resolved,
    to_json,
)
from darcy_smc.errors import ConfigError


class TestParsing:
    def test_minimal_file_gets_defaults(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("{model: p1}\n")
        cfg = parse_config(path)
        assert cfg.model == "p1"
        assert cfg.smc.particles == 100
        assert cfg.smc.n_mu == 10
        assert cfg.observations.noise_fraction == 0.02
        assert cfg.grid.nx == 24

    def test_empty_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("")
        assert parse_config(path) == RunConfig()

    def test_json_accepted(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": "p2", "smc": {"particles": 64}}))
        cfg = parse_config(path)
        assert cfg.model == "p2" and cfg.smc.particles == 64

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="particels"):
            parse_config_data({"smc": {"particels": 10}})

    def test_unknown_nested_key_path(self):
        with pytest.raises(ConfigError, match="observations.sigma"):
            parse_config_data({"observations": {"sigma": 1.0}})


class TestValidation:
    def test_threshold_above_ensemble_rejected(self):
        with pytest.raises(ConfigError, match="j_thresh"):
            parse_config_data({"smc": {"particles": 10, "j_thresh": 11}})

    def test_negative_noise_rejected(self):
        with pytest.raises(ConfigError, match="noise_fraction"):
            parse_config_data({"observations": {"noise_fraction": -0.01}})

    def test_bad_model(self):
        with pytest.raises(ConfigError, match="model"):
            parse_config_data({"model": "p3"})

    def test_bad_method(self):
        with pytest.raises(ConfigError, match="spectral"):
            parse_config_data({"methods": ["monomial", "spectral"]})

    def test_empty_interval_rejected(self):
        iv = [[0.3, 2.1], [1.0, 1.0], [-1.5, 1.5], [0.0, 6.0], [0.1, 4.2]]
        with pytest.raises(ConfigError, match="intervals"):
            parse_config_data({"intervals": iv})

    def test_burnin_must_fit(self):
        with pytest.raises(ConfigError, match="burnin"):
            parse_config_data({"reference": {"length": 100, "burnin": 100}})


class TestResolution:
    def test_derived_defaults(self):
        cfg = resolved(parse_config_data({"grid": {"nx": 10, "ny": 12}}))
        assert cfg.truth_grid.nx == 20 and cfg.truth_grid.ny == 24
        assert cfg.observations.eps == pytest.approx(0.6)
        assert cfg.smc.j_thresh == pytest.approx(100 / 3.0)

    def test_explicit_values_kept(self):
        cfg = resolved(
            parse_config_data(
                {
                    "truth_grid": {"nx": 30, "ny": 30},
                    "observations": {"eps": 0.4},
                    "smc": {"j_thresh": 25},
                }
            )
        )
        assert cfg.truth_grid.nx == 30
        assert cfg.observations.eps == 0.4
        assert cfg.smc.j_thresh == 25

    def test_round_trip_identical(self, tmp_path):
        cfg = resolved(parse_config_data({"model": "p2", "seeds": [3, 1, 4]}))
        path = tmp_path / "config.resolved.json"
        path.write_text(to_json(cfg))
        again = parse_config(path)
        assert again == cfg
        assert config_hash(again) == config_hash(cfg)

    def test_hash_sensitive_to_changes(self):
        a = resolved(parse_config_data({"seed": 0}))
        b = dataclasses.replace(a, seed=1)
        assert config_hash(a) != config_hash(b)
