import os

import numpy as np
import pytest

from sphereflow import DomainSpec, SpectralGrid, basis_mode, norm_l2, write_snapshot
from sphereflow.cli import (
    ConfigError,
    build_grid,
    build_initial,
    build_params,
    build_stepper,
    main,
    parse_config,
)

PI = np.pi

MINIMAL = """
domain.dim = 1
domain.L = 3.141592653589793
domain.N = 16
"""

FULL = """
# full configuration
domain.dim = 1
domain.L = 3.141592653589793
domain.N = 16
domain.boundary = dirichlet_navier
model.n = 2
model.a = 0.5
model.dealias = 2
stepper.scheme = rk4
stepper.h = 1e-5
stepper.t_end = 0.001
stepper.renormalize = true
stepper.record_every = 10
init.kind = random
init.seed = 7
init.off_manifold_eps = 0
output.dir = out
output.snapshots = false
"""


class TestParseConfig:
    def test_minimal_gets_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.dim == 1 and cfg.resolution == (16,)
        assert cfg.boundary == "dirichlet_navier"
        assert cfg.n == 1 and cfg.a == 0.0 and cfg.dealias is None
        assert cfg.scheme == "etd1" and cfg.h is None and cfg.t_end == 1.0
        assert cfg.renormalize is True and cfg.record_every == 1
        assert cfg.init_kind == "mode" and cfg.mode == (1,)
        assert cfg.out_dir == "out" and cfg.snapshots is False

    def test_full_round_trip(self):
        cfg = parse_config(FULL)
        assert cfg.n == 2 and cfg.a == 0.5 and cfg.dealias == 2
        assert cfg.scheme == "rk4" and cfg.h == 1e-5
        assert cfg.seed == 7 and cfg.record_every == 10

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="unknown key 'model.q'"):
            parse_config(MINIMAL + "model.q = 1\n")

    def test_duplicate_key_named(self):
        with pytest.raises(ConfigError, match="duplicate key 'model.n'"):
            parse_config(MINIMAL + "model.n = 1\nmodel.n = 2\n")

    def test_missing_required_key_named(self):
        with pytest.raises(ConfigError, match="domain.N"):
            parse_config("domain.dim = 1\ndomain.L = 1.0\n")

    def test_invariant_violation_named(self):
        with pytest.raises(ConfigError, match="model.n"):
            parse_config(MINIMAL + "model.n = 0\n")

    def test_type_mismatch_named(self):
        with pytest.raises(ConfigError, match="stepper.h"):
            parse_config(MINIMAL + "stepper.h = fast\n")

    def test_bad_boolean_named(self):
        with pytest.raises(ConfigError, match="stepper.renormalize"):
            parse_config(MINIMAL + "stepper.renormalize = yes\n")

    def test_domain_invariants_surface(self):
        with pytest.raises(ConfigError, match="domain"):
            parse_config("domain.dim = 1\ndomain.L = 1.0\ndomain.N = 7\n")

    def test_mode_rank_checked(self):
        with pytest.raises(ConfigError, match="init.mode"):
            parse_config(MINIMAL + "init.mode = 1,2\n")

    def test_file_kind_requires_path(self):
        with pytest.raises(ConfigError, match="init.path"):
            parse_config(MINIMAL + "init.kind = file\n")

    def test_overrides_apply_after_file(self):
        cfg = parse_config(MINIMAL + "model.n = 1\n", overrides=["model.n=3"])
        assert cfg.n == 3

    def test_builders(self):
        cfg = parse_config(FULL)
        grid = build_grid(cfg)
        params = build_params(cfg)
        stepper = build_stepper(cfg, grid)
        u0 = build_initial(cfg, grid)
        assert grid.spec.resolution == (16,)
        assert params.n == 2 and stepper.h == 1e-5
        assert abs(norm_l2(u0) - 1.0) < 1e-12

    def test_default_step_is_stability_limited_for_explicit(self):
        cfg = parse_config(MINIMAL + "stepper.scheme = rk4\n")
        grid = build_grid(cfg)
        stepper = build_stepper(cfg, grid)
        assert stepper.h == min(1e-3, 0.5 / grid.mu_max)

    def test_off_manifold_eps_scales_norm(self):
        cfg = parse_config(MINIMAL + "init.off_manifold_eps = 0.01\n")
        u0 = build_initial(cfg, build_grid(cfg))
        assert norm_l2(u0) ** 2 == pytest.approx(1.01, rel=1e-12)

    def test_file_initial_state(self, tmp_path):
        g = SpectralGrid(DomainSpec(1, (PI,), (16,)))
        path = tmp_path / "ic.mshf"
        write_snapshot(path, basis_mode(g, 2))
        cfg = parse_config(MINIMAL + f"init.kind = file\ninit.path = {path}\n")
        u0 = build_initial(cfg, build_grid(cfg))
        assert norm_l2(u0 - basis_mode(g, 2)) < 1e-12


class TestMainEntry:
    def write_cfg(self, tmp_path, extra=""):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            MINIMAL
            + "stepper.h = 0.001\nstepper.t_end = 0.02\nstepper.record_every = 5\n"
            + "init.kind = random\ninit.seed = 3\n"
            + extra
        )
        return cfg

    def test_run_writes_timeseries_and_snapshots(self, tmp_path):
        cfg = self.write_cfg(tmp_path, "output.snapshots = true\n")
        out = tmp_path / "out"
        code = main(["--config", str(cfg), "--out", str(out), "run"])
        assert code == 0
        series = (out / "timeseries.csv").read_text().splitlines()
        assert series[0].startswith("t,l2_norm,h1_seminorm_sq")
        assert len(series) == 6  # header + records at steps 0,5,10,15,20
        snaps = sorted(os.listdir(out / "snapshots"))
        assert snaps[0] == "t_0.mshf"

    def test_run_deterministic_byte_identical(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["--config", str(cfg), "--out", str(out_a), "run"]) == 0
        assert main(["--config", str(cfg), "--out", str(out_b), "run"]) == 0
        assert (out_a / "timeseries.csv").read_bytes() == (
            out_b / "timeseries.csv"
        ).read_bytes()

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["--config", str(cfg), "--out", str(out_a), "run"])
        main(["--config", str(cfg), "--out", str(out_b), "--seed", "4", "run"])
        assert (out_a / "timeseries.csv").read_bytes() != (
            out_b / "timeseries.csv"
        ).read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = self.write_cfg(tmp_path)
        code = main(["--config", str(cfg), "--set", "model.n=0", "run"])
        assert code == 2
        assert "model.n" in capsys.readouterr().err

    def test_equilibrium_preset_energy_column_constant(self, tmp_path):
        cfg = tmp_path / "eq.cfg"
        cfg.write_text(MINIMAL + "stepper.h = 0.001\nstepper.t_end = 0.1\n"
                       "stepper.record_every = 10\ninit.kind = mode\n"
                       "init.mode = 1\n")
        out = tmp_path / "eq"
        assert main(["--config", str(cfg), "--out", str(out), "run"]) == 0
        lines = (out / "timeseries.csv").read_text().splitlines()[1:]
        y = np.array([float(line.split(",")[5]) for line in lines])
        assert np.max(np.abs(y - 2.5)) <= 1e-10

    def test_2d_run(self, tmp_path):
        cfg = tmp_path / "r2.cfg"
        cfg.write_text(
            "domain.dim = 2\ndomain.L = 3.141592653589793, 3.141592653589793\n"
            "domain.N = 16, 16\nmodel.n = 2\nstepper.h = 0.001\n"
            "stepper.t_end = 0.01\ninit.kind = random\ninit.seed = 1\n"
        )
        out = tmp_path / "r2"
        assert main(["--config", str(cfg), "--out", str(out), "run"]) == 0
        lines = (out / "timeseries.csv").read_text().splitlines()
        y = [float(line.split(",")[5]) for line in lines[1:]]
        assert y[-1] <= y[0]

    def test_picard_csv(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "p"
        code = main(["--config", str(cfg), "--set", "stepper.t_end=0.05",
                     "--out", str(out), "picard"])
        assert code == 0
        lines = (out / "picard.csv").read_text().splitlines()
        assert lines[0] == "iter,sup_v_distance,factor"
        dists = [float(line.split(",")[1]) for line in lines[1:]]
        assert dists[-1] < 1e-10

    def test_probe_lipschitz_rejects_zero_samples(self, tmp_path, capsys):
        cfg = self.write_cfg(tmp_path)
        code = main(["--config", str(cfg), "--out", str(tmp_path / "q"),
                     "probe", "lipschitz", "--samples", "0"])
        assert code == 2

    def test_probe_invariance_csv(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "q"
        code = main(["--config", str(cfg), "--out", str(out), "probe", "invariance"])
        assert code == 0
        lines = (out / "probe_invariance.csv").read_text().splitlines()
        assert lines[0] == "eps,measured_rate,predicted_rate,relative_error"
        assert all(float(line.split(",")[3]) <= 0.01 for line in lines[1:])

    def test_probe_amu_csv(self, tmp_path):
        cfg = self.write_cfg(tmp_path, "model.n = 2\n")
        out = tmp_path / "q"
        assert main(["--config", str(cfg), "--set", "stepper.t_end=0.5",
                     "--out", str(out), "probe", "amu"]) == 0
        assert (out / "probe_amu.csv").exists()

    def test_probe_omega_csv(self, tmp_path):
        cfg = self.write_cfg(tmp_path)
        out = tmp_path / "q"
        assert main(["--config", str(cfg), "--set", "stepper.t_end=4.0",
                     "--set", "stepper.record_every=100",
                     "--out", str(out), "probe", "omega"]) == 0
        lines = (out / "probe_omega.csv").read_text().splitlines()
        assert lines[0] == "q,max_pairwise_v_distance"
