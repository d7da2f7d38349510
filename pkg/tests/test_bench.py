import io
import math

import numpy as np
import pytest

from ivr_rom.bench import (
    BenchmarkProblem,
    CaseConfig,
    compute_errors,
    convergence_slope,
    initial_condition,
    load_config,
    prepare_offline,
    read_field_dump,
    run_case,
    save_config,
    sweep_basis,
    write_field_dump,
)
from ivr_rom.bench.cli import main
from ivr_rom.bench.io import CSV_COLUMNS, read_reports_csv, write_reports_csv
from ivr_rom.errors import ConfigurationError, MissingBasisError
from ivr_rom.pod import TruncationPolicy

SMALL = dict(nx=8, ny=8, final_time=0.3)


def test_initial_condition_values():
    assert initial_condition(np.array(0.9), np.array(0.9)) == 0.0
    assert initial_condition(np.array(0.5), np.array(0.25)) == 1.0
    assert initial_condition(np.array(0.25), np.array(0.5)) == 0.5
    # hump maximum is at its centre
    r, a = np.meshgrid(np.linspace(0, 0.15, 31), np.linspace(0, 2 * np.pi, 40))
    assert initial_condition(0.25 + r * np.cos(a), 0.5 + r * np.sin(a)).max() == 0.5
    # slot of the cylinder is empty, the rest of the disc is one
    assert initial_condition(np.array(0.5), np.array(0.8)) == 0.0
    assert initial_condition(np.array(0.45), np.array(0.8)) == 1.0


def test_compute_errors_examples():
    ref = np.array([1.0, -2.0, 3.0])
    assert compute_errors(ref, ref)[0] == 0.0
    assert compute_errors(2 * ref, ref)[0] == pytest.approx(1.0)
    eps, eps0 = compute_errors(ref, ref, initial=ref.copy())
    assert eps0 == 0.0
    with pytest.raises(ValueError):
        compute_errors(ref, ref[:2])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        CaseConfig(variant="nope")
    with pytest.raises(ConfigurationError):
        CaseConfig(nx=7)
    cfg = CaseConfig(variant="pure_advection", truncation_left="fixed:30")
    assert cfg.kappa == 0.0 and cfg.bc_mode == "inflow_only"
    assert cfg.truncation_left == TruncationPolicy("fixed", 30)
    high = CaseConfig()
    assert high.kappa == 1e-5 and high.bc_mode == "all_dirichlet"
    assert (high.nx, high.ny, high.dt, high.final_time) == (64, 64, 3.37e-3, 2 * math.pi)


def test_config_file_roundtrip(tmp_path):
    cfg = CaseConfig(variant="pure_advection", coupling="rom_rom", nx=16, ny=12, truncation_right="fixed:7")
    path = save_config(tmp_path / "case.ini", cfg)
    assert load_config(path) == cfg
    assert load_config(path, nx=8, coupling=None).nx == 8
    path.write_text(path.read_text().replace("schema_version = 1", "schema_version = 9"))
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_dump_roundtrip(tmp_path):
    values = np.random.default_rng(0).standard_normal(9 * 5) * 1e-7
    path = write_field_dump(tmp_path / "f.txt", values, 8, 4, 2 * math.pi, "high_peclet")
    dump = read_field_dump(path)
    assert np.array_equal(dump.values, values)
    assert (dump.nx, dump.ny, dump.t, dump.variant) == (8, 4, 2 * math.pi, "high_peclet")
    with pytest.raises(ConfigurationError):
        write_field_dump(tmp_path / "g.txt", values[:-1], 8, 4, 0.0, "x")


@pytest.fixture(scope="module")
def small_problem():
    cfg = CaseConfig(variant="high_peclet", coupling="rom_fem", **SMALL)
    problem = BenchmarkProblem(cfg)
    return cfg, problem, prepare_offline(problem)


def test_global_fem_against_itself(small_problem):
    cfg, problem, offline = small_problem
    report, fields = run_case(cfg.with_(coupling="global_fem"), problem, offline)
    assert report.eps == 0.0 and report.eps0 is None
    assert fields["final"].shape == ((cfg.nx + 1) * (cfg.ny + 1),)


def test_every_coupling_runs(small_problem):
    cfg, problem, offline = small_problem
    for coupling in ("global_rom", "fem_fem", "rom_fem", "rom_rom"):
        report, _ = run_case(cfg.with_(coupling=coupling), problem, offline)
        assert np.isfinite(report.eps) and report.eps >= 0
        assert report.online_cpu_seconds > 0
        if coupling.startswith("rom") or coupling == "global_rom":
            assert report.offline_cpu_seconds > 0
    report, _ = run_case(cfg.with_(coupling="fem_fem"), problem, offline)
    assert report.interface_mismatch < 1e-10


def test_determinism_and_csv(tmp_path, small_problem):
    cfg, problem, offline = small_problem
    rows = []
    for _ in range(2):
        report, _ = run_case(cfg, problem, offline)
        rows.append(report)
    assert rows[0].eps == rows[1].eps and rows[0].n_modes_left == rows[1].n_modes_left
    fresh, _ = run_case(cfg)
    assert fresh.eps == rows[0].eps
    path = write_reports_csv(tmp_path / "r.csv", rows)
    header = path.read_text().splitlines()[0].split(",")
    assert tuple(header) == CSV_COLUMNS
    back = read_reports_csv(path)
    assert back[0]["eps"] == rows[0].eps
    assert all(set(r) == set(CSV_COLUMNS) for r in back)


def test_field_dumps_written(tmp_path, small_problem):
    cfg, problem, offline = small_problem
    report, fields = run_case(cfg.with_(output_dir=str(tmp_path)), problem, offline)
    final = read_field_dump(tmp_path / "rom_fem_tfinal.txt")
    ref = read_field_dump(tmp_path / "reference_tfinal.txt")
    assert np.array_equal(final.values, fields["final"])
    assert compute_errors(final.values, ref.values)[0] == report.eps


def test_dirichlet_entries_exact(small_problem):
    cfg, problem, offline = small_problem
    mesh = problem.mesh("left")
    beta = problem.operators("left").beta
    bad = []

    def check(n, t, left, right):
        if not np.array_equal(left[mesh.dirichlet_nodes], beta[mesh.dirichlet_nodes]):
            bad.append(n)

    run_case(cfg, problem, offline, on_lifted=check)
    assert not bad


def test_sweep_single_entry_and_fem_rows(small_problem):
    cfg, problem, offline = small_problem
    result = sweep_basis(cfg, [5], problem=problem, offline=offline)
    assert len(result.reports) == 1 and result.slope is None
    fem = sweep_basis(cfg.with_(coupling="fem_fem"), [5, 10, 20], problem=problem, offline=offline)
    assert len({r.eps for r in fem.reports}) == 1
    with pytest.raises(ConfigurationError):
        sweep_basis(cfg, [])


def test_sweep_error_does_not_grow(small_problem):
    cfg, problem, offline = small_problem
    result = sweep_basis(cfg.with_(coupling="rom_rom"), [2, 3, 4, 5, 6], problem=problem, offline=offline)
    errs = result.errors
    assert all(b <= 1.1 * a for a, b in zip(errs, errs[1:]))
    assert result.n_modes.tolist() == [2, 3, 4, 5, 6]


def test_convergence_slope():
    n = np.array([10, 20, 40, 80])
    assert convergence_slope(n, 3.0 * n**-2.0) == pytest.approx(-2.0)
    assert convergence_slope(n, 3.0 * n**-2.0, window=(15, 50)) == pytest.approx(-2.0)
    assert convergence_slope(n, 3.0 * n**-2.0, window=(15, 25)) is None


def test_missing_basis(tmp_path):
    cfg = CaseConfig(coupling="rom_fem", basis_dir=str(tmp_path), **SMALL)
    with pytest.raises(MissingBasisError, match="snapshots"):
        run_case(cfg)


def test_cli_workflow(tmp_path, capsys):
    common = ["--variant", "pure_advection", "--nx", "8", "--ny", "8", "--final-time", "0.3"]
    bases = str(tmp_path / "bases")
    out = io.StringIO()
    assert main(["snapshots", *common, "--basis-dir", bases], out=out) == 0
    assert "basis_left.npz" in out.getvalue()
    out = io.StringIO()
    args = ["run", *common, "--coupling", "rom_rom", "--truncation", "fixed:6", "--basis-dir", bases, "--output-dir", str(tmp_path / "o")]
    assert main(args, out=out) == 0
    assert "eps=" in out.getvalue()
    rows = read_reports_csv(tmp_path / "o" / "report.csv")
    assert rows[0]["N_R_left"] == 6.0
    out = io.StringIO()
    assert main(["report", str(tmp_path / "o" / "rom_rom_tfinal.txt"), str(tmp_path / "o" / "reference_tfinal.txt"),
                 "--initial", str(tmp_path / "o" / "rom_rom_t0.txt")], out=out) == 0
    text = out.getvalue()
    assert text.startswith("eps=") and "eps0=" in text
    out = io.StringIO()
    assert main(["sweep", *common, "--coupling", "rom_fem", "--modes", "2,4", "--csv", str(tmp_path / "s.csv")], out=out) == 0
    assert len(read_reports_csv(tmp_path / "s.csv")) == 2
    cfg = tmp_path / "c.ini"
    save_config(cfg, CaseConfig(variant="pure_advection", coupling="fem_fem", **SMALL))
    out = io.StringIO()
    assert main(["run", "--config", str(cfg), "--coupling", "global_fem"], out=out) == 0
    assert "coupling=global_fem" in out.getvalue()


def test_cli_error_exit(tmp_path, capsys):
    code = main(["run", "--nx", "8", "--ny", "8", "--final-time", "0.1", "--coupling", "rom_fem",
                 "--basis-dir", str(tmp_path / "missing")], out=io.StringIO())
    assert code != 0
    assert "snapshots" in capsys.readouterr().err
