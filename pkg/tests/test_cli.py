"""Config parsing and the command-line driver: outputs, exit codes, determinism."""
import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from fraclandscape.cli import main
from fraclandscape.config import FieldSpec, load_config, parse_field_spec
from fraclandscape.errors import ConfigError
from fraclandscape.grid import GridSpec, RealField


# ---------------------------------------------------------------------------
# field expressions


def test_parse_constant_and_families():
    assert parse_field_spec("1.5") == FieldSpec("constant", a=1.5)
    s = parse_field_spec("1.5 + 0.4*sin(2*pi*x)")
    assert (s.kind, s.a, s.b) == ("sin_x", 1.5, 0.4)
    s = parse_field_spec("1.3-0.2*cos(2*pi*x)")
    assert (s.kind, s.a, s.b) == ("cos_x", 1.3, -0.2)
    s = parse_field_spec("3e-3 + 2e-3*cos(2*pi*x)*cos(2*pi*y)")
    assert (s.kind, s.a, s.b) == ("cos_xy", 3e-3, 2e-3)
    assert parse_field_spec("fields/alpha.csv").kind == "csv"


@pytest.mark.parametrize(
    "bad",
    [
        "1.5 + 0.4*tan(2*pi*x)",
        "0.4*sin(2*pi*x)",  # missing offset
        "1.5 + 0.4*sin(4*pi*x)",  # unsupported frequency
        "__import__('os').system('true')",
        "",
    ],
)
def test_parse_rejects_arbitrary_expressions(bad):
    with pytest.raises(ConfigError):
        parse_field_spec(bad)


def test_realize_expression_and_csv(tmp_path):
    g = GridSpec(1, 64)
    spec = parse_field_spec("1.5+0.4*sin(2*pi*x)")
    f = spec.realize(g)
    x = g.coords()
    assert np.max(np.abs(f.values - (1.5 + 0.4 * np.sin(2 * np.pi * x)))) < 1e-14
    with pytest.raises(ConfigError):
        parse_field_spec("1.0+0.1*cos(2*pi*x)*cos(2*pi*y)").realize(g)
    path = tmp_path / "f.csv"
    RealField(g, x).to_csv(path)
    assert np.array_equal(parse_field_spec(str(path)).realize(g).values, x)
    with pytest.raises(ConfigError):
        parse_field_spec(str(path)).realize(GridSpec(1, 32))


# ---------------------------------------------------------------------------
# config files


def _write_config(path, body):
    path.write_text(body)
    return str(path)


BASIC = """
[grid]
dim = 1
N = 64

[model]
order = 2.0
kappa = 0.03

[saddle]
k = 1
tau = 5e-4
maxIters = 200000

[landscape]
targetIndices = 1, 0

[seed]
rngSeed = 7
"""


def test_load_config_round_trip(tmp_path):
    cfg = load_config(_write_config(tmp_path / "c.ini", BASIC))
    assert cfg.grid == GridSpec(1, 64)
    assert cfg.order == FieldSpec("constant", a=2.0)
    assert cfg.kappa.a == 0.03
    assert cfg.saddle_k == 1
    assert cfg.tau == 5e-4
    assert cfg.max_iters == 200000
    assert cfg.target_indices == (1, 0)
    assert cfg.rng_seed == 7
    # defaults survive
    assert cfg.sigma == 1e-3
    assert cfg.symmetries is None


def test_load_config_rejects_bad_documents(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path / "a.ini", "[grid]\ndim=1\nN=64\n[bogus]\n"))
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path / "b.ini", "[model]\norder=2.0\n"))
    with pytest.raises(ConfigError):
        load_config(
            _write_config(tmp_path / "c.ini", "[grid]\ndim=1\nN=64\n[saddle]\ntau=-1\n")
        )
    with pytest.raises(ConfigError):
        load_config(
            _write_config(
                tmp_path / "d.ini",
                "[grid]\ndim=1\nN=64\n[landscape]\nsymmetries=sometimes\n",
            )
        )


def test_config_model_assembles_variable_order(tmp_path):
    body = """
[grid]
dim = 1
N = 64

[model]
order = 1.3 + 0.2*cos(2*pi*x)
kappa = 0.02

[fast]
S = 20
"""
    cfg = load_config(_write_config(tmp_path / "v.ini", body))
    p = cfg.model()
    assert p.fast_plan is not None
    assert p.fast_plan.S == 20
    assert not p.is_gradient


def test_config_model_selects_order_from_m(tmp_path):
    body = "[grid]\ndim = 1\nN = 64\n\n[model]\norder = 1.3+0.2*cos(2*pi*x)\n\n[fast]\nm = 2\n"
    cfg = load_config(_write_config(tmp_path / "m.ini", body))
    assert cfg.fast_S is None
    p = cfg.model()
    from fraclandscape.fracop import select_expansion_order

    assert p.fast_plan.S == select_expansion_order(2, cfg.grid)


# ---------------------------------------------------------------------------
# the CLI proper


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def basic_cfg(tmp_path):
    return _write_config(tmp_path / "run.ini", BASIC)


def test_cli_missing_config_exits_1(runner, tmp_path):
    result = runner.invoke(main, ["--config", str(tmp_path / "no.ini"), "landscape"])
    assert result.exit_code == 1


def test_cli_op_eval_eigenfunction(runner, basic_cfg, tmp_path):
    g = GridSpec(1, 64)
    u = RealField.from_function(g, lambda x: np.sin(2 * np.pi * x))
    in_path = tmp_path / "u.csv"
    u.to_csv(in_path)
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(out), "op-eval", "--input", str(in_path)],
    )
    assert result.exit_code == 0, result.output
    got = RealField.from_csv(out / "op_eval.csv")
    assert np.max(np.abs(got.values - 4 * np.pi**2 * u.values)) < 1e-9
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["command"] == "op-eval"


def test_cli_op_eval_missing_input_exits_2(runner, basic_cfg, tmp_path):
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(tmp_path / "o"),
         "op-eval", "--input", str(tmp_path / "no.csv")],
    )
    assert result.exit_code == 2


def test_cli_op_eval_grid_mismatch_exits_1(runner, basic_cfg, tmp_path):
    g = GridSpec(1, 32)
    in_path = tmp_path / "small.csv"
    RealField.zeros(g).to_csv(in_path)
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(tmp_path / "o"),
         "op-eval", "--input", str(in_path)],
    )
    assert result.exit_code == 1


def test_cli_op_eval_fast_on_constant_order_exits_1(runner, basic_cfg, tmp_path):
    in_path = tmp_path / "u.csv"
    RealField.zeros(GridSpec(1, 64)).to_csv(in_path)
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(tmp_path / "o"),
         "op-eval", "--input", str(in_path), "--method", "fast"],
    )
    assert result.exit_code == 1


def test_cli_saddle_requires_exactly_one_start(runner, basic_cfg, tmp_path):
    result = runner.invoke(
        main, ["--config", basic_cfg, "--out", str(tmp_path / "o"), "saddle"]
    )
    assert result.exit_code == 1


def test_cli_saddle_from_builtin_seed(runner, basic_cfg, tmp_path):
    out = tmp_path / "o"
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(out), "saddle", "--seed-name", "u1"],
    )
    assert result.exit_code == 0, result.output
    doc = json.loads((out / "report.json").read_text())
    assert doc["converged"]
    assert doc["index"] == 0
    final = RealField.from_csv(out / "final.csv")
    assert np.max(np.abs(final.values - 1.0)) < 1e-12


def test_cli_saddle_nonconvergence_exits_4(runner, tmp_path):
    body = BASIC.replace("maxIters = 200000", "maxIters = 5")
    cfg = _write_config(tmp_path / "short.ini", body)
    g = GridSpec(1, 64)
    init = tmp_path / "init.csv"
    RealField.from_function(g, lambda x: 0.1 * np.sin(2 * np.pi * x)).to_csv(init)
    result = runner.invoke(
        main,
        ["--config", cfg, "--out", str(tmp_path / "o"),
         "saddle", "--initial", str(init)],
    )
    assert result.exit_code == 4


def test_cli_landscape_summary(runner, basic_cfg, tmp_path):
    out = tmp_path / "o"
    result = runner.invoke(
        main, ["--config", basic_cfg, "--out", str(out), "landscape"]
    )
    assert result.exit_code == 0, result.output
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0] == "index,classes"
    assert set(lines[1:]) == {"1,1", "0,2"}
    doc = json.loads((out / "graph.json").read_text())
    assert len(doc["nodes"]) == 3


def test_cli_landscape_data_is_deterministic(runner, basic_cfg, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = runner.invoke(
            main, ["--config", basic_cfg, "--out", str(out), "landscape"]
        )
        assert result.exit_code == 0
        blob = {
            str(p.relative_to(out)): p.read_bytes()
            for p in sorted(out.rglob("*"))
            if p.is_file() and p.name != "metadata.json"
        }
        outputs.append(blob)
    assert outputs[0] == outputs[1]


def test_cli_index_map(runner, basic_cfg, tmp_path):
    out = tmp_path / "o"
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(out), "index-map",
         "--alpha-range", "1.1:2.0", "--kappa-range", "0.02:0.02001", "--steps", "4"],
    )
    assert result.exit_code == 0, result.output
    lines = (out / "index_map.csv").read_text().splitlines()
    assert lines[0] == "kappa,alpha,index"
    assert len(lines) == 1 + 16
    assert (out / "index_jumps.csv").exists()


def test_cli_index_map_bad_range_exits_1(runner, basic_cfg, tmp_path):
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(tmp_path / "o"),
         "index-map", "--alpha-range", "2.0:1.0"],
    )
    assert result.exit_code == 1


def test_cli_bench_small(runner, basic_cfg, tmp_path):
    out = tmp_path / "o"
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(out), "bench",
         "--n-list", "64,128", "--repeats", "2"],
    )
    assert result.exit_code == 0, result.output
    lines = (out / "bench.csv").read_text().splitlines()
    assert lines[1] == "method,N,S,wallTimeSeconds,maxAbsErrVsDirect,timedOut"
    # constant-order config benches three methods per size
    assert len(lines) == 2 + 2 * 3


def test_cli_plot_writes_figures(runner, basic_cfg, tmp_path):
    g = GridSpec(1, 64)
    in_path = tmp_path / "u.csv"
    RealField.from_function(g, lambda x: np.sin(2 * np.pi * x)).to_csv(in_path)
    out = tmp_path / "o"
    result = runner.invoke(
        main,
        ["--config", basic_cfg, "--out", str(out), "--plot",
         "op-eval", "--input", str(in_path)],
    )
    assert result.exit_code == 0, result.output
    assert (out / "op_eval_input.png").stat().st_size > 0
    assert (out / "op_eval_output.png").stat().st_size > 0


def test_cli_metadata_carries_environment(runner, basic_cfg, tmp_path):
    out = tmp_path / "o"
    result = runner.invoke(
        main, ["--config", basic_cfg, "--threads", "2", "--out", str(out), "landscape"]
    )
    assert result.exit_code == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["threads"] == 2
    assert "timestamp" in meta and "numpy" in meta
    assert os.environ["OMP_NUM_THREADS"] == "2"
