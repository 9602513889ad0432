"""Command-line driver: config-driven operator evaluation, benchmarking,
saddle runs, landscape construction and index maps.

All data products are deterministic CSV/JSON files; wall-clock information
and host details live in a separate metadata file so that repeated runs with
the same config and seed produce byte-identical data outputs. Exit codes:
1 configuration error, 2 I/O error, 3 numeric failure, 4 non-convergence.
"""
from __future__ import annotations

import json
import os
import platform
import sys
import time
from dataclasses import dataclass

import click
import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import (
    CapacityError,
    ConfigError,
    ContractError,
    DegeneracyError,
    DomainError,
    GridMismatchError,
    UnsupportedModelError,
)
from .fracop import (
    ConstantOrder,
    VariableOrder,
    build_expansion,
    constant_order_apply,
    variable_order_apply_direct,
    variable_order_apply_fast,
)
from .grid import GridSpec, RealField, norm
from .landscape import build_landscape, index_sweep, zero_state_node
from .phasefield import ModelParams, homogeneous_index, rhs
from .saddle import SaddleState, compute_index, initial_directions, run

_CONFIG_ERRORS = (ConfigError, ContractError, DomainError, GridMismatchError,
                  UnsupportedModelError, CapacityError)
_NUMERIC_ERRORS = (FloatingPointError, np.linalg.LinAlgError, DegeneracyError)

EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERIC = 3
EXIT_NO_CONVERGENCE = 4


@dataclass
class CliContext:
    cfg: RunConfig
    out_dir: str
    seed: int
    threads: int
    plot: bool


def _write_metadata(ctx: CliContext, command: str, extra=None) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "seed": ctx.seed,
        "threads": ctx.threads,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "numpy": np.__version__,
    }
    if extra:
        doc.update(extra)
    with open(os.path.join(ctx.out_dir, "metadata.json"), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Run fn mapping library exceptions onto the exit-code contract."""
    try:
        return fn()
    except _CONFIG_ERRORS as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    except _NUMERIC_ERRORS as exc:
        _fail(EXIT_NUMERIC, str(exc))


@click.group()
@click.option("--config", "config_path", required=True, type=click.Path(),
              help="Path to the run configuration file.")
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Output directory (overrides [output] directory).")
@click.option("--threads", default=1, type=int, show_default=True,
              help="Thread count recorded and exported to BLAS/FFT pools.")
@click.option("--seed", default=None, type=int,
              help="RNG seed (overrides [seed] rngSeed).")
@click.option("--plot/--no-plot", default=False, show_default=True,
              help="Additionally render diagnostic figures next to the data.")
@click.pass_context
def main(ctx, config_path, out_dir, threads, seed, plot):
    """Spectral fractional phase-field landscapes."""
    if threads < 1:
        _fail(EXIT_CONFIG, "--threads must be at least 1")
    os.environ["OMP_NUM_THREADS"] = str(threads)
    os.environ["OPENBLAS_NUM_THREADS"] = str(threads)
    cfg = _guard(lambda: load_config(config_path))
    out = out_dir if out_dir is not None else cfg.output_dir
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot create output directory {out}: {exc}")
    ctx.obj = CliContext(
        cfg=cfg,
        out_dir=out,
        seed=seed if seed is not None else cfg.rng_seed,
        threads=threads,
        plot=plot,
    )


@main.command("op-eval")
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Input field CSV.")
@click.option("--method", type=click.Choice(["auto", "direct", "fast"]),
              default="auto", show_default=True)
@click.pass_obj
def op_eval(ctx: CliContext, input_path, method):
    """Apply the configured fractional operator to a field from CSV."""

    def body():
        cfg = ctx.cfg
        u = RealField.from_csv(input_path)
        if u.grid != cfg.grid:
            raise ConfigError(
                f"input grid (dim={u.grid.dim}, N={u.grid.N}) does not match "
                f"the configured grid (dim={cfg.grid.dim}, N={cfg.grid.N})"
            )
        order = cfg.order.realize(cfg.grid)
        if isinstance(order, RealField):
            vorder = VariableOrder(order)
            if method == "direct":
                result = variable_order_apply_direct(u, vorder)
            else:
                p = cfg.model()
                result = variable_order_apply_fast(u, vorder, p.fast_plan)
        else:
            if method == "fast":
                raise ConfigError(
                    "the fast expansion path applies to variable-order configs; "
                    "constant orders use the plain spectral path"
                )
            result = constant_order_apply(u, float(order))
        out_path = os.path.join(ctx.out_dir, "op_eval.csv")
        result.to_csv(out_path)
        click.echo(f"max_abs={np.max(np.abs(result.values)):.17g}")
        click.echo(f"l2_norm={norm(result):.17g}")
        click.echo(f"wrote {out_path}")
        if ctx.plot:
            from .report import plot_field

            plot_field(u, os.path.join(ctx.out_dir, "op_eval_input.png"), "input")
            plot_field(result, os.path.join(ctx.out_dir, "op_eval_output.png"),
                       "operator output")
        _write_metadata(ctx, "op-eval", {"input": os.path.abspath(input_path)})

    _guard(body)


@main.command()
@click.option("--n-list", default="4096,8192,16384,32768", show_default=True,
              help="Comma-separated grid sizes.")
@click.option("--s-list", default=None,
              help="Comma-separated expansion orders (default: configured S).")
@click.option("--repeats", default=5, show_default=True, type=int)
@click.option("--cell-timeout", default=300.0, show_default=True, type=float,
              help="Per-cell wall-time budget in seconds.")
@click.pass_obj
def bench(ctx: CliContext, n_list, s_list, repeats, cell_timeout):
    """Time the direct and fast operator paths over grid sizes."""

    def body():
        cfg = ctx.cfg
        try:
            sizes = [int(tok) for tok in n_list.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"invalid --n-list {n_list!r}")
        if s_list is None:
            s_values = [cfg.fast_S if cfg.fast_S is not None else 30]
        else:
            try:
                s_values = [int(tok) for tok in s_list.split(",") if tok.strip()]
            except ValueError:
                raise ConfigError(f"invalid --s-list {s_list!r}")
        if repeats < 1:
            raise ConfigError("--repeats must be at least 1")
        if cfg.grid.dim != 1:
            raise ConfigError("the benchmark harness runs on 1D grids")
        constant_config = cfg.order.is_constant
        rows = []
        for N in sizes:
            grid = GridSpec(1, N)
            x = grid.coords()
            u = RealField(grid, x**2 * (1.0 - x) ** 2)
            if constant_config:
                alpha = float(cfg.order.a)
                order_field = RealField(grid, np.full(grid.shape, alpha))
            else:
                order_field = cfg.order.realize(grid)
            vorder = VariableOrder(order_field)
            for S in s_values:
                plan = build_expansion(grid, S)
                cell_start = time.perf_counter()

                def timed(fn):
                    times = []
                    fn()  # warm cache
                    for _ in range(repeats):
                        if time.perf_counter() - cell_start > cell_timeout:
                            return None, None
                        t0 = time.perf_counter()
                        out = fn()
                        times.append(time.perf_counter() - t0)
                    return float(np.median(times)), out

                t_direct, ref = timed(lambda: variable_order_apply_direct(u, vorder))
                t_fast, fast_out = timed(
                    lambda: variable_order_apply_fast(u, vorder, plan)
                )
                err = (
                    float(np.max(np.abs(fast_out.values - ref.values)))
                    if ref is not None and fast_out is not None
                    else float("nan")
                )
                rows.append(
                    {"method": "direct", "N": N, "S": S,
                     "wallTimeSeconds": t_direct, "maxAbsErrVsDirect": 0.0,
                     "timedOut": int(t_direct is None)}
                )
                rows.append(
                    {"method": "fast", "N": N, "S": S,
                     "wallTimeSeconds": t_fast, "maxAbsErrVsDirect": err,
                     "timedOut": int(t_fast is None)}
                )
                if constant_config:
                    t_const, _ = timed(lambda: constant_order_apply(u, alpha))
                    rows.append(
                        {"method": "constant", "N": N, "S": S,
                         "wallTimeSeconds": t_const, "maxAbsErrVsDirect": 0.0,
                         "timedOut": int(t_const is None)}
                    )
        out_path = os.path.join(ctx.out_dir, "bench.csv")
        with open(out_path, "w") as f:
            f.write(f"# environment processor={platform.processor() or platform.machine()}"
                    f" threads={ctx.threads}\n")
            f.write("method,N,S,wallTimeSeconds,maxAbsErrVsDirect,timedOut\n")
            for r in rows:
                wt = "" if r["wallTimeSeconds"] is None else f"{r['wallTimeSeconds']:.6g}"
                f.write(f"{r['method']},{r['N']},{r['S']},{wt},"
                        f"{r['maxAbsErrVsDirect']:.6g},{r['timedOut']}\n")
        click.echo(f"wrote {out_path} ({len(rows)} rows)")
        if ctx.plot:
            from .report import plot_bench

            plot_bench([r for r in rows if r["wallTimeSeconds"] is not None],
                       os.path.join(ctx.out_dir, "bench.png"))
        _write_metadata(ctx, "bench", {"repeats": repeats})

    _guard(body)


def _builtin_seed(name: str, grid: GridSpec) -> RealField:
    if name == "u0":
        return RealField.zeros(grid)
    if name == "u1":
        return RealField.constant(grid, 1.0)
    if name == "um1":
        return RealField.constant(grid, -1.0)
    raise ConfigError(f"unknown builtin seed {name!r}; use u0, u1 or um1")


@main.command()
@click.option("--initial", "initial_path", default=None, type=click.Path(),
              help="Initial field CSV.")
@click.option("--seed-name", default=None,
              help="Builtin initial state: u0, u1 or um1.")
@click.option("--k", "k_override", default=None, type=int,
              help="Target index (default: [saddle] k; for u0, its own index).")
@click.pass_obj
def saddle(ctx: CliContext, initial_path, seed_name, k_override):
    """Run one saddle-dynamics trajectory and certify the result."""

    def body():
        cfg = ctx.cfg
        if (initial_path is None) == (seed_name is None):
            raise ConfigError("provide exactly one of --initial or --seed-name")
        p = cfg.model()
        if initial_path is not None:
            u_init = RealField.from_csv(initial_path)
            if u_init.grid != cfg.grid:
                raise ConfigError("initial field does not match the configured grid")
        else:
            u_init = _builtin_seed(seed_name, cfg.grid)
        if k_override is not None:
            k = k_override
        elif seed_name == "u0" and cfg.saddle_k == 0:
            if p.is_gradient:
                k = homogeneous_index(p)
            else:
                k = zero_state_node(p).index
        else:
            k = cfg.saddle_k
        c = cfg.saddle_config(k)
        if seed_name == "u0" and k > 0:
            V = zero_state_node(p).directions[:k]
        else:
            V = initial_directions(cfg.grid, k) if k else np.empty((0,) + cfg.grid.shape)
        s0 = SaddleState(u_init, V)
        log_path = (
            os.path.join(ctx.out_dir, "trajectory.csv") if cfg.log_stride else None
        )
        state, report = run(s0, p, c, log_path=log_path, log_stride=cfg.log_stride)
        index, spectrum = (None, None)
        if cfg.grid.npoints <= 4096:
            index, spectrum = compute_index(state.u, p, c.dimer)
        final_path = os.path.join(ctx.out_dir, "final.csv")
        state.u.to_csv(final_path)
        doc = {
            "converged": report.converged,
            "finalResidual": report.final_residual,
            "iters": report.iters,
            "reason": report.reason,
            "k": k,
            "index": index,
            "eigenvalues": (
                None if spectrum is None
                else [float(np.real(e)) for e in spectrum[: max(10, k + 3)]]
            ),
        }
        report_path = os.path.join(ctx.out_dir, "report.json")
        with open(report_path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        click.echo(
            f"converged={report.converged} residual={report.final_residual:.3e} "
            f"iters={report.iters} index={index}"
        )
        if ctx.plot:
            from .report import plot_convergence, plot_field

            plot_field(state.u, os.path.join(ctx.out_dir, "final.png"), "final state")
            if log_path and os.path.exists(log_path):
                import csv as csv_mod

                with open(log_path) as f:
                    log_rows = list(csv_mod.DictReader(f))
                if log_rows:
                    plot_convergence(
                        log_rows, os.path.join(ctx.out_dir, "convergence.png")
                    )
        _write_metadata(ctx, "saddle", {"k": k})
        if not report.converged:
            sys.exit(EXIT_NO_CONVERGENCE)

    _guard(body)


@main.command()
@click.pass_obj
def landscape(ctx: CliContext):
    """Build the downward solution landscape rooted at the zero state."""

    def body():
        cfg = ctx.cfg
        p = cfg.model()
        graph = build_landscape(
            p,
            cfg.saddle_config(0),
            epsilon=cfg.epsilon,
            target_indices=cfg.target_indices,
            branch_budget=cfg.branch_budget,
            node_budget=cfg.node_budget,
            symmetries=cfg.symmetries,
        )
        graph.save(ctx.out_dir)
        summary = graph.summary()
        summary_path = os.path.join(ctx.out_dir, "summary.csv")
        with open(summary_path, "w") as f:
            f.write("index,classes\n")
            for index, count in summary.items():
                f.write(f"{index},{count}\n")
        click.echo("index -> classes: " + json.dumps(summary))
        if graph.warning:
            click.echo(f"warning: {graph.warning}", err=True)
        if ctx.plot:
            from .report import plot_landscape

            plot_landscape(graph, os.path.join(ctx.out_dir, "landscape.png"))
        _write_metadata(
            ctx, "landscape",
            {"nodes": len(graph.nodes), "edges": len(graph.edges)},
        )

    _guard(body)


def _parse_range(text: str, what: str):
    try:
        lo, hi = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise ConfigError(f"invalid {what} {text!r}; expected lo:hi")
    if not lo < hi:
        raise ConfigError(f"{what} must satisfy lo < hi, got {text!r}")
    return lo, hi


@main.command("index-map")
@click.option("--alpha-range", default="0.8:2.0", show_default=True)
@click.option("--kappa-range", default="0.005:0.03", show_default=True)
@click.option("--steps", default=16, show_default=True, type=int)
@click.pass_obj
def index_map(ctx: CliContext, alpha_range, kappa_range, steps):
    """Tabulate the zero-state index over an (alpha, kappa) rectangle."""

    def body():
        cfg = ctx.cfg
        if not cfg.order.is_constant:
            raise ConfigError("index-map requires a constant-order config template")
        if steps < 1:
            raise ConfigError("--steps must be at least 1")
        a_lo, a_hi = _parse_range(alpha_range, "--alpha-range")
        k_lo, k_hi = _parse_range(kappa_range, "--kappa-range")
        if a_lo <= 0.0 or a_hi > 2.0:
            raise ConfigError("--alpha-range must lie inside (0, 2]")
        if k_lo <= 0.0:
            raise ConfigError("--kappa-range must be positive")
        alphas = np.linspace(a_lo, a_hi, steps)
        kappas = np.linspace(k_lo, k_hi, steps)
        rows, jumps = index_sweep(cfg.grid, alphas, kappas)
        map_path = os.path.join(ctx.out_dir, "index_map.csv")
        with open(map_path, "w") as f:
            f.write("kappa,alpha,index\n")
            for kappa, alpha, index in rows:
                f.write(f"{kappa:.17g},{alpha:.17g},{index}\n")
        jumps_path = os.path.join(ctx.out_dir, "index_jumps.csv")
        with open(jumps_path, "w") as f:
            f.write("kappa,waveNumber,alphaStar\n")
            for kappa, k, alpha_star in jumps:
                f.write(f"{kappa:.17g},{k},{alpha_star:.17g}\n")
        click.echo(f"wrote {map_path} ({len(rows)} cells) and {jumps_path}")
        if ctx.plot:
            from .report import plot_index_map

            plot_index_map(rows, jumps, os.path.join(ctx.out_dir, "index_map.png"))
        _write_metadata(ctx, "index-map", {"steps": steps})

    _guard(body)


if __name__ == "__main__":
    main()
