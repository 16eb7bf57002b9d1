"""Command-line front end.

Every output starts with a header carrying the tool version and the full
configuration.  Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction

import click
import numpy as np

from . import __version__
from .channel import build_ensemble, eigen_cloud, spectral_report
from .linalg import ConvergenceError, LinalgError
from .montecarlo import DEFAULT_CORPUS, sd_vs_mc_harness
from .sd_engine import SDError, SDNumericalError, default_depth, rung_identity_residual, sd_value
from .walks_bounds import (
    BoundsError,
    ab_lower_power,
    ab_lower_s2,
    km_channel_density,
    km_density,
    markov_upper,
    walk_counts,
)
from .word_core import WordError, format_kword, parse_kword

TOOL = f"qexpand {__version__}"


class NumericalFailure(Exception):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def _header(command: str, config: dict) -> dict:
    return {"tool": TOOL, "command": command, "config": config}


def _csv_header(command: str, config: dict) -> str:
    return "# " + json.dumps(_header(command, config), sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@click.group()
@click.version_option(__version__, prog_name="qexpand")
def cli():
    """Haar moments, channel spectra and expander bounds."""


@cli.command()
@click.option("--n", "N", type=int, required=True, help="matrix dimension N")
@click.option("--d", "d", type=int, required=True, help="number of unitaries")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--hermitian", is_flag=True, help="use the Hermitized channel")
@click.option("--cap", type=int, default=2500, show_default=True, help="max superoperator dimension")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def spectrum(N, d, seed, hermitian, cap, out):
    """Eigenvalue cloud of the channel superoperator as CSV (re,im)."""
    if N < 1 or d < 1:
        raise click.BadParameter("need N >= 1 and d >= 1")
    E = build_ensemble(N, d, seed)
    res = eigen_cloud(E, cap=cap, hermitian=hermitian)
    cfg = {"N": N, "d": d, "seed": seed, "hermitian": hermitian, "cap": cap}
    lines = [_csv_header("spectrum", cfg), "re,im\n"]
    lines += [f"{_fmt(z.real)},{_fmt(z.imag)}\n" for z in res.eigenvalues]
    _emit("".join(lines), out)


@cli.command()
@click.option("--n", "N", type=int, required=True)
@click.option("--d", "d", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="first seed")
@click.option("--seeds", type=int, default=1, show_default=True, help="number of consecutive seeds")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--no-power", is_flag=True, help="skip s2(E^m)^(1/m)")
@click.option("--timings", is_flag=True, help="record wall-clock time (breaks byte reproducibility)")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def gap(N, d, seed, seeds, tol, no_power, timings, out):
    """Second singular values across seeds as JSON."""
    if N < 1 or d < 1 or seeds < 1:
        raise click.BadParameter("need N, d, seeds >= 1")
    reports = []
    for s in range(seed, seed + seeds):
        rep = spectral_report(build_ensemble(N, d, s), tol=tol, with_power=not no_power).to_json()
        if not timings:
            rep["runtime_ms"] = None
        reports.append(rep)
    cfg = {"N": N, "d": d, "seed": seed, "seeds": seeds, "tol": tol, "power": not no_power}
    s2 = [r["s2"] for r in reports]
    _emit(_json({**_header("gap", cfg), "reports": reports, "mean_s2": float(np.mean(s2))}), out)


def _parse_word(word: str, d: int | None):
    return parse_kword(word, d if d is not None else 10**9)


def _frac_fields(v) -> dict:
    if isinstance(v, Fraction):
        return {"value": f"{v.numerator}/{v.denominator}", "value_num": str(v.numerator), "value_den": str(v.denominator)}
    return {"value": _fmt(v), "value_num": None, "value_den": None}


@cli.command()
@click.option("--word", required=True, help='k-word, e.g. "1 2 | -2 -1"')
@click.option("--n", "N", type=int, required=True)
@click.option("--d", "d", type=int, default=None, help="alphabet size for validation")
@click.option("--mode", type=click.Choice(["exact", "series"]), default="exact", show_default=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--depth", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def sd(word, N, d, mode, tol, depth, out):
    """Haar moment E[prod Tr U(S(l))] of a k-word as JSON."""
    kw = _parse_word(word, d)
    res = sd_value(kw, N, mode, tol=tol, depth=depth)
    cfg = {"word": format_kword(kw), "N": N, "d": d, "mode": mode, "tol": tol, "depth": depth}
    body = {
        **_frac_fields(res.value),
        "float": float(res.value),
        "certified_error": res.certified_error,
        "depth": res.depth_used,
        "mode": res.mode,
        "finishing_counts_per_depth": res.finishing_counts,
        "rung_counts_per_depth": res.rung_counts,
    }
    _emit(_json({**_header("sd", cfg), **body}), out)


@cli.command()
@click.option("--word", required=True, help="a minimal 1-word")
@click.option("--n", "N", type=int, default=16, show_default=True)
@click.option("--depth", type=int, default=None, help="default: smallest depth with tail < tol")
@click.option("--tol", type=float, default=1e-3, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def rung(word, N, depth, tol, out):
    """Residual of E0(S) = 1 + (rung-free finishing sum) at a depth."""
    kw = _parse_word(word, None)
    if len(kw) != 1:
        raise click.BadParameter("rung expects a single trace")
    s = kw[0]
    n = depth if depth is not None else default_depth(2 * len(s), N, tol)
    rep = rung_identity_residual(s, N, n)
    cfg = {"word": format_kword(kw), "N": N, "depth": n, "tol": tol}
    body = {
        "e0": rep.e0,
        "rung_free_sum": rep.rung_free_sum,
        "residual": rep.residual,
        "tail_bound": rep.tail,
        "pass": rep.ok,
        "tracking_residual": rep.tracking_residual,
    }
    _emit(_json({**_header("rung", cfg), **body}), out)


@cli.command()
@click.option("--d", "d", type=int, required=True)
@click.option("--pmax", type=int, required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def walks(d, pmax, out):
    """Exact walk counts N(p, q, d) as CSV."""
    table = walk_counts(pmax, d)
    lines = [_csv_header("walks", {"d": d, "pmax": pmax}), "p,q,count\n"]
    lines += [f"{p},{q},{c}\n" for p, q, c in table.rows()]
    _emit("".join(lines), out)


@cli.command()
@click.option("--n", "N", type=int, required=True)
@click.option("--d", "d", type=int, required=True)
@click.option("--eps", type=float, default=0.1, show_default=True)
@click.option("--c", "c", type=float, default=None, help="constant in the expectation bounds")
@click.option("--m", "m", type=int, default=1, show_default=True, help="power for power_tail")
@click.option("--pmax", type=int, default=32, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def bounds(N, d, eps, c, m, pmax, out):
    """Lower and upper bound evaluations as JSON lines."""
    cfg = {"N": N, "d": d, "eps": eps, "c": c, "m": m, "pmax": pmax}
    reps = [ab_lower_s2(N, d, pmax), ab_lower_power(N, d)]
    for kind in ("s2_tail", "lambda2_tail", "power_tail", "expectation_s2", "expectation_lambda2"):
        reps.append(markov_upper(kind, N, d, eps=eps, c=c, m=m))
    lines = [json.dumps(_header("bounds", cfg), sort_keys=True)]
    lines += [json.dumps(r.to_json(), sort_keys=True) for r in reps]
    _emit("\n".join(lines) + "\n", out)


@cli.command()
@click.option("--q", "q", type=float, default=None, help="tree degree")
@click.option("--d", "d", type=int, default=None, help="channel overlay for degree d (q = 2d, scaled)")
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def density(q, d, points, out):
    """Kesten-McKay density samples as CSV (x, f)."""
    if (q is None) == (d is None):
        raise click.BadParameter("give exactly one of --q or --d")
    if points < 2:
        raise click.BadParameter("need at least 2 points")
    if q is not None:
        if q < 2:
            raise click.BadParameter("q must be >= 2")
        r = 2 * np.sqrt(q - 1)
        xs = np.linspace(-r, r, points)
        fs = km_density(xs, q)
    else:
        if d < 1:
            raise click.BadParameter("d must be >= 1")
        r = 2 * np.sqrt(2 * d - 1) / (2 * d)
        xs = np.linspace(-r, r, points)
        fs = km_channel_density(xs, d)
    lines = [_csv_header("density", {"q": q, "d": d, "points": points}), "x,f\n"]
    lines += [f"{_fmt(x)},{_fmt(f)}\n" for x, f in zip(xs, fs)]
    _emit("".join(lines), out)


@cli.command("mc-check")
@click.option("--n", "N", type=int, default=8, show_default=True)
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--word", "words", multiple=True, help="override the default corpus (repeatable)")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def mc_check(N, trials, seed, words, out):
    """Compare moment-engine values with Monte Carlo estimates."""
    corpus = tuple(words) if words else DEFAULT_CORPUS
    rows = sd_vs_mc_harness(corpus, N=N, trials=trials, seed=seed)
    cfg = {"N": N, "trials": trials, "seed": seed, "corpus": list(corpus)}
    body = {"rows": [r.to_json() for r in rows], "failures": sum(not r.passed for r in rows)}
    _emit(_json({**_header("mc-check", cfg), **body}), out)


VALIDATION = (WordError, SDError, BoundsError, LinalgError, click.UsageError, click.BadParameter)
NUMERICAL = (SDNumericalError, ConvergenceError, NumericalFailure, np.linalg.LinAlgError)


def run(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="qexpand", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except VALIDATION as exc:
        msg = exc.format_message() if isinstance(exc, click.ClickException) else str(exc)
        click.echo(f"error: {msg}", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except NUMERICAL as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
