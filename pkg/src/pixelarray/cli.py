"""Command line front end: config loading, dispatch and output writers.

Config files are flat TOML::

    equation = "heat"
    range = [0, 1]
    bin_size = 0.05
    cells = 8
    method = "epsilon"
    mode = "hybrid"

``solve`` writes ``pixels.pgm``, ``solutions.jsonl`` (not in pa mode) and
``summary.json`` into the output directory. ``oracle`` does the same with the
brute-force enumerator, and ``check`` runs both and compares them.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import make_binning
from .pipeline import (
    DEFAULT_MAX_SOLUTIONS,
    MODES,
    PixelResult,
    Problem,
    brute_force_solve,
    default_epsilon,
    l2_bound,
    solve,
)
from .stencil import BUILTINS, builtin_stencil, parse_stencil
from .tensorize import METHODS, FeasibilityParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3

PARAM_KEYS = ("mu", "h", "D", "f")
KNOWN_KEYS = frozenset({
    "equation", "arity", "reaction", "range", "bin_size", "cells", "method",
    "mode", "max_solutions_per_pixel", "boundaries", "hidden_equations",
    "out_dir", "epsilon", "residual_offset", "threads", *PARAM_KEYS,
})

IMAGE_NAME = "pixels.pgm"
SOLUTIONS_NAME = "solutions.jsonl"
SUMMARY_NAME = "summary.json"


class ConfigError(ValueError):
    """Bad config file or command line; ``key`` names the culprit if known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass
class RunConfig:
    equation: str
    range: tuple[float, float]
    bin_size: float
    cells: int
    params: dict = field(default_factory=dict)
    arity: int = 3
    reaction: str | None = None
    method: str = "epsilon"
    mode: str = "hybrid"
    max_solutions_per_pixel: int = DEFAULT_MAX_SOLUTIONS
    boundaries: list[tuple[float, float]] | None = None
    hidden_equations: bool = False
    out_dir: str = "pixelarray-out"
    epsilon: float | None = None
    residual_offset: float = 0.0
    threads: int = 1

    def to_problem(self) -> Problem:
        try:
            binning = make_binning(self.range[0], self.range[1], self.bin_size)
        except ValueError as e:
            key = "bin_size" if self.bin_size <= 0 else "range"
            raise ConfigError(str(e), key) from e
        try:
            if self.equation in BUILTINS:
                params = dict(self.params)
                if self.reaction is not None:
                    params["reaction"] = self.reaction
                stencil = builtin_stencil(self.equation, params)
            else:
                stencil = parse_stencil(self.equation, self.arity, self.params)
        except ValueError as e:
            raise ConfigError(str(e), "equation") from e
        try:
            feas = FeasibilityParams(self.method, self.epsilon, self.residual_offset)
        except ValueError as e:
            raise ConfigError(str(e), "epsilon") from e
        try:
            return Problem(
                stencil, binning, self.cells, feas, mode=self.mode,
                max_solutions_per_pixel=self.max_solutions_per_pixel,
                boundaries=self.boundaries, hidden_equations=self.hidden_equations,
                threads=self.threads,
            )
        except ValueError as e:
            raise ConfigError(str(e), "boundaries") from e


# -- config parsing ----------------------------------------------------------


def _real(data, key, default=None, positive=False):
    v = data.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", key)
    if positive and not v > 0:
        raise ConfigError(f"must be positive, got {v!r}", key)
    return float(v)


def _int(data, key, default=None, minimum=1):
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", key)
    if v < minimum:
        raise ConfigError(f"must be at least {minimum}, got {v}", key)
    return v


def _choice(data, key, options, default):
    v = data.get(key, default)
    if v not in options:
        raise ConfigError(f"expected one of {', '.join(options)}, got {v!r}", key)
    return v


def _pair(v, key):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"expected a [a, b] pair, got {v!r}", key)
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"expected numbers, got {v!r}", key)
    return float(v[0]), float(v[1])


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded key-value mapping."""
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError("unknown key", unknown[0])
    for key, v in data.items():
        if isinstance(v, dict):
            raise ConfigError("nested tables are not supported", key)
    for key in ("equation", "range", "bin_size", "cells"):
        if key not in data:
            raise ConfigError("missing required key", key)

    eq = data["equation"]
    if not isinstance(eq, str) or not eq.strip():
        raise ConfigError("expected a builtin name or an expression", "equation")
    reaction = data.get("reaction")
    if reaction is not None and not isinstance(reaction, str):
        raise ConfigError("expected an expression string", "reaction")
    boundaries = data.get("boundaries")
    if boundaries is not None:
        if not isinstance(boundaries, list):
            raise ConfigError("expected a list of [left, right] pairs", "boundaries")
        boundaries = [_pair(p, "boundaries") for p in boundaries]
    hidden = data.get("hidden_equations", False)
    if not isinstance(hidden, bool):
        raise ConfigError(f"expected true or false, got {hidden!r}", "hidden_equations")
    out_dir = data.get("out_dir", RunConfig.out_dir)
    if not isinstance(out_dir, str):
        raise ConfigError("expected a path string", "out_dir")
    arity = data.get("arity", 3)
    if arity not in (2, 3) or isinstance(arity, bool):
        raise ConfigError(f"must be 2 or 3, got {arity!r}", "arity")
    epsilon = _real(data, "epsilon")
    if epsilon is not None and epsilon < 0:
        raise ConfigError("must be non-negative", "epsilon")

    return RunConfig(
        equation=eq.strip(),
        range=_pair(data["range"], "range"),
        bin_size=_real(data, "bin_size", positive=True),
        cells=_int(data, "cells", minimum=2),
        params={k: _real(data, k) for k in PARAM_KEYS if k in data},
        arity=arity,
        reaction=reaction,
        method=_choice(data, "method", METHODS, "epsilon"),
        mode=_choice(data, "mode", MODES, "hybrid"),
        max_solutions_per_pixel=_int(data, "max_solutions_per_pixel", DEFAULT_MAX_SOLUTIONS),
        boundaries=boundaries,
        hidden_equations=hidden,
        out_dir=out_dir,
        epsilon=epsilon,
        residual_offset=_real(data, "residual_offset", 0.0),
        threads=_int(data, "threads", 1),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        # the decoder's message already carries "(at line L, column C)"
        raise ConfigError(f"{path}: parse error {e}") from e
    return parse_config(data)


def load_config(path) -> Problem:
    return load_run_config(path).to_problem()


# -- writers ----------------------------------------------------------------


def _num(v: float) -> str:
    return format(float(v) + 0.0, ".10g")


def write_pixel_image(r: PixelResult, path, shade: str | None = None) -> None:
    """ASCII graymap: row = left bin, column = right bin."""
    if shade == "counts":
        if not r.has_sets:
            raise ValueError("count shading needs a pass or hybrid result")
        img = np.zeros(r.nonempty.shape, dtype=np.int64)
        for (i, j), c in r.counts.items():
            img[i, j] = min(int(c), 255)
        maxval = max(1, int(img.max(initial=0)))
    elif shade is None:
        img = r.nonempty.astype(np.int64)
        maxval = 1
    else:
        raise ValueError(f"unknown shade {shade!r}")
    h, w = img.shape
    lines = ["P2", f"{w} {h}", str(maxval)]
    lines += [" ".join(str(int(x)) for x in row) for row in img]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pixel_image(path) -> np.ndarray:
    """Parse a graymap written by :func:`write_pixel_image`."""
    tokens = Path(path).read_text().split()
    if tokens[0] != "P2":
        raise ValueError("not an ASCII graymap")
    w, h = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4:4 + w * h], dtype=np.int64).reshape(h, w)


def solution_records(r: PixelResult):
    centers = r.binning.centers
    for i, j in r.pixel_items():
        yield {
            "left": centers[i],
            "right": centers[j],
            "count": int(r.counts[(i, j)]),
            "truncated": bool(r.truncated[(i, j)]),
            "tuples": r.tuples(i, j),
        }


def _record_line(rec) -> str:
    tuples = ", ".join("[" + ", ".join(_num(v) for v in t) + "]" for t in rec["tuples"])
    return (
        f'{{"left": {_num(rec["left"])}, "right": {_num(rec["right"])}, '
        f'"count": {rec["count"]}, "truncated": {json.dumps(rec["truncated"])}, '
        f'"tuples": [{tuples}]}}'
    )


def write_solutions(r: PixelResult, path) -> None:
    """One JSON line per nonempty pixel, row-major."""
    if not r.has_sets:
        raise ValueError(f"solution dump needs a pass or hybrid result, got mode {r.mode!r}")
    with open(path, "w") as fh:
        for rec in solution_records(r):
            fh.write(_record_line(rec) + "\n")


def summarize(problem: Problem, r: PixelResult) -> dict:
    """Run summary; deliberately free of timing so it is reproducible."""
    s = {
        "equation": problem.stencil.name,
        "method": problem.feasibility.method,
        "mode": r.mode,
        "bins": problem.binning.count,
        "bin_size": problem.binning.bin_size,
        "range": [problem.binning.lo, problem.binning.hi],
        "cells": problem.n_visible,
        "hidden_equations": problem.hidden_equations,
        "pixels_nonempty": int(r.nonempty.sum()),
        "pixels_total": int(r.nonempty.size),
    }
    if r.has_sets:
        s["solutions_total"] = int(sum(r.counts.values()))
        s["solutions_listed"] = int(sum(len(v) for v in r.solutions.values()))
        s["pixels_truncated"] = int(sum(bool(v) for v in r.truncated.values()))
    eps = default_epsilon(problem)
    if eps is not None:
        s["epsilon"] = eps
        s["l2_bound"] = l2_bound(eps, problem.n_visible)
        if r.has_sets:
            s["max_modified_l2"] = max_modified_l2(r)
    return s


def max_modified_l2(r: PixelResult) -> float | None:
    """Largest distance of any listed tuple from its boundary line."""
    best = None
    centers = r.binning.centers
    for (i, j), rows in r.solutions.items():
        if not len(rows):
            continue
        vals = centers[rows]
        line = np.linspace(centers[i], centers[j], r.n_visible)
        d = float(np.sqrt(((vals - line) ** 2).sum(axis=1)).max())
        best = d if best is None else max(best, d)
    return best


def write_summary(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_outputs(problem: Problem, r: PixelResult, out_dir, shade=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / IMAGE_NAME]
    write_pixel_image(r, written[0], shade)
    if r.has_sets:
        written.append(out / SOLUTIONS_NAME)
        write_solutions(r, written[-1])
    written.append(out / SUMMARY_NAME)
    write_summary(summarize(problem, r), written[-1])
    return written


# -- command dispatch ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pixelarray", description="Pixel array steady-state solver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("solve", "run the tensor sweep and write outputs"),
        ("oracle", "enumerate every assignment and write outputs"),
        ("check", "run sweep and oracle and compare"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="TOML config file")
        s.add_argument("--mode", choices=MODES)
        s.add_argument("--method", choices=METHODS)
        s.add_argument("--out-dir")
        s.add_argument("--max-solutions", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--shade", choices=["counts"], help="shade pixels by solution count")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    over = {}
    if args.mode is not None:
        over["mode"] = args.mode
    if args.method is not None:
        over["method"] = args.method
    if args.out_dir is not None:
        over["out_dir"] = args.out_dir
    if args.max_solutions is not None:
        if args.max_solutions < 1:
            raise ConfigError("must be positive", "max_solutions_per_pixel")
        over["max_solutions_per_pixel"] = args.max_solutions
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("must be positive", "threads")
        over["threads"] = args.threads
    return replace(cfg, **over)


def _describe_diff(a: PixelResult, b: PixelResult) -> str:
    diff = np.argwhere(a.nonempty != b.nonempty)
    if len(diff):
        i, j = diff[0]
        return f"{len(diff)} pixels differ in nonemptiness, first at ({i}, {j})"
    for k in sorted(set(a.solutions) | set(b.solutions)):
        sa, sb = a.solutions.get(k), b.solutions.get(k)
        if sa is None or sb is None or not np.array_equal(sa, sb):
            return f"solution sets differ at pixel {k}"
        if a.counts.get(k) != b.counts.get(k):
            return f"counts differ at pixel {k}: {a.counts.get(k)} vs {b.counts.get(k)}"
    return "results differ"


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _apply_overrides(load_run_config(args.config), args)
        problem = cfg.to_problem()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        t0 = time.perf_counter()
        if args.command == "check":
            swept = solve(problem)
            oracle = brute_force_solve(problem)
            elapsed = time.perf_counter() - t0
            if not swept.same_as(oracle):
                print(f"mismatch: {_describe_diff(swept, oracle)}", file=sys.stderr)
                return EXIT_MISMATCH
            print(f"ok: {int(swept.nonempty.sum())} nonempty pixels agree "
                  f"({elapsed:.3f} s)")
            return EXIT_OK
        result = solve(problem) if args.command == "solve" else brute_force_solve(problem)
        elapsed = time.perf_counter() - t0
        files = write_outputs(problem, result, cfg.out_dir, args.shade)
    except (ValueError, RuntimeError, OSError, MemoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{int(result.nonempty.sum())} nonempty pixels; wall time {elapsed:.3f} s")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
