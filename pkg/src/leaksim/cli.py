"""Parameter sweeps from the command line, CSV/JSON output and slope fits.

Example::

    leaksim --distances 3,5 --p-values 1e-3,2e-3,4e-3,8e-3 --modes plain \\
        --shots 1000000 --seed 7 --out plain.csv --fit 4

CSV columns: mode, d, p, T, shots, failures, p_round, ci_low, ci_high, seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from leaksim.circuits import MODES, CodeParams, build_experiment, default_rounds
from leaksim.dgraph import build_graph
from leaksim.engine import Cell, LogicalErrorEstimate, estimate
from leaksim.matcher import DECODERS
from leaksim.noise import NoiseParams

COLUMNS = ("mode", "d", "p", "T", "shots", "failures", "p_round", "ci_low", "ci_high", "seed")


class ConfigError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    distances: tuple[int, ...]
    p_values: tuple[float, ...]
    modes: tuple[str, ...] = ("plain",)
    shots: int = 10_000
    rounds: int | None = None
    leak_factor: float = 0.1
    decay_prob: float = 0.01
    seed: int = 0
    workers: int = 1
    out: str | None = None
    format: str = "csv"
    decoder: str = "pymatching"
    dump_schedule: str | None = None
    dump_graph: str | None = None
    fit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(self.distances))
        object.__setattr__(self, "p_values", tuple(self.p_values))
        object.__setattr__(self, "modes", tuple(self.modes))
        self.validate()

    def validate(self) -> None:
        if not self.distances:
            raise ConfigError("--distances: give at least one distance")
        for d in self.distances:
            if d < 3 or d % 2 == 0:
                raise ConfigError(f"--distances: {d} is not an odd integer >= 3")
        if not self.p_values:
            raise ConfigError("--p-values: give at least one error rate")
        for p in self.p_values:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"--p-values: {p} is outside [0, 1]")
            if p == 0.0:
                raise ConfigError("--p-values: p = 0 is not supported, line weights -ln p are undefined")
        if not self.modes:
            raise ConfigError("--modes: give at least one mode")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"--modes: unknown mode {m!r}, choose from {', '.join(MODES)}")
        if self.shots < 1:
            raise ConfigError("--shots must be >= 1")
        if self.rounds is not None and self.rounds < 1:
            raise ConfigError("--rounds must be >= 1")
        if not 0.0 <= self.decay_prob <= 1.0:
            raise ConfigError("--decay must lie in [0, 1]")
        if self.leak_factor < 0 or any(self.leak_factor * p > 1 for p in self.p_values):
            raise ConfigError("--leak-factor times p must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")
        if self.decoder not in DECODERS:
            raise ConfigError(f"--decoder must be one of {', '.join(sorted(DECODERS))}")
        if self.fit is not None and self.fit < 2:
            raise ConfigError("--fit needs K >= 2 points")

    def rounds_for(self, d: int) -> int:
        return self.rounds if self.rounds is not None else default_rounds(d)

    def cells(self) -> list[Cell]:
        return [
            Cell(d, self.rounds_for(d), mode, p, self.leak_factor, self.decay_prob)
            for d in self.distances
            for p in self.p_values
            for mode in self.modes
        ]

    def to_argv(self) -> list[str]:
        argv = [
            "--distances", ",".join(str(d) for d in self.distances),
            "--p-values", ",".join(repr(p) for p in self.p_values),
            "--modes", ",".join(self.modes),
            "--shots", str(self.shots),
            "--leak-factor", repr(self.leak_factor),
            "--decay", repr(self.decay_prob),
            "--seed", str(self.seed),
            "--workers", str(self.workers),
            "--format", self.format,
            "--decoder", self.decoder,
        ]  # fmt: skip
        for flag, value in (
            ("--rounds", self.rounds),
            ("--out", self.out),
            ("--dump-schedule", self.dump_schedule),
            ("--dump-graph", self.dump_graph),
            ("--fit", self.fit),
        ):
            if value is not None:
                argv += [flag, str(value)]
        return argv


@dataclass(frozen=True)
class SweepRow:
    mode: str
    d: int
    p: float
    T: int
    shots: int
    failures: int
    p_round: float
    ci_low: float
    ci_high: float
    seed: int

    @classmethod
    def from_estimate(cls, cell: Cell, est: LogicalErrorEstimate, seed: int) -> "SweepRow":
        return cls(cell.mode, cell.d, cell.p, cell.rounds, est.shots, est.failures,
                   est.p_round, est.ci_low, est.ci_high, seed)  # fmt: skip


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    intercept: float
    r_squared: float
    points_used: int


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="leaksim",
        description="Logical error rate sweeps for the repetition code with leakage.",
    )
    ap.add_argument("--distances", type=_int_list, required=True, help="comma-separated odd distances")
    ap.add_argument("--p-values", type=_float_list, required=True, help="comma-separated gate error rates")
    ap.add_argument("--modes", type=_str_list, default=["plain"], help="plain, leakage and/or teleport")
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--rounds", type=int, default=None, help="rounds per shot (default max(10, 3d))")
    ap.add_argument("--leak-factor", type=float, default=0.1, help="leak probability per H/CZ is this times p")
    ap.add_argument("--decay", type=float, default=0.01, help="leakage decay probability per gate")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="output file (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--decoder", choices=sorted(DECODERS), default="pymatching")
    ap.add_argument("--dump-schedule", default=None, metavar="PATH", help="write gate-by-gate schedules")
    ap.add_argument("--dump-graph", default=None, metavar="PATH", help="write decoding-graph lines")
    ap.add_argument("--fit", type=int, default=None, metavar="K", help="fit slopes through the K lowest points")
    return ap


def parse_config(argv: list[str]) -> SweepConfig:
    ns = build_parser().parse_args(argv)
    return SweepConfig(
        distances=ns.distances,
        p_values=ns.p_values,
        modes=ns.modes,
        shots=ns.shots,
        rounds=ns.rounds,
        leak_factor=ns.leak_factor,
        decay_prob=ns.decay,
        seed=ns.seed,
        workers=ns.workers,
        out=ns.out,
        format=ns.format,
        decoder=ns.decoder,
        dump_schedule=ns.dump_schedule,
        dump_graph=ns.dump_graph,
        fit=ns.fit,
    )


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1) + "\n"


def read_rows(path: str) -> list[SweepRow]:
    with open(path) as fh:
        if path.endswith(".json"):
            return [SweepRow(**rec) for rec in json.load(fh)]
        types = {f: t for f, t in zip(COLUMNS, (str, int, float, int, int, int, float, float, float, int))}
        return [SweepRow(**{k: types[k](v) for k, v in rec.items()}) for rec in csv.DictReader(fh)]


class _Writer:
    """Writes rows as cells complete, so partial sweeps stay on disk."""

    def __init__(self, config: SweepConfig):
        self.config = config
        self.rows: list[SweepRow] = []
        self.fh = None
        if config.out is not None:
            try:
                self.fh = open(config.out, "w", newline="")
            except OSError as exc:
                raise ConfigError(f"--out: cannot write {config.out}: {exc.strerror}") from exc
        elif config.format == "csv":
            self.fh = sys.stdout
        if config.format == "csv" and self.fh is not None:
            self.fh.write(",".join(COLUMNS) + "\n")
            self.fh.flush()

    def add(self, row: SweepRow) -> None:
        self.rows.append(row)
        if self.config.format == "csv":
            self.fh.write(rows_to_csv([row]).split("\n", 1)[1])
            self.fh.flush()
        elif self.config.out is not None:
            self.fh.seek(0)
            self.fh.truncate()
            self.fh.write(rows_to_json(self.rows))
            self.fh.flush()

    def close(self) -> None:
        if self.config.format == "json" and self.config.out is None:
            sys.stdout.write(rows_to_json(self.rows))
        if self.fh is not None and self.fh is not sys.stdout:
            self.fh.close()


def write_dumps(config: SweepConfig) -> None:
    if config.dump_schedule:
        with open(config.dump_schedule, "w") as fh:
            for d in config.distances:
                for mode in config.modes:
                    fh.write(build_experiment(CodeParams(d, config.rounds_for(d), mode)).dump())
    if config.dump_graph:
        with open(config.dump_graph, "w") as fh:
            for d in config.distances:
                for mode in config.modes:
                    schedule = build_experiment(CodeParams(d, config.rounds_for(d), mode))
                    for p in config.p_values:
                        fh.write(build_graph(schedule, NoiseParams(p)).dump())


def run_sweep(config: SweepConfig, emit=None) -> list[SweepRow]:
    """Evaluate every (distance, p, mode) cell in order.  ``emit`` sees each row as it completes."""
    rows = []
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for cell in config.cells():
            est = estimate(cell, config.shots, config.seed, decoder=config.decoder, executor=pool)
            row = SweepRow.from_estimate(cell, est, config.seed)
            rows.append(row)
            if emit is not None:
                emit(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def fit_slope(rows, k_lowest: int | None = None) -> SlopeFit:
    """Least-squares line through (ln p, ln p_round) of the lowest usable points.

    Rows with zero failures are skipped.  All rows should share one (d, mode).
    """
    usable = sorted((r for r in rows if r.failures > 0 and r.p_round > 0), key=lambda r: r.p)
    if k_lowest is not None:
        usable = usable[:k_lowest]
    if len(usable) < 2:
        raise InsufficientDataError(
            f"need at least 2 points with nonzero failures to fit a slope, have {len(usable)}; "
            "run more shots at the lowest error rates"
        )
    x = np.log([r.p for r in usable])
    y = np.log([r.p_round for r in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2, len(usable))


def group_fits(rows, k_lowest: int) -> dict[tuple[int, str], SlopeFit | str]:
    groups: dict[tuple[int, str], list] = {}
    for r in rows:
        groups.setdefault((r.d, r.mode), []).append(r)
    out = {}
    for key, rs in groups.items():
        try:
            out[key] = fit_slope(rs, k_lowest)
        except InsufficientDataError as exc:
            out[key] = str(exc)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
        writer = _Writer(config)
        write_dumps(config)
    except (ConfigError, OSError) as exc:
        print(f"leaksim: error: {exc}", file=sys.stderr)
        return 2
    try:
        rows = run_sweep(config, emit=writer.add)
    except KeyboardInterrupt:
        print("leaksim: interrupted; completed cells were written", file=sys.stderr)
        return 130
    finally:
        writer.close()
    if config.fit:
        stream = sys.stdout if config.out else sys.stderr
        for (d, mode), fit in sorted(group_fits(rows, config.fit).items()):
            if isinstance(fit, SlopeFit):
                print(
                    f"fit d={d} mode={mode} exponent={fit.exponent:.3f} "
                    f"r2={fit.r_squared:.4f} points={fit.points_used}",
                    file=stream,
                )
            else:
                print(f"fit d={d} mode={mode} failed: {fit}", file=stream)
    return 0 if len(rows) == len(config.cells()) else 1


if __name__ == "__main__":
    sys.exit(main())
