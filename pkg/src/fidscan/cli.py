"""Command-line driver: parameter scans, fidelity of checkpoints, fits, ED checks.

Subcommands:

    scan      paired DMRG runs at D and D + delta over a (lambda, L, D) grid,
              one CSV row per grid point
    fid       overlap and susceptibility of two checkpoint files
    fit       peak extraction from scan CSVs plus a finite-size-scaling fit
    ed-check  DMRG against exact diagonalization on small chains

Configuration comes from a plain key=value file, overridden by flags.
Unknown keys are errors: silent typos in physics parameters are the
costliest failure mode.  Exit codes: 0 success, 1 tolerance failure in
ed-check, 2 config error, 3 capacity error, 4 convergence error, 5 I/O.
"""

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import checkpoint, fidelity, observables, scaling
from .engine import DmrgConfig, run_dmrg
from .errors import (CapacityError, ConfigError, ConvergenceError,
                     FidscanError)
from .model import ModelParams
from .observables import ScanRecord, ScanSeries
from .oracle import (MAX_SITES, exact_ground_state, exact_half_chain_entropy,
                     exact_overlap)

CSV_HEADER = ["lambda", "L", "D", "delta", "m", "energy", "e_density",
              "fidelity", "susceptibility", "entropy", "max_trunc_error"]
ERROR_MARKER = "ERR"

EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_CONVERGENCE = 4
EXIT_IO = 5

# exact-regime tolerances enforced by ed-check
ED_TOL_ENERGY = 1e-9
ED_TOL_OVERLAP = 1e-8
ED_TOL_ENTROPY = 1e-6


@dataclass(frozen=True)
class ScanConfig:
    """Everything one scan needs; mirrors the config-file keys."""

    lam: float = None
    d_min: float = None
    d_max: float = None
    d_step: float = None
    delta: float = fidelity.DEFAULT_DELTA
    lengths: tuple = ()
    m: int = 64
    sweeps: int = 5
    h1: float = -1.0
    sz_sector: int = None
    output: str = None
    checkpoint_dir: str = None
    workers: int = 1

    def validated(self):
        for name in ("lam", "d_min", "d_max", "d_step"):
            if getattr(self, name) is None:
                raise ConfigError(f"missing required setting '{_key_name(name)}'")
        if not self.lengths:
            raise ConfigError("missing required setting 'lengths'")
        if self.d_min >= self.d_max:
            raise ConfigError(f"d_min {self.d_min} must be below d_max {self.d_max}")
        if self.d_step <= 0:
            raise ConfigError(f"d_step must be positive, got {self.d_step}")
        if self.delta <= 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        for length in self.lengths:
            if length % 2 != 0:
                raise ConfigError(f"lengths must be even, got {length}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        return self

    def d_grid(self):
        count = int(np.floor((self.d_max - self.d_min) / self.d_step + 1e-9)) + 1
        return [self.d_min + k * self.d_step for k in range(count)]


def _key_name(field_name):
    return {"lam": "lambda"}.get(field_name, field_name)


_PARSERS = {
    "lam": float, "d_min": float, "d_max": float, "d_step": float,
    "delta": float, "h1": float,
    "m": int, "sweeps": int, "sz_sector": int, "workers": int,
    "lengths": lambda s: tuple(int(tok) for tok in str(s).split(",") if tok.strip()),
    "output": str, "checkpoint_dir": str,
}


def read_config_file(path) -> dict:
    """key = value lines; '#' starts a comment; unknown keys are fatal."""
    known = {_key_name(f.name): f.name for f in fields(ScanConfig)}
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        name = known[key]
        try:
            values[name] = _PARSERS[name](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def build_scan_config(args) -> ScanConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in fields(ScanConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return ScanConfig(**values).validated()


def _fmt(x) -> str:
    return f"{x:.17g}"


def _scan_point(task):
    """One grid point: paired runs at D and D + delta.  Worker-safe."""
    lam, length, d, delta, m, sweeps, h1, sz_sector, ckpt_dir = task
    config = DmrgConfig(m=m, sweeps=sweeps, sz_sector=sz_sector)
    try:
        rec_a = run_dmrg(ModelParams(lam=lam, d_aniso=d, h1=h1,
                                     length=length), config)
        rec_b = run_dmrg(ModelParams(lam=lam, d_aniso=d + delta, h1=h1,
                                     length=length), config)
    except (FidscanError, ValueError) as exc:
        return ("error", f"{type(exc).__name__}: {exc}")
    if ckpt_dir:
        base = os.path.join(ckpt_dir, f"L{length}_D{d:.10g}")
        checkpoint.save_record(rec_a, base + ".fdmr")
        checkpoint.save_record(rec_b, base + "+delta.fdmr")
    f = fidelity.overlap(rec_a, rec_b)
    s = fidelity.susceptibility(f, delta, length)
    entropy = observables.entanglement_entropy(rec_a.rho_spectrum)
    trunc = max(rec_a.max_trunc_error, rec_b.max_trunc_error)
    return ("ok", ScanRecord(
        lam=lam, length=length, d_aniso=d, delta=delta, m=m,
        energy=rec_a.energy, e_density=rec_a.energy / length,
        fidelity=f, susceptibility=s, entropy=entropy,
        max_trunc_error=trunc))


def run_scan(config: ScanConfig):
    """Execute the grid and return {L: ScanSeries}; writes CSV when configured.

    Work is dispatched to a process pool but rows are emitted in
    deterministic grid order regardless of completion order.  A failed
    point becomes an ERR-marked row and the scan continues.
    """
    config.validated()
    if config.checkpoint_dir:
        os.makedirs(config.checkpoint_dir, exist_ok=True)
    grid = config.d_grid()
    tasks = [(config.lam, length, d, config.delta, config.m, config.sweeps,
              config.h1, config.sz_sector, config.checkpoint_dir)
             for length in config.lengths for d in grid]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers,
                                 initializer=_limit_worker_threads) as pool:
            outcomes = list(pool.map(_scan_point, tasks))
    else:
        outcomes = [_scan_point(t) for t in tasks]

    rows = []
    series = {}
    per_length = {}
    for task, (status, payload) in zip(tasks, outcomes):
        _, length, d = task[0], task[1], task[2]
        if status == "ok":
            rec = payload
            per_length.setdefault(length, []).append(rec)
            rows.append([_fmt(rec.lam), str(rec.length), _fmt(rec.d_aniso),
                         _fmt(rec.delta), str(rec.m), _fmt(rec.energy),
                         _fmt(rec.e_density), _fmt(rec.fidelity),
                         _fmt(rec.susceptibility), _fmt(rec.entropy),
                         _fmt(rec.max_trunc_error)])
        else:
            rows.append([_fmt(config.lam), str(length), _fmt(d),
                         _fmt(config.delta), str(config.m)]
                        + [ERROR_MARKER] * 6)
            print(f"point L={length} D={d}: {payload}", file=sys.stderr)
    for length, recs in per_length.items():
        # a series with failed points has holes: leave it out, keep the CSV rows
        if len(recs) == len(grid):
            series[length] = ScanSeries(records=tuple(recs),
                                        grid_step=config.d_step)
    if config.output:
        with open(config.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerows(rows)
    return series


def _limit_worker_threads():
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


def read_scan_csv(path):
    """Parse a scan CSV into rows of floats, skipping ERR-marked rows."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ConfigError(f"{path}: empty CSV") from None
            if header != CSV_HEADER:
                raise ConfigError(f"{path}: unexpected header {header}")
            rows = []
            for lineno, row in enumerate(reader, 2):
                if len(row) != len(CSV_HEADER):
                    raise ConfigError(
                        f"{path}: row {lineno} has {len(row)} fields, "
                        f"expected {len(CSV_HEADER)}")
                if ERROR_MARKER in row:
                    continue
                parsed = {}
                for name, value in zip(CSV_HEADER, row):
                    try:
                        parsed[name] = float(value)
                    except ValueError:
                        raise ConfigError(
                            f"{path}: row {lineno}, column {name}: "
                            f"cannot parse {value!r}") from None
                rows.append(parsed)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def _series_from_rows(rows):
    by_length = {}
    for row in rows:
        by_length.setdefault(int(row["L"]), []).append(row)
    result = {}
    for length, chunk in by_length.items():
        chunk.sort(key=lambda r: r["D"])
        records = tuple(ScanRecord(
            lam=r["lambda"], length=length, d_aniso=r["D"], delta=r["delta"],
            m=int(r["m"]), energy=r["energy"], e_density=r["e_density"],
            fidelity=r["fidelity"], susceptibility=r["susceptibility"],
            entropy=r["entropy"], max_trunc_error=r["max_trunc_error"])
            for r in chunk)
        step = (records[1].d_aniso - records[0].d_aniso
                if len(records) > 1 else 1.0)
        result[length] = ScanSeries(records=records, grid_step=step)
    return result


def extract_peaks(series_by_length, observable):
    """(L, D_max, value_max) per length via parabolic peak interpolation."""
    peaks = []
    for length in sorted(series_by_length):
        series = series_by_length[length]
        if observable == "d2e":
            curve = [(d, -v) for d, v in observables.second_derivative(series)]
        else:
            curve = list(zip(series.d_values.tolist(),
                             series.column(observable).tolist()))
        d_max, v_max = observables.peak_location(curve)
        peaks.append((length, d_max, v_max))
    return peaks


FIT_KINDS = {
    "dc-nu": (scaling.fit_dc_nu, "positions"),
    "powerlaw": (scaling.fit_powerlaw, "values"),
    "saturation": (scaling.fit_saturation, "values"),
    "central-charge": (scaling.fit_central_charge, "values"),
}


def run_fit(kind, csv_paths, observable):
    rows = []
    for path in csv_paths:
        rows.extend(read_scan_csv(path))
    series = _series_from_rows(rows)
    peaks = extract_peaks(series, observable)
    fitter, which = FIT_KINDS[kind]
    if which == "positions":
        points = [(length, d_max) for length, d_max, _ in peaks]
    else:
        points = [(length, v_max) for length, _, v_max in peaks]
    result = fitter(points)
    # each route infers the Luttinger parameter through its own exponent
    if kind == "powerlaw":
        slope = result.parameters["exponent"][0]
        if observable == "susceptibility":
            result.derived["k_from_delta_q"] = scaling.k_from_delta_q(-slope)
        elif observable == "d2e":
            result.derived["k_from_energy_exponent"] = \
                scaling.k_from_energy_exponent(slope)
    return peaks, result


def _print_fit(kind, observable, peaks, result, params_out=None):
    print(f"fit kind      : {kind}")
    print(f"observable    : {observable}")
    print(f"model         : {result.model_name}")
    print("peaks (L, D_max, value_max):")
    for length, d_max, v_max in peaks:
        print(f"  {length:6d}  {d_max:.10g}  {v_max:.10g}")
    print("parameters:")
    for name, (value, sigma) in result.parameters.items():
        err = "n/a" if sigma is None else f"{sigma:.3g}"
        print(f"  {name:14s} = {value:.10g}  (one sigma {err})")
    for name, value in result.derived.items():
        print(f"  {name:14s} = {value:.10g}")
    print(f"rss           : {result.rss:.6g} over {result.n_points} points")
    if params_out:
        with open(params_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "value", "sigma"])
            for name, (value, sigma) in result.parameters.items():
                writer.writerow([name, _fmt(value),
                                 "" if sigma is None else _fmt(sigma)])
            for name, value in result.derived.items():
                writer.writerow([name, _fmt(value), ""])


def run_ed_check(config: ScanConfig):
    """Compare DMRG with exact diagonalization; nonzero exit on any miss."""
    for name in ("lam", "d_min", "d_max", "d_step"):
        if getattr(config, name) is None:
            raise ConfigError(f"missing required setting '{_key_name(name)}'")
    if not config.lengths:
        raise ConfigError("missing required setting 'lengths'")
    for length in config.lengths:
        if length > MAX_SITES:
            raise CapacityError(
                f"ed-check supports L <= {MAX_SITES}, got {length}")
    failures = 0
    for length in config.lengths:
        exact_m = 3 ** (length // 2 - 1)
        m = exact_m if length <= 10 else config.m
        gated = m >= exact_m
        dmrg_config = DmrgConfig(m=m, sweeps=config.sweeps,
                                 sz_sector=config.sz_sector)
        for d in config.d_grid():
            pa = ModelParams(lam=config.lam, d_aniso=d, h1=config.h1,
                             length=length)
            pb = ModelParams(lam=config.lam, d_aniso=d + config.delta,
                             h1=config.h1, length=length)
            ed_a = exact_ground_state(pa)
            ed_b = exact_ground_state(pb)
            rec_a = run_dmrg(pa, dmrg_config)
            rec_b = run_dmrg(pb, dmrg_config)
            de = abs(rec_a.energy - ed_a.energy)
            df = abs(fidelity.overlap(rec_a, rec_b)
                     - exact_overlap(ed_a, ed_b))
            ds = abs(observables.entanglement_entropy(rec_a.rho_spectrum)
                     - exact_half_chain_entropy(ed_a))
            ok = (de <= ED_TOL_ENERGY and df <= ED_TOL_OVERLAP
                  and ds <= ED_TOL_ENTROPY)
            if gated and not ok:
                failures += 1
            status = "ok" if ok else ("FAIL" if gated else "info")
            print(f"L={length} D={_fmt(d)} m={m}: dE={de:.3e} "
                  f"dF={df:.3e} dS={ds:.3e} [{status}]")
    if failures:
        print(f"{failures} point(s) exceeded tolerance", file=sys.stderr)
    return EXIT_TOLERANCE if failures else 0


def _add_scan_flags(parser):
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="Ising-like anisotropy")
    parser.add_argument("--d-min", dest="d_min", type=float)
    parser.add_argument("--d-max", dest="d_max", type=float)
    parser.add_argument("--d-step", dest="d_step", type=float)
    parser.add_argument("--delta", type=float,
                        help="fidelity parameter step (default 1e-3)")
    parser.add_argument("--lengths", type=_PARSERS["lengths"],
                        help="comma-separated even chain lengths")
    parser.add_argument("--m", type=int, help="kept states per block")
    parser.add_argument("--sweeps", type=int)
    parser.add_argument("--h1", type=float, help="boundary field at site 1")
    parser.add_argument("--sz-sector", dest="sz_sector", type=int)
    parser.add_argument("--output", help="CSV output path")
    parser.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    parser.add_argument("--workers", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fidscan",
        description="DMRG fidelity scans for the spin-1 anisotropic XXZ chain")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="run a (lambda, L, D) scan to CSV")
    _add_scan_flags(scan)

    fid = sub.add_parser("fid", help="overlap of two checkpoints")
    fid.add_argument("checkpoint_a")
    fid.add_argument("checkpoint_b")
    fid.add_argument("--delta", type=float,
                     help="override the parameter step used for S")

    fit = sub.add_parser("fit", help="finite-size-scaling fit of scan CSVs")
    fit.add_argument("kind", choices=sorted(FIT_KINDS))
    fit.add_argument("csv", nargs="+")
    fit.add_argument("--observable", default="susceptibility",
                     choices=["susceptibility", "entropy", "d2e"])
    fit.add_argument("--params-out", dest="params_out",
                     help="write fitted parameters as CSV")

    ed = sub.add_parser("ed-check", help="validate DMRG against ED (L <= 12)")
    _add_scan_flags(ed)
    return parser


def _cmd_scan(args):
    config = build_scan_config(args)
    if config.output is None:
        raise ConfigError("scan requires an output CSV path")
    run_scan(config)
    return 0


def _cmd_fid(args):
    rec_a = checkpoint.load_record(args.checkpoint_a)
    rec_b = checkpoint.load_record(args.checkpoint_b)
    f = fidelity.overlap(rec_a, rec_b)
    delta = args.delta
    if delta is None:
        delta = abs(rec_b.params.d_aniso - rec_a.params.d_aniso)
    print(f"fidelity       = {_fmt(f)}")
    if delta > 0:
        s = fidelity.susceptibility(f, delta, rec_a.params.length)
        print(f"delta          = {_fmt(delta)}")
        print(f"susceptibility = {_fmt(s)}")
    else:
        print("susceptibility = n/a (records at identical D)")
    return 0


def _cmd_fit(args):
    peaks, result = run_fit(args.kind, args.csv, args.observable)
    _print_fit(args.kind, args.observable, peaks, result, args.params_out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"scan": _cmd_scan, "fid": _cmd_fid, "fit": _cmd_fit,
                "ed-check": lambda a: run_ed_check(build_scan_config(a))}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FidscanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
