"""Command-line interface and on-disk formats.

Commands
--------
    gqgs run --config FILE --out DIR     time integration with file output
    gqgs mc --f F --g G [--gamma ...]    one curvature-criterion report (JSON)
    gqgs example                         built-in trade-wind worked example
    gqgs threshold-scan --lmax L --out F rotation thresholds per direction (CSV)

Formats
-------
Snapshots are little-endian binary: magic "GQGS", u32 format version, u32
lmax, f64 time, then the coefficients a(l, m) for m = 0..lmax, l = m..lmax
as (real, imag) f64 pairs.  Diagnostics are strict CSV with one header row.
Run configuration is flat "key = value" text; the resolved configuration is
echoed into the output directory.  All numbers are printed with 17
significant digits so files round-trip losslessly.
"""

from __future__ import annotations

import argparse
import csv
import json
import struct
import sys
from pathlib import Path

import numpy as np

from . import curvature, dynamics
from .curvature import ExtendedVector, ZonalDirection, example_direction, trade_wind
from .dynamics import Diagnostics, ModelParams, SimState
from .operators import SingularOperator, z_squared_field
from .spectral import GridTooSmall, RealityViolated, SpectralField

SNAPSHOT_MAGIC = b"GQGS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIId")

CONFIG_DEFAULTS = {
    "lmax": "32",
    "gamma": "1.0",
    "rossby": "inf",
    "dt": "0.01",
    "t_end": "1.0",
    "output_every": "10",
    "cfl": "0.5",
    "stability": "warn",
    "initial": "trade_wind",
    "amplitude": "1.0",
    "wave_l": "4",
    "wave_m": "3",
    "seed": "0",
    "spectrum_slope": "-2.0",
    "topo": "none",
}

# Alternative parameterization of gamma through physical constants.
PHYSICAL_KEYS = ("omega", "radius", "gravity", "depth")


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# Snapshot file format
# ---------------------------------------------------------------------------

def write_snapshot(path, field: SpectralField, t: float) -> None:
    lmax = field.lmax
    parts = [_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, lmax, t)]
    for m in range(lmax + 1):
        col = np.ascontiguousarray(field.coeffs[m:, m], dtype="<c16")
        parts.append(col.tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_snapshot(path) -> tuple[SpectralField, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, lmax, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic {magic!r})")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    n_entries = (lmax + 1) * (lmax + 2) // 2
    expected = _HEADER.size + 16 * n_entries
    if len(raw) != expected:
        raise ValueError(f"{path}: payload length {len(raw)} != expected {expected}")
    flat = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    field = SpectralField.zeros(lmax)
    pos = 0
    for m in range(lmax + 1):
        n = lmax + 1 - m
        field.coeffs[m:, m] = flat[pos : pos + n]
        pos += n
    return field.validate(), t


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

def parse_config(path) -> dict[str, str]:
    cfg = dict(CONFIG_DEFAULTS)
    seen = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        if key not in CONFIG_DEFAULTS and key not in PHYSICAL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        cfg[key] = value
    if any(k in cfg for k in PHYSICAL_KEYS) and "gamma" not in seen:
        missing = [k for k in PHYSICAL_KEYS if k not in cfg]
        if missing:
            raise ConfigError(f"physical parameterization needs all of {PHYSICAL_KEYS}")
        cfg["gamma"] = fmt(
            dynamics.lamb_parameter(
                float(cfg["omega"]), float(cfg["radius"]),
                float(cfg["gravity"]), float(cfg["depth"]),
            )
        )
    return cfg


def parse_topography(spec: str, lmax: int) -> SpectralField | None:
    """Topography mini-language: none | zonal:AMP | file:PATH."""
    if spec == "none":
        return None
    if spec.startswith("zonal:"):
        amp = float(spec.split(":", 1)[1])
        bump = 1.5 * amp * z_squared_field(max(lmax, 2))
        bump.coeffs[0, 0] -= 0.5 * amp * np.sqrt(4.0 * np.pi)  # amp * P2(z)
        return bump.resized(lmax)
    if spec.startswith("file:"):
        field, _ = read_snapshot(spec.split(":", 1)[1])
        return field.resized(lmax)
    raise ConfigError(f"unknown topography spec {spec!r}")


def build_params(cfg: dict[str, str]) -> ModelParams:
    try:
        lmax = int(cfg["lmax"])
        return ModelParams(
            gamma=float(cfg["gamma"]),
            rossby=float(cfg["rossby"]),
            topography=parse_topography(cfg["topo"], lmax),
            lmax=lmax,
            dt=float(cfg["dt"]),
            t_end=float(cfg["t_end"]),
            output_every=int(cfg["output_every"]),
            cfl_constant=float(cfg["cfl"]),
            stability_mode=cfg["stability"],
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def initial_state(cfg: dict[str, str], p: ModelParams) -> SimState:
    kind = cfg["initial"]
    amplitude = float(cfg["amplitude"])
    if kind == "trade_wind":
        psi = amplitude * trade_wind(p.lmax)
    elif kind == "rossby_haurwitz":
        psi = dynamics.rossby_haurwitz(int(cfg["wave_l"]), int(cfg["wave_m"]),
                                       amplitude, p.lmax)
    elif kind == "random":
        psi = dynamics.random_stream_function(
            p.lmax, seed=int(cfg["seed"]),
            slope=float(cfg["spectrum_slope"]), amplitude=amplitude,
        )
    elif kind.startswith("file:"):
        psi, _ = read_snapshot(kind.split(":", 1)[1])
        psi = psi.resized(p.lmax)
    else:
        raise ConfigError(f"unknown initial condition {kind!r}")
    return SimState(q=dynamics.pv_from_stream(psi, p), t=0.0)


# ---------------------------------------------------------------------------
# File-writing sink for run()
# ---------------------------------------------------------------------------

class DirectorySink:
    """Writes snapshots and a diagnostics CSV into one output directory.

    The CSV is flushed after every row so that partial output survives an
    aborted run.
    """

    def __init__(self, outdir, p: ModelParams):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.p = p
        self._count = 0
        self._csv_file = open(self.outdir / "diagnostics.csv", "w", newline="")
        self._csv = csv.writer(self._csv_file)
        self._csv.writerow(Diagnostics.FIELDS)
        self._csv_file.flush()

    def emit_snapshot(self, state: SimState) -> None:
        step = int(round(state.t / self.p.dt))
        write_snapshot(self.outdir / f"snapshot_{step:08d}.gqgs", state.q, state.t)
        self._count += 1

    def emit_diagnostics(self, diag: Diagnostics) -> None:
        self._csv.writerow([fmt(v) for v in diag.as_row()])
        self._csv_file.flush()

    def close(self) -> None:
        self._csv_file.close()


def echo_config(cfg: dict[str, str], outdir) -> None:
    lines = [f"{key} = {cfg[key]}" for key in sorted(cfg)]
    (Path(outdir) / "config.resolved").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _load_direction(spec: str, lmax: int) -> SpectralField:
    if spec == "trade_wind":
        return trade_wind(lmax)
    if spec == "example":
        return example_direction(lmax)
    if spec == "zsq":
        return z_squared_field(max(lmax, 2))
    path = Path(spec)
    if path.exists():
        field, _ = read_snapshot(path)
        return field
    raise ConfigError(
        f"{spec!r} is neither a preset (trade_wind, example, zsq) nor a file"
    )


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    p = build_params(cfg)
    state = initial_state(cfg, p)
    sink = DirectorySink(args.out, p)
    echo_config(cfg, args.out)
    try:
        dynamics.run(state, p, sink)
    finally:
        sink.close()
    return 0


def cmd_mc(args) -> int:
    lmax = args.lmax
    f = _load_direction(args.f, lmax)
    g = _load_direction(args.g, lmax)
    p = ModelParams(
        gamma=args.gamma,
        rossby=args.rossby,
        topography=parse_topography(args.topo, lmax),
        lmax=max(lmax, 2),
    )
    report = curvature.mc_hat(
        ExtendedVector(f, a=1.0), ExtendedVector(g, a=0.0),
        phi=p.coriolis_potential, gamma=args.gamma,
    )
    if report.gamma_threshold is None:
        print("warning: degenerate direction ({z^2, g} pairing vanishes); "
              "rotation threshold undefined", file=sys.stderr)
    print(json.dumps(report.as_dict()))
    return 0


EXAMPLE_REFERENCE = (
    # quantity, reference value printed to the digits usually quoted
    ("bracket integral / (60^2 pi)", "0.4063"),
    ("rotation-weight integral / (60^2 pi)", "0.02309"),
    ("rotation threshold gamma*", "17.6"),
)


def example_quantities(lmax: int = 16) -> tuple[float, float, float]:
    """The worked trade-wind example, evaluated spectrally.

    Returns (bracket integral, rotation-weight integral, threshold), the two
    integrals in units of 60^2 pi.  Exact values are 128/315, 16/693 and
    their ratio 17.6.
    """
    zsq = z_squared_field(2).resized(lmax)
    g = example_direction(lmax)
    unit = 3600.0 * np.pi
    i1 = -curvature.mc_nu(zsq, g) / unit
    report = curvature.mc_hat(ExtendedVector(zsq), ExtendedVector(g),
                              phi=SpectralField.zeros(2), gamma=0.0)
    i2 = report.gamma_term / unit
    thr = curvature.gamma_threshold(g)
    return i1, i2, thr


def cmd_example(args) -> int:
    values = example_quantities()
    print(f"{'quantity':<40}{'computed':>12}{'reference':>12}{'rel.dev':>12}")
    for (label, ref), value in zip(EXAMPLE_REFERENCE, values):
        dev = (value - float(ref)) / float(ref)
        print(f"{label:<40}{value:>12.6f}{ref:>12}{dev:>12.2e}")
    return 0


def cmd_threshold_scan(args) -> int:
    t = trade_wind()
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("l", "m", "mc_nu", "gamma_term", "gamma_threshold"))
        for l in range(1, args.lmax + 1):
            for m in range(l + 1):
                g = dynamics.rossby_haurwitz(l, m, 1.0, l)
                report = curvature.mc_hat(ExtendedVector(t), ExtendedVector(g),
                                          phi=SpectralField.zeros(2), gamma=0.0)
                thr = ("degenerate" if report.gamma_threshold is None
                       else fmt(report.gamma_threshold))
                writer.writerow((l, m, fmt(report.mc_nu), fmt(report.gamma_term), thr))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gqgs",
        description="Global quasi-geostrophic spectral solver and curvature diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate the flow, writing files")
    p_run.add_argument("--config", required=True, help="flat key=value config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config's random seed")
    p_run.set_defaults(func=cmd_run)

    p_mc = sub.add_parser("mc", help="print one criterion report as JSON")
    p_mc.add_argument("--f", required=True, help="stationary stream function (preset or file)")
    p_mc.add_argument("--g", required=True, help="perturbation direction (preset or file)")
    p_mc.add_argument("--gamma", type=float, default=0.0, help="Lamb parameter")
    p_mc.add_argument("--rossby", type=float, default=np.inf, help="Rossby number")
    p_mc.add_argument("--topo", default="none", help="none | zonal:AMP | file:PATH")
    p_mc.add_argument("--lmax", type=int, default=16, help="truncation for file/preset fields")
    p_mc.set_defaults(func=cmd_mc)

    p_ex = sub.add_parser("example", help="reproduce the built-in worked example")
    p_ex.set_defaults(func=cmd_example)

    p_scan = sub.add_parser("threshold-scan",
                            help="rotation thresholds over harmonic directions")
    p_scan.add_argument("--lmax", type=int, default=8, help="largest scanned degree")
    p_scan.add_argument("--out", required=True, help="output CSV path")
    p_scan.set_defaults(func=cmd_threshold_scan)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SingularOperator, GridTooSmall, RealityViolated, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except dynamics.UnstableStep as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
