"""Run configuration, snapshots, and machine-readable outputs.

All floating-point text is written with 17 significant digits so that
decimal round-trips reproduce the binary values exactly; snapshots store
coefficients with explicit (degree, intra-degree) indices for diffability.
File writes are atomic (write to a temp file, then rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field, fields

from . import __version__
from .flow import DiagnosticsRecord, FlowConfig
from .harmonics import SpectralField, coeff_count, degree_offset, unpack_ell

CSV_HEADER = ("t,alpha,E_f,E,volume,F2,G2,b1,b2,b3,b4,"
              "S1,S2,S3,S4,p1,p2,p3,p4,eps,dt_used")

MODES = ("flow", "shadow", "spectrum", "morse", "bubble", "verify")
FORMATS = ("csv", "json")

OUTPUT_DIR_ENV = "TCURVFLOW_OUTDIR"


class ConfigError(ValueError):
    """Invalid or conflicting run configuration."""


@dataclass
class RunConfig:
    mode: str = "flow"
    flow: FlowConfig = field(default_factory=FlowConfig)
    f_spec: str = "const2"
    output_dir: str = "."
    formats: tuple[str, ...] = ("csv", "json")

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        bad = [fmt for fmt in self.formats if fmt not in FORMATS]
        if bad:
            raise ConfigError(f"unknown formats: {bad}")


_FLOW_KEYS = {f.name: f.type for f in fields(FlowConfig)}
_INT_KEYS = {"K", "oversample", "seed", "n_diag"}


def _coerce_flow_value(key: str, raw: str):
    if key == "sigma_mode":
        return raw
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def read_config_file(path: str) -> dict:
    """Flat key=value text; blank lines and #-comments ignored."""
    values = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
    return values


def build_run_config(file_values: dict | None = None, **cli_values) -> RunConfig:
    """Merge config-file values with CLI overrides (CLI wins).

    Unknown keys are rejected with the offending key named.
    """
    merged = dict(file_values or {})
    for key, val in cli_values.items():
        if val is not None:
            merged[key] = val

    flow_kwargs = {}
    top = {}
    for key, raw in merged.items():
        if key in _FLOW_KEYS:
            try:
                flow_kwargs[key] = (_coerce_flow_value(key, raw)
                                    if isinstance(raw, str) else raw)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key}: {raw!r}") from exc
        elif key in ("mode", "f_spec", "output_dir"):
            top[key] = raw
        elif key == "formats":
            top["formats"] = tuple(raw.split(",")) if isinstance(raw, str) else tuple(raw)
        else:
            raise ConfigError(f"unknown configuration key: {key!r}")

    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir and "output_dir" not in top:
        top["output_dir"] = env_dir

    try:
        flow = FlowConfig(**flow_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(flow=flow, **top)


def config_hash(cfg: RunConfig) -> str:
    payload = {
        "mode": cfg.mode,
        "f_spec": cfg.f_spec,
        "flow": {f.name: getattr(cfg.flow, f.name) for f in fields(FlowConfig)},
    }
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


# -- formatting ----------------------------------------------------------


def _fmt(x: float | None) -> str:
    return "" if x is None else format(float(x), ".17g")


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_diagnostics(records: list[DiagnosticsRecord], path: str) -> None:
    """CSV with one row per record; empty cells where (p, eps, b) is absent."""
    lines = [CSV_HEADER]
    for r in records:
        b = r.b if r.b is not None else [None] * 4
        p = r.p if r.p is not None else [None] * 4
        cells = ([r.t, r.alpha, r.E_f, r.E, r.volume, r.F2, r.G2]
                 + list(b) + list(r.S) + list(p) + [r.eps, r.dt_used])
        lines.append(",".join(_fmt(c) for c in cells))
    try:
        _atomic_write(path, "\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write diagnostics to {path}: {exc}") from exc


def emit_shadow_csv(traj, path: str) -> None:
    """Shadow trajectory in the diagnostics column subset t, p*, eps."""
    lines = ["t,p1,p2,p3,p4,eps"]
    for s in traj.states:
        lines.append(",".join(_fmt(c) for c in [s.t, *s.p, s.eps]))
    _atomic_write(path, "\n".join(lines) + "\n")


# -- snapshots -----------------------------------------------------------


def save_snapshot(path: str, w: SpectralField, t: float, cfg: RunConfig,
                  grid_resolution: tuple[int, int, int]) -> None:
    """JSON snapshot: header plus coefficients in (k, ell) order."""
    ks, ells, vals = [], [], []
    for k in range(w.K + 1):
        off = degree_offset(k)
        for ell in range(1, (k + 1) ** 2 + 1):
            ks.append(k)
            ells.append(ell)
            vals.append(_fmt(w.coeffs[off + ell - 1]))
    doc = {
        "header": {
            "band_limit": w.K,
            "grid_resolution": list(grid_resolution),
            "time": _fmt(t),
            "config_hash": config_hash(cfg),
            "tool_version": __version__,
        },
        "coefficients": [[k, ell, v] for k, ell, v in zip(ks, ells, vals)],
    }
    _atomic_write(path, json.dumps(doc, indent=1))


def load_snapshot(path: str) -> tuple[SpectralField, float, dict]:
    """Inverse of save_snapshot; bit-exact on the coefficients and time."""
    with open(path) as fh:
        doc = json.load(fh)
    header = doc["header"]
    K = int(header["band_limit"])
    w = SpectralField.zeros(K)
    seen = 0
    for k, ell, val in doc["coefficients"]:
        if not (0 <= k <= K and 1 <= ell <= (k + 1) ** 2):
            raise ValueError(f"snapshot index out of range: ({k}, {ell})")
        unpack_ell(ell)  # validates ell decode
        w.coeffs[degree_offset(k) + ell - 1] = float(val)
        seen += 1
    if seen != coeff_count(K):
        raise ValueError(f"snapshot has {seen} coefficients, "
                         f"expected {coeff_count(K)} for K={K}")
    return w, float(header["time"]), header
