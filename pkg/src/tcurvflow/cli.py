"""Command-line surface: flow, shadow, spectrum, morse, bubble, verify."""

from __future__ import annotations

import json
import math
import os
import sys

import click
import numpy as np

from .beckner import boundary_eigenvalue
from .curvature import boundary_energy, conformal_volume_element, t_curvature
from .flow import run as run_flow
from .harmonics import SpectralField, VOL_S3, get_basis, laplace_eigenvalue
from .io import (
    ConfigError,
    RunConfig,
    build_run_config,
    emit_diagnostics,
    emit_shadow_csv,
    load_snapshot,
    read_config_file,
    save_snapshot,
)
from .mobius import MobiusParameter, bubble
from .morse import MorseDatum, extract_morse_data, gate_report
from .presets import from_spec
from .shadow import ShadowState, integrate_shadow
from .verify import CRITERIA, run_suite


def _common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="key=value config file"),
        click.option("--f", "f_spec", default=None,
                     help="prescribed function preset, e.g. const2 or axial(0.3)"),
        click.option("--K", "K", type=int, default=None, help="band limit"),
        click.option("--dt", type=float, default=None),
        click.option("--t-max", "t_max", type=float, default=None),
        click.option("--tol-converged", "tol_converged", type=float, default=None),
        click.option("--eps-min", "eps_min", type=float, default=None),
        click.option("--oversample", type=int, default=None),
        click.option("--sigma-mode", "sigma_mode", default=None),
        click.option("--seed", type=int, default=None),
        click.option("--n-diag", "n_diag", type=int, default=None),
        click.option("--out", "output_dir", default=None,
                     help="output directory (env TCURVFLOW_OUTDIR overrides default)"),
        click.option("--formats", default=None, help="comma list from csv,json"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(mode, config_path, **cli_values) -> RunConfig:
    try:
        file_values = read_config_file(config_path) if config_path else {}
        return build_run_config(file_values, mode=mode, **cli_values)
    except ConfigError as exc:
        raise click.UsageError(str(exc))


def _initial_field(w0_spec: str, cfg: RunConfig, basis) -> SpectralField:
    if w0_spec == "zero":
        return SpectralField.zeros(cfg.flow.K)
    if w0_spec.startswith("bubble:"):
        parts = w0_spec.split(":", 1)[1].split(",")
        if len(parts) != 5:
            raise click.UsageError("expected bubble:p1,p2,p3,p4,eps")
        p = np.array([float(x) for x in parts[:4]])
        p /= np.linalg.norm(p)
        return bubble(MobiusParameter(p, float(parts[4])), basis, K=cfg.flow.K)
    w, _, _ = load_snapshot(w0_spec)
    return w


@click.group()
def main():
    """Spectral laboratory for the boundary curvature flow on the 3-sphere."""


@main.command("flow")
@_common_options
@click.option("--w0", "w0_spec", default="zero",
              help="initial factor: zero, bubble:p1,p2,p3,p4,eps, or a snapshot path")
def flow_cmd(config_path, w0_spec, **cli_values):
    """Integrate the curvature flow and write diagnostics/snapshots."""
    cfg = _build_config("flow", config_path, **cli_values)
    basis = get_basis(cfg.flow.K_design)
    f = from_spec(cfg.f_spec, basis)
    w0 = _initial_field(w0_spec, cfg, basis)
    records, outcome, final = run_flow(w0, f, cfg.flow)
    os.makedirs(cfg.output_dir, exist_ok=True)
    if "csv" in cfg.formats:
        emit_diagnostics(records, os.path.join(cfg.output_dir, "diagnostics.csv"))
    if "json" in cfg.formats:
        save_snapshot(os.path.join(cfg.output_dir, "final_state.json"),
                      final.w, final.t, cfg, basis.grid.resolution)
    click.echo(f"outcome: {outcome.kind} at t = {outcome.t:.6g} "
               f"({len(records)} records)")
    if outcome.p is not None:
        click.echo(f"concentration estimate: p = {np.array2string(outcome.p, precision=6)}, "
                   f"eps = {outcome.eps:.6g}")


@main.command("shadow")
@_common_options
@click.option("--p", "p_spec", default="0,0,0,1", help="initial point p1,p2,p3,p4")
@click.option("--eps", type=float, default=0.3)
@click.option("--horizon", type=float, default=10.0)
def shadow_cmd(config_path, p_spec, eps, horizon, **cli_values):
    """Integrate the concentration-coordinate ODE."""
    cfg = _build_config("shadow", config_path, **cli_values)
    basis = get_basis(cfg.flow.K_design)
    f = from_spec(cfg.f_spec, basis)
    p = np.array([float(x) for x in p_spec.split(",")])
    p /= np.linalg.norm(p)
    traj = integrate_shadow(ShadowState(p, eps), f, basis,
                            horizon=horizon, dt=cfg.flow.dt)
    os.makedirs(cfg.output_dir, exist_ok=True)
    emit_shadow_csv(traj, os.path.join(cfg.output_dir, "shadow.csv"))
    end = traj.states[-1]
    click.echo(f"{len(traj.states)} states, truncated={traj.truncated}, "
               f"end p = {np.array2string(end.p, precision=6)}, eps = {end.eps:.6g}")


@main.command("spectrum")
@click.option("--K", "K", type=int, default=16)
def spectrum_cmd(K):
    """Print the boundary-operator spectrum k(k+1)(k+2) with multiplicities."""
    worst = 0.0
    click.echo(f"{'k':>4} {'eigenvalue':>14} {'multiplicity':>13} {'rel_err':>10}")
    for k in range(K + 1):
        lam = laplace_eigenvalue(k)
        direct = math.sqrt(lam + 1.0) * lam
        target = boundary_eigenvalue(k)
        rel = abs(direct - target) / target if target else 0.0
        worst = max(worst, rel)
        click.echo(f"{k:>4} {target:>14.1f} {(k + 1) ** 2:>13} {rel:>10.2e}")
    click.echo(f"max relative error: {worst:.3e}")


@main.command("morse")
@_common_options
@click.option("--data", "data_path", type=click.Path(exists=True), default=None,
              help="JSON list of {morse_index, laplacian_negative, value} records")
def morse_cmd(config_path, data_path, **cli_values):
    """Evaluate the Morse existence gate, from data or from a preset f."""
    cfg = _build_config("morse", config_path, **cli_values)
    if data_path:
        with open(data_path) as fh:
            raw = json.load(fh)
        data = [MorseDatum(int(d["morse_index"]), bool(d["laplacian_negative"]),
                           float(d.get("value", 1.0))) for d in raw]
    else:
        basis = get_basis(cfg.flow.K_design)
        f = from_spec(cfg.f_spec, basis)
        data = extract_morse_data(f, basis)
    rep = gate_report(data)
    doc = {
        "m": list(rep.m),
        "feasible": rep.feasible,
        "witness": list(rep.witness) if rep.witness else None,
        "degree_sum": rep.degree_sum,
        "theorem_existence": rep.theorem_existence,
        "corollary_existence": rep.corollary_existence,
        "critical_values": sorted(d.value for d in data),
        # energy sublevel thresholds attached to the critical values
        "beta_levels": [-(16 * math.pi**2 / 3) * math.log(v)
                        for v in sorted(d.value for d in data)],
    }
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = os.path.join(cfg.output_dir, "morse_report.json")
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1)
    click.echo(json.dumps(doc, indent=1))
    vals = doc["critical_values"]
    if len(set(vals)) != len(vals):
        click.echo("warning: critical values are not all distinct", err=True)


@main.command("bubble")
@_common_options
@click.option("--p", "p_spec", default="0,0,0,1")
@click.option("--eps", type=float, default=0.5)
def bubble_cmd(config_path, p_spec, eps, **cli_values):
    """Write a bubble snapshot and print its invariant checks."""
    cfg = _build_config("bubble", config_path, **cli_values)
    basis = get_basis(cfg.flow.K_design)
    p = np.array([float(x) for x in p_spec.split(",")])
    p /= np.linalg.norm(p)
    w = bubble(MobiusParameter(p, eps), basis, K=cfg.flow.K)
    vol = basis.integrate(conformal_volume_element(w, basis))
    t_err = float(np.abs(t_curvature(w, basis).values - 2.0).max())
    os.makedirs(cfg.output_dir, exist_ok=True)
    save_snapshot(os.path.join(cfg.output_dir, "bubble.json"),
                  w, 0.0, cfg, basis.grid.resolution)
    click.echo(f"volume rel err: {abs(vol - VOL_S3) / VOL_S3:.3e}")
    click.echo(f"sup |T - 2|:    {t_err:.3e}")
    click.echo(f"energy:         {boundary_energy(w):.3e}")


@main.command("verify")
@click.option("--only", multiple=True,
              type=click.Choice(sorted(CRITERIA)), help="run a subset")
@click.option("--inject-fault", "fault", type=click.Choice(["spectrum"]),
              default=None, help="negative control: force a known failure")
@click.pass_context
def verify_cmd(ctx, only, fault):
    """Run the acceptance battery and print a verdict per criterion."""
    if list(only) == ["spectrum"]:
        ctx.invoke(spectrum_cmd, K=16)  # the table behind the verdict
    results = run_suite(list(only) or None, fault=fault)
    failed = [r.name for r in results if not r.passed]
    if failed:
        click.echo(f"FAILED: {', '.join(failed)}")
        sys.exit(1)
    click.echo("all criteria passed")


if __name__ == "__main__":
    main()
