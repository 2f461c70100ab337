"""Command-line front end.

Every subcommand reads a flat configuration (``--config PATH`` plus any
number of ``--set key=value`` overrides), writes CSV tables and DPMF arrays
into ``io.outdir`` and finishes with a ``manifest.json`` that echoes the
configuration, the package version and the wall time.

Exit codes: 0 on success, 2 when the configuration or the input data are
invalid, 3 when a numerical step fails or an iteration does not converge.
With exit code 3 the tables computed so far and the manifest are still
written.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import dpmf
from . import grid as gc
from . import inversion as inv
from . import observables as ob
from . import response as rs
from .config import SCHEMA, RunConfig
from .errors import (ConfigError, DegenerateWeight, IncompatibleRHS, NumericalFailure)
from .functionals import RadialDensity, lda_components, lda_scaling_check, uniform_ball
from .functionals import hartree_potential
from .grid import Grid, build_grid
from .hamiltonian import HamiltonianSpec, SoftCore, ground_state, spectrum
from .propagator import (PotentialTrajectory, TimeGrid, propagate_stepwise_static,
                         sobolev_growth_bound)
from .sturm_liouville import SLProblem, lowest_eigenvalue
from .wavefunction import SYMMETRIC, WaveFunction, build_two_particle, normalize, sobolev_norm

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class _Unconverged(Exception):
    """Raised after the outputs of a non-converged run have been written."""


# ---------------------------------------------------------------- output


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class Run:
    """Output directory bookkeeping for one command invocation."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.outdir = Path(cfg["io.outdir"])
        self.files: list[str] = []
        self.summary: list[tuple[str, object]] = []

    def path(self, name: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return self.outdir / name

    def csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        return p

    def table(self, name: str, pairs) -> Path:
        return self.csv(name, ("quantity", "value"), pairs)

    def array(self, name: str, values) -> Path:
        p = self.path(name)
        dpmf.write(p, values)
        return p

    def plot(self, name: str, draw, *args, **kwargs) -> None:
        if not self.cfg["io.plots"]:
            return
        from . import plotting
        getattr(plotting, draw)(self.path(name), *args, **kwargs)

    def note(self, key: str, value) -> None:
        self.summary.append((key, value))

    def manifest(self, status: str, code: int, message: str, wall: float) -> None:
        info = {
            "command": self.command,
            "version": __version__,
            "status": status,
            "exit_code": code,
            "message": message,
            "wall_time_s": round(wall, 6),
            "threads": os.environ.get("DENSMAP_THREADS", "1"),
            "files": sorted(set(self.files)),
            "summary": {k: _json_safe(v) for k, v in self.summary},
            "config": {k: _json_safe(self.cfg[k]) for k in sorted(self.cfg)},
        }
        self.outdir.mkdir(parents=True, exist_ok=True)
        with open(self.outdir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(info, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _json_safe(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


# ---------------------------------------------------------------- builders


def make_grid(cfg: RunConfig) -> Grid:
    return build_grid(cfg["grid.L"], cfg["grid.M"], cfg["grid.boundary"], cfg["grid.origin"])


def _wavenumber(cfg: RunConfig, k: int) -> float:
    return 2.0 * np.pi * k / cfg["grid.L"]


def _read_array(path: str, shape: tuple, what: str) -> np.ndarray:
    if not path:
        raise ConfigError(f"{what} needs a file path")
    try:
        arr = dpmf.read(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} from {path}: {exc}") from exc
    if arr.shape != shape:
        raise ConfigError(f"{what} in {path} has shape {arr.shape}, expected {shape}")
    return arr


def static_potential(cfg: RunConfig, g: Grid) -> np.ndarray:
    form = cfg["potential.form"]
    if form == "zero":
        return np.zeros(g.M)
    if form == "cos":
        kx = _wavenumber(cfg, cfg["potential.k"]) * (g.x - g.origin)
        return cfg["potential.amplitude"] * np.cos(kx)
    if form == "harmonic":
        return 0.5 * cfg["potential.omega"] ** 2 * (g.x - cfg["potential.center"]) ** 2
    return np.real(_read_array(cfg["potential.file"], (g.M,), "static potential"))


def drive(cfg: RunConfig, g: Grid):
    """Time-dependent part ``f(t, x)`` added to the static potential."""
    form = cfg["drive.form"]
    A, w = cfg["drive.amplitude"], cfg["drive.omega"]
    kx = _wavenumber(cfg, cfg["drive.k"]) * (g.x - g.origin)
    if form == "none":
        return lambda t, x: np.zeros_like(x)
    if form == "sin_cos":
        return lambda t, x: A * np.sin(w * t) * np.cos(kx)
    if form == "sin_sin":
        return lambda t, x: A * np.sin(w * t) * np.sin(kx)
    if form == "linear_cos":
        return lambda t, x: A * t * np.cos(kx)
    centre = g.origin + 0.5 * g.L
    return lambda t, x: A * np.sin(w * t) * (x - centre)


def make_spec(cfg: RunConfig, g: Grid) -> HamiltonianSpec:
    lam = cfg["interaction.strength"]
    inter = SoftCore(lam, cfg["interaction.softening"]) if lam > 0 else None
    return HamiltonianSpec(g, static_potential(cfg, g), inter, cfg["particles.N"])


def make_time(cfg: RunConfig) -> TimeGrid:
    return TimeGrid(cfg["time.T"], cfg["time.steps"])


def make_potential(cfg: RunConfig, spec: HamiltonianSpec, tg: TimeGrid) -> PotentialTrajectory:
    f = drive(cfg, spec.grid)
    vs = spec.v_static
    return PotentialTrajectory.from_function(lambda t, x: vs + f(t, x), spec.grid, tg)


def initial_state(cfg: RunConfig, spec: HamiltonianSpec) -> WaveFunction:
    g = spec.grid
    form = cfg["state.form"]
    sym = SYMMETRIC if spec.n_particles == 2 else None
    if form == "ground":
        return ground_state(spec, sym)
    if form == "file":
        vals = _read_array(cfg["state.file"], spec.shape, "initial state")
        return normalize(WaveFunction(vals.astype(complex), g, sym or "none"))
    if form == "constant":
        orb = WaveFunction(np.ones(g.M, dtype=complex), g)
    else:
        s, x0, k0 = cfg["state.sigma"], cfg["state.x0"], cfg["state.k0"]
        orb = WaveFunction(np.exp(-((g.x - x0) ** 2) / (2 * s * s) + 1j * k0 * g.x), g)
    orb = normalize(orb)
    if spec.n_particles == 2:
        return build_two_particle(orb, orb, SYMMETRIC)
    return orb


def resolve_cutoff(cfg: RunConfig, g: Grid):
    c = cfg["inversion.cutoff"]
    return max(1, g.M // 16) if c == "auto" else c


def _target(cfg: RunConfig, spec, psi0, tg):
    """Target density (from file or generated) and the generating potential if known."""
    g = spec.grid
    path = cfg["inversion.target_file"]
    if path:
        vals = np.real(_read_array(path, (tg.n_nodes, g.M), "target density"))
        return ob.DensityTrajectory(vals, g, tg.times, spec.n_particles), None
    v_star = make_potential(cfg, spec, tg)
    traj = propagate_stepwise_static(psi0, v_star, spec)
    return ob.density_trajectory(traj), v_star


def _write_rho(run: Run, rho: inv.RhoReport, times, extra=()) -> None:
    run.table("rho_verdict.csv", [
        ("max_l1", rho.max_l1), ("rho0_l1", rho.rho0_l1), ("dt_rho0_l1", rho.dt_rho0_l1),
        ("max_abs_integral", rho.max_abs_integral), *extra])
    run.csv("rho_series.csv", ("t", "rho_l1"), zip(times, rho.l1_series))
    run.plot("rho_series.png", "line_plot", times, {"||rho||_1": rho.l1_series},
             "t", "||n[v] - n||_1", logy=True)


def _error_series(v, v_ref, g: Grid) -> np.ndarray:
    return gc.l2_norm(inv.mean_removed(v - v_ref), g, 1)


# ---------------------------------------------------------------- commands


def cmd_propagate(run: Run):
    cfg = run.cfg
    g = make_grid(cfg)
    spec = make_spec(cfg, g)
    tg = make_time(cfg)
    psi0 = initial_state(cfg, spec)
    v = make_potential(cfg, spec, tg)
    traj = propagate_stepwise_static(psi0, v, spec)
    norms = traj.norms()
    cont = np.abs(ob.continuity_residuals(traj)).max(axis=1)
    n = ob.density_trajectory(traj)
    run.csv("norm.csv", ("t", "norm"), zip(tg.times, norms))
    mids = 0.5 * (tg.times[1:] + tg.times[:-1])
    run.csv("continuity.csv", ("t_mid", "max_abs_residual"), zip(mids, cont))
    run.array("density.dpmf", n.values)
    run.array("wavefunction_final.dpmf", traj.states[-1])
    run.plot("norm.png", "line_plot", tg.times, {"|norm - 1|": np.abs(norms - 1)},
             "t", "|norm - 1|", logy=True)
    run.plot("density.png", "field_map", tg.times, g.x, n.values, label="n(t, x)")
    dev = float(np.max(np.abs(norms - 1)))
    run.note("max_norm_deviation", dev)
    run.note("max_continuity_residual", float(cont.max()))
    if dev > 1e-8:
        raise NumericalFailure(f"norm drifted by {dev:.3e}")


def cmd_spectrum(run: Run):
    cfg = run.cfg
    spec = make_spec(cfg, make_grid(cfg))
    K = min(cfg["spectrum.K"], spec.dim)
    dec = spectrum(spec, K, SYMMETRIC if spec.n_particles == 2 else None)
    run.csv("spectrum.csv", ("k", "eigenvalue"), enumerate(dec.values))
    run.array("eigenvectors.dpmf", dec.vectors)
    run.plot("spectrum.png", "line_plot", np.arange(dec.count), {"eigenvalue": dec.values},
             "k", "eigenvalue (hartree)", markers=True)
    run.note("ground_energy", float(dec.values[0]))


def _inversion_setup(cfg: RunConfig):
    g = make_grid(cfg)
    spec = make_spec(cfg, g)
    tg = make_time(cfg)
    psi0 = initial_state(cfg, spec)
    n, v_star = _target(cfg, spec, psi0, tg)
    return g, spec, tg, psi0, n, v_star


def cmd_invert_fp(run: Run):
    cfg = run.cfg
    g, spec, tg, psi0, n, v_star = _inversion_setup(cfg)
    v0 = PotentialTrajectory.static(spec.v_static, g, tg) if cfg["inversion.v0"] == "static" else None
    icfg = inv.InversionConfig(v0=v0, alpha=cfg["inversion.alpha"], tol_v=cfg["inversion.tol_v"],
                               max_iter=cfg["inversion.max_iter"], window=cfg["inversion.window"],
                               degeneracy=cfg["inversion.degeneracy"],
                               workers=inv.default_workers(), cutoff=resolve_cutoff(cfg, g))
    v, rep = inv.invert_fixed_point(n, psi0, spec, icfg)
    run.array("v_recovered.dpmf", v.values)
    run.csv("report.csv", ("iter", "residual", "ratio"), rep.rows())
    extra = [("converged", rep.converged), ("iterations", rep.iterations),
             ("xi_hat", rep.xi_hat), ("first_step_bound", rep.first_step_bound),
             ("balance_residual", rep.balance_residual)]
    if v_star is not None:
        err = inv.relative_error(v.values, v_star.values, g)
        extra.append(("relative_error", err))
        run.note("relative_error", err)
    if rep.rho is not None:
        _write_rho(run, rep.rho, tg.times, extra)
    if rep.residuals:
        run.plot("report.png", "line_plot", np.arange(rep.iterations), {"residual": rep.residuals},
                 "iteration", "sup_t ||v_{i+1} - v_i||", logy=True, markers=True)
    run.note("iterations", rep.iterations)
    if not rep.converged:
        raise _Unconverged(rep.message or "fixed-point iteration did not converge")


def cmd_invert_hj(run: Run):
    cfg = run.cfg
    g, spec, tg, psi0, n, v_star = _inversion_setup(cfg)
    if spec.n_particles != 1:
        raise ConfigError("invert-hj needs particles.N = 1")
    S0 = np.angle(psi0.values) if g.periodic else None
    v = inv.invert_single_particle_hj(n, S0)
    run.array("v_hj.dpmf", v.values)
    rows = []
    if v_star is not None:
        err = _error_series(v.values, v_star.values, g)
        run.csv("error.csv", ("t", "error_l2"), zip(tg.times, err))
        run.plot("error.png", "line_plot", tg.times, {"HJ": err}, "t",
                 "||v - v*||_2 (mean removed)", logy=True)
        rel = inv.relative_error(v.values, v_star.values, g)
        rows.append(("relative_error", rel))
        run.note("relative_error", rel)
    rho = inv.verify_rho_problem(v, n, psi0, spec)
    _write_rho(run, rho, tg.times, rows)


def cmd_invert_taylor(run: Run):
    cfg = run.cfg
    g = make_grid(cfg)
    spec = make_spec(cfg, g)
    if spec.n_particles != 1:
        raise ConfigError("invert-taylor needs particles.N = 1")
    psi0 = initial_state(cfg, spec)
    K = cfg["inversion.taylor_order"]
    f = drive(cfg, g)
    vs = spec.v_static
    coeffs = inv.density_taylor_coefficients(psi0, lambda t, x: vs + f(t, x), spec, K + 2,
                                             h=cfg["inversion.taylor_h"])
    res = inv.invert_taylor_rg(coeffs, psi0, spec, K)
    run.array("v_taylor.dpmf", res.coefficients)
    norms = gc.l2_norm(res.coefficients, g, 1)
    run.csv("taylor.csv", ("k", "l2_norm", "scaled_norm", "balance_residual"),
            zip(range(K + 1), norms, res.scaled_norms, res.balance_residuals))
    run.plot("taylor.png", "line_plot", np.arange(K + 1), {"||v^(k)|| / k!": res.scaled_norms},
             "k", "scaled norm", logy=True, markers=True)
    run.note("radius_estimate", res.radius_estimate)


def cmd_invert_ks(run: Run):
    cfg = run.cfg
    g, spec, tg, psi0, n, v_star = _inversion_setup(cfg)
    if spec.n_particles != 2:
        raise ConfigError("invert-ks needs particles.N = 2")
    v_ks = inv.construct_ks_potential(n)
    run.array("v_ks.dpmf", v_ks.values)
    orbital = WaveFunction(np.sqrt(0.5 * n.values[0]).astype(complex), g)
    spec1 = HamiltonianSpec(g, spec.v_static)
    traj = propagate_stepwise_static(orbital, v_ks, spec1)
    dn = np.sum(np.abs(2.0 * ob.density_trajectory(traj).values - n.values), axis=1) * g.dx
    cols = [tg.times, dn]
    header = ["t", "density_gap_l1"]
    if v_star is not None:
        header.append("gap_to_external")
        cols.append(_error_series(v_ks.values, v_star.values, g))
    run.csv("ks.csv", header, zip(*cols))
    run.plot("ks.png", "line_plot", tg.times, {"||2|phi|^2 - n||_1": dn}, "t",
             "density gap", logy=True)
    run.note("max_density_gap_l1", float(dn.max()))


def cmd_verify_rho(run: Run):
    cfg = run.cfg
    g, spec, tg, psi0, n, v_star = _inversion_setup(cfg)
    path = cfg["inversion.v_file"]
    if path:
        v = PotentialTrajectory(np.real(_read_array(path, (tg.n_nodes, g.M), "potential")), g, tg)
    elif v_star is not None:
        v = v_star
    else:
        raise ConfigError("verify-rho needs inversion.v_file when the target is read from file")
    rho = inv.verify_rho_problem(v, n, psi0, spec)
    _write_rho(run, rho, tg.times)
    run.note("max_l1", rho.max_l1)


def cmd_respond(run: Run):
    cfg = run.cfg
    g = make_grid(cfg)
    spec = make_spec(cfg, g)
    K = cfg["response.K"]
    y = cfg["response.y"]
    y = g.M // 4 if y is None else y
    if not 0 <= y < g.M:
        raise ConfigError(f"response.y must lie in [0, {g.M - 1}]")
    dec = spectrum(spec, min(K + 1, spec.dim), SYMMETRIC if spec.n_particles == 2 else None)
    prof = rs.lehmann_profile(spec, K, y, cfg["response.gamma"], decomposition=dec)
    run.csv("excitations.csv", ("k", "omega"), enumerate(prof.excitations, start=1))
    run.csv("lehmann.csv", ("omega", "integrated_magnitude", "re_chi_yy", "im_chi_yy"),
            zip(prof.omegas, prof.magnitude, prof.column[:, y].real, prof.column[:, y].imag))
    run.array("chi_column.dpmf", prof.column)
    run.plot("lehmann.png", "line_plot", prof.omegas, {"int |chi|": prof.magnitude},
             "omega (hartree)", "integrated |chi|", logy=True)
    kt = TimeGrid(cfg["response.T"], cfg["response.steps"])
    dn = rs.kick_response(spec, y, kt, cfg["response.kappa"], psi0=ground_state(
        spec, SYMMETRIC if spec.n_particles == 2 else None))
    run.csv("kick.csv", ("t", "dn_y"), zip(kt.times, dn[:, y]))
    run.plot("kick.png", "line_plot", kt.times, {"dn(t, y) / kappa": dn[:, y]}, "t",
             "density change")
    window = 1.5 * prof.excitations[min(1, K - 1)]
    w_kick = rs.dominant_frequency(dn[:, y], kt.dt, omega_max=window)
    run.table("response.csv", [("lehmann_peak", prof.peak()),
                               ("omega_1", prof.excitations[0]),
                               ("kick_frequency", w_kick)])
    run.note("lehmann_peak", prof.peak())
    run.note("kick_frequency", w_kick)


def cmd_functionals(run: Run):
    cfg = run.cfg
    if cfg["density.form"] == "uniform_ball":
        n = uniform_ball(cfg["density.R"], cfg["density.N"], cfg["density.h"],
                         cfg["density.rmax"])
    else:
        path = cfg["density.file"]
        if not path:
            raise ConfigError("density.form = file needs density.file")
        vals = np.real(dpmf.read(path))
        if vals.ndim != 1:
            raise ConfigError("radial density file must hold a rank-1 array")
        n = RadialDensity(cfg["density.h"], vals)
    comp = lda_components(n)
    run.table("components.csv", list(comp.as_dict().items()) + [("N", n.particle_number())])
    sc = lda_scaling_check(n, cfg["density.scale"])
    run.csv("scaling.csv", ("component", "ratio", "expected", "relative_deviation"),
            [(k, sc.ratios[k], sc.expected[k], abs(sc.ratios[k] / sc.expected[k] - 1))
             for k in sc.ratios])
    vh = hartree_potential(n)
    run.csv("radial.csv", ("r", "n", "v_hartree"), zip(n.r, n.values, vh))
    run.plot("radial.png", "line_plot", n.r, {"n(r)": n.values, "v_H(r)": vh}, "r", "value")
    run.note("V_H", comp.V_H)


def cmd_diagnose(run: Run):
    cfg = run.cfg
    g = make_grid(cfg)
    spec = make_spec(cfg, g)
    tg = make_time(cfg)
    psi0 = initial_state(cfg, spec)
    v = make_potential(cfg, spec, tg)
    n0 = ob.density(psi0)
    wr = ob.weight_diagnostics(n0, g, cfg["diagnose.s"], psi0)
    rows = [("inverse_power_integral", wr.inverse_power_integral),
            ("weizsacker", wr.weizsacker),
            ("refinement_ratio", wr.refinement_ratio),
            ("refinement_unstable", wr.refinement_unstable),
            ("weizsacker_bound_ok", wr.weizsacker_bound_ok)]
    try:
        lam = lowest_eigenvalue(SLProblem(n0, np.zeros(g.M), g))
    except DegenerateWeight:
        lam = float("nan")
    rows.append(("lambda_1", lam))
    if cfg["state.form"] == "ground" and spec.n_particles == 1:
        q = ob.internal_force_q(psi0, spec)
        resid = q + ob.force_divergence(n0, spec.v_static, g)
        rows.append(("stationary_q_residual", gc.l2_norm(resid, g)))
    traj = propagate_stepwise_static(psi0, v, spec)
    fb = ob.global_force_balance(traj, v)
    rows.append(("force_balance_gap", fb.max_gap))
    rows.append(("force_balance_flagged", fb.flagged))
    h2 = np.array([sobolev_norm(traj.state(i), 2) for i in range(traj.n_nodes)])
    bound = sobolev_growth_bound(psi0, v)
    rows.append(("sobolev_max_ratio", float(np.max(h2 / bound))))
    rows.append(("lipschitz_constant", v.lipschitz_constant()))
    run.table("diagnostics.csv", rows)
    run.csv("force.csv", ("t", "F_pot", "F_newton"), zip(fb.times, fb.F_pot, fb.F_newton))
    run.csv("sobolev.csv", ("t", "h2_norm", "bound"), zip(tg.times, h2, bound))
    run.plot("force.png", "line_plot", fb.times, {"F_pot": fb.F_pot, "F_newton": fb.F_newton},
             "t", "net force")
    run.plot("sobolev.png", "line_plot", tg.times, {"||psi||_H2": h2, "bound": bound},
             "t", "H2 norm", logy=True)


COMMANDS = {
    "propagate": (cmd_propagate, "evolve the initial state and record norm, continuity and density"),
    "spectrum": (cmd_spectrum, "lowest eigenpairs of the static Hamiltonian"),
    "invert-fp": (cmd_invert_fp, "fixed-point inversion of a target density"),
    "invert-hj": (cmd_invert_hj, "single-particle inversion through the polar form"),
    "invert-taylor": (cmd_invert_taylor, "Taylor coefficients of the potential at t = 0"),
    "invert-ks": (cmd_invert_ks, "Kohn-Sham potential for an interacting pair"),
    "verify-rho": (cmd_verify_rho, "propagate a potential and compare with the target density"),
    "respond": (cmd_respond, "Lehmann kernel and kick response of the static system"),
    "functionals": (cmd_functionals, "Thomas-Fermi, Hartree and exchange energies"),
    "diagnose": (cmd_diagnose, "weight, force-balance and Sobolev diagnostics"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="densmap",
        description="Density-potential mapping on one-dimensional grids.",
        epilog="Configuration keys: " + ", ".join(SCHEMA),
    )
    ap.add_argument("--version", action="version", version=f"densmap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                       dest="overrides", help="override one configuration key (repeatable)")
    return ap


def run_command(argv) -> int:
    """Run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        cfg = RunConfig.load(args.config, args.overrides)
        inv.default_workers()
    except ValueError as exc:
        print(f"densmap: {exc}", file=sys.stderr)
        return EXIT_INVALID
    run = Run(args.command, cfg)
    func = COMMANDS[args.command][0]
    status, code, message = "ok", EXIT_OK, ""
    try:
        func(run)
    except _Unconverged as exc:
        status, code, message = "not_converged", EXIT_NUMERICAL, str(exc)
    except (NumericalFailure, DegenerateWeight, IncompatibleRHS, np.linalg.LinAlgError) as exc:
        status, code, message = "numerical_failure", EXIT_NUMERICAL, str(exc)
    except (ValueError, dpmf.DPMFError) as exc:
        status, code, message = "invalid_input", EXIT_INVALID, str(exc)
    run.manifest(status, code, message, time.perf_counter() - start)
    if message:
        print(f"densmap {args.command}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
