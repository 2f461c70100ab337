"""Thomas-Fermi kinetic, Hartree and Dirac-exchange energies of radial densities.

All integrals use the trapezoidal rule on a uniform radial grid
``r_i = i h`` (``i = 1..n``) together with the implicit point ``r = 0``
where every integrand carries a vanishing ``r**2`` factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GridError
from .grid import Grid

C_TF = 0.3 * (3.0 * np.pi**2) ** (2.0 / 3.0)
C_X = 0.75 * (3.0 / np.pi) ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class RadialDensity:
    """Spherically symmetric density ``n(r)`` on ``r_i = i h``, ``i = 1..len(values)``."""

    h: float
    values: np.ndarray
    declared_N: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise GridError("radial density needs a 1D array of at least two samples")
        if not self.h > 0:
            raise GridError(f"radial spacing must be positive, got {self.h}")
        if not np.all(np.isfinite(v)):
            raise ValueError("radial density contains non-finite entries")
        if v.min() < 0:
            raise ValueError(f"negative density entry {v.min():.3e}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.declared_N is not None:
            dev = abs(self.particle_number() - self.declared_N)
            if dev > 1e-6 * max(1.0, abs(self.declared_N)):
                raise ValueError(
                    f"particle number {self.particle_number():.9g} differs from"
                    f" declared {self.declared_N:g}"
                )

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.values.size + 1)

    def integrate(self, f) -> float:
        """``int_0^R f(r) 4 pi r^2 dr`` for ``f`` sampled on :attr:`r`."""
        return radial_integral(np.asarray(f, dtype=float) * 4 * np.pi * self.r**2, self.h)

    def particle_number(self) -> float:
        return self.integrate(self.values)

    def scaled(self, c: float) -> "RadialDensity":
        return RadialDensity(self.h, c * self.values)


def radial_integral(g: np.ndarray, h: float) -> float:
    """Trapezoid of ``g`` over ``[0, R]`` with ``g(0) = 0`` implied."""
    return float(h * (np.sum(g) - 0.5 * g[-1]))


def _cumulative(g: np.ndarray, h: float) -> np.ndarray:
    return cumulative_trapezoid(np.concatenate([[0.0], g]), dx=h)


def hartree_potential(n: RadialDensity) -> np.ndarray:
    """Shell-theorem potential ``Q(r)/r + int_r^R 4 pi s n(s) ds``."""
    r, v = n.r, n.values
    Q = _cumulative(4 * np.pi * r**2 * v, n.h)
    outer_cum = _cumulative(4 * np.pi * r * v, n.h)
    return Q / r + (outer_cum[-1] - outer_cum)


def tf_energy_density(n) -> np.ndarray:
    """Kinetic energy density ``(3/10)(3 pi^2)^(2/3) n^(5/3)`` of the uniform gas."""
    return C_TF * np.asarray(n, dtype=float) ** (5.0 / 3.0)


def exchange_energy_density(n) -> np.ndarray:
    """Magnitude ``(3/4)(3/pi)^(1/3) n^(4/3)`` of the Dirac exchange energy density."""
    return C_X * np.asarray(n, dtype=float) ** (4.0 / 3.0)


@dataclass(frozen=True)
class LDAComponents:
    T_TF: float
    V_H: float
    V_x: float
    V_ext: float

    @property
    def E_total(self) -> float:
        """``T + V_H - V_x + V_ext``; exchange lowers the energy."""
        return self.T_TF + self.V_H - self.V_x + self.V_ext

    def as_dict(self) -> dict:
        return {"T_TF": self.T_TF, "V_H": self.V_H, "V_x": self.V_x,
                "V_ext": self.V_ext, "E_total": self.E_total}


def lda_components(n: RadialDensity, v_ext=None) -> LDAComponents:
    """Energy components of a radial density (``v_ext`` sampled on ``n.r``)."""
    T = n.integrate(tf_energy_density(n.values))
    VH = 0.5 * n.integrate(n.values * hartree_potential(n))
    VX = n.integrate(exchange_energy_density(n.values))
    if v_ext is None:
        VE = 0.0
    else:
        v_ext = np.asarray(v_ext, dtype=float)
        if v_ext.shape != n.values.shape:
            raise GridError("external potential is not sampled on the radial grid")
        VE = n.integrate(n.values * v_ext)
    return LDAComponents(T, VH, VX, VE)


@dataclass(frozen=True)
class ScalingReport:
    c: float
    ratios: dict
    expected: dict
    max_relative_deviation: float

    @property
    def passes(self) -> bool:
        return self.max_relative_deviation <= 1e-10


def lda_scaling_check(n: RadialDensity, c: float) -> ScalingReport:
    """Compare component ratios under ``n -> c n`` with ``c^(5/3)``, ``c^(4/3)``, ``c^2``."""
    if not c > 0:
        raise ValueError(f"scale must be positive, got {c}")
    a, b = lda_components(n), lda_components(n.scaled(c))
    ratios = {"T_TF": b.T_TF / a.T_TF, "V_x": b.V_x / a.V_x, "V_H": b.V_H / a.V_H}
    expected = {"T_TF": c ** (5.0 / 3.0), "V_x": c ** (4.0 / 3.0), "V_H": c**2}
    dev = max(abs(ratios[k] / expected[k] - 1.0) for k in ratios)
    return ScalingReport(c, ratios, expected, dev)


def uniform_ball(R: float, N: float, h: float | None = None, r_max: float | None = None,
                 normalize: bool = True) -> RadialDensity:
    """Uniform ball of radius ``R`` holding ``N`` particles.

    ``R`` is placed on a grid node carrying half the interior value, which
    keeps the trapezoidal rule second order across the jump.  With
    ``normalize`` the interior value is chosen so that the discrete particle
    number equals ``N`` exactly.
    """
    if not (R > 0 and N >= 0):
        raise ValueError("radius must be positive and N nonnegative")
    h = h if h is not None else R / 2000
    r_max = r_max if r_max is not None else 1.5 * R
    n_inner = int(round(R / h))
    if abs(n_inner * h - R) > 1e-9 * R:
        raise GridError("radius must be an integer multiple of the spacing")
    count = int(round(r_max / h))
    if count <= n_inner:
        raise GridError("r_max must exceed R")
    vals = np.zeros(count)
    vals[: n_inner - 1] = 1.0
    vals[n_inner - 1] = 0.5
    shape = RadialDensity(h, vals)
    if normalize:
        n0 = N / shape.particle_number() if N > 0 else 0.0
    else:
        n0 = N / (4.0 / 3.0 * np.pi * R**3)
    return RadialDensity(h, n0 * vals, N if normalize else None)


def local_components_1d(n, grid: Grid) -> dict:
    """``T_TF`` and ``V_x`` of a 1D-sampled density using the 3D prefactors.

    Only the local integrals are offered for line densities; the prefactors
    come from the three-dimensional electron gas and carry no 1D meaning
    beyond providing a homogeneity probe.
    """
    n = np.asarray(grid.check(n), dtype=float)
    if n.min() < 0:
        raise ValueError("negative density entry")
    return {"T_TF": float(np.sum(tf_energy_density(n)) * grid.dx),
            "V_x": float(np.sum(exchange_energy_density(n)) * grid.dx)}
