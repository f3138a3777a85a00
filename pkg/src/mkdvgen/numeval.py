"""Pseudospectral time integration of generated flows on a periodic domain.

Spatial derivatives come from the FFT of the sampled field; time stepping is
classical RK4.  Densities are integrated over the circle with the trapezoidal
rule (spectrally accurate for periodic data).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np

from .diffpoly import DiffPoly
from .hierarchy import FlowSpec

log = logging.getLogger(__name__)

RK4_IMAG_STABILITY = 2.0 * math.sqrt(2.0)


class IntegrationError(FloatingPointError):
    def __init__(self, step: int, message: str = "non-finite values"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class StabilityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GridState:
    """r fields sampled at N points of a circle of length L, at time t."""

    fields: np.ndarray  # shape (r, N)
    L: float
    t: float = 0.0

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.fields, dtype=float))
        object.__setattr__(self, "fields", f)
        n = f.shape[1]
        if n < 2 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two, got {n}")
        if not self.L > 0:
            raise ValueError("domain length must be positive")

    @property
    def N(self) -> int:
        return self.fields.shape[1]

    @property
    def rank(self) -> int:
        return self.fields.shape[0]

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.N) * (self.L / self.N)


def wavenumbers(N: int, L: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.rfftfreq(N, d=L / N)


def spectral_derivative(f: np.ndarray, L: float, order: int = 1) -> np.ndarray:
    """order-th derivative of periodic samples along the last axis."""
    if order == 0:
        return np.array(f, dtype=float, copy=True)
    N = f.shape[-1]
    k = wavenumbers(N, L)
    fh = np.fft.rfft(f, axis=-1) * (1j * k) ** order
    if order % 2 == 1 and N % 2 == 0:
        fh[..., -1] = 0.0  # Nyquist mode has no odd derivative
    return np.fft.irfft(fh, n=N, axis=-1)


# ---------------------------------------------------------------------------
# compiled polynomials


class CompiledPoly:
    """Pointwise evaluator for a DiffPoly given the jets of the fields."""

    def __init__(self, p: DiffPoly):
        self.poly = p
        self.terms = [(float(c), m) for m, c in p]
        self.jets = sorted(p.jets())

    def __call__(self, jets: Dict[tuple, np.ndarray], shape) -> np.ndarray:
        out = np.zeros(shape)
        for c, m in self.terms:
            term = np.full(shape, c)
            for i, n, e in m:
                term = term * (jets[(i, n)] ** e if e > 1 else jets[(i, n)])
            out += term
        return out


def field_jets(state_fields: np.ndarray, L: float, needed) -> Dict[tuple, np.ndarray]:
    jets = {}
    for i, n in needed:
        jets[(i, n)] = spectral_derivative(state_fields[i - 1], L, n)
    return jets


def compile_rhs(f: FlowSpec) -> Callable[[GridState], np.ndarray]:
    """Evaluator mapping a GridState to d/dt of its fields under flow f."""
    parts = [CompiledPoly(p) for p in f.rhs]
    needed = sorted(set().union(*(c.jets for c in parts)))

    def evaluate(state: GridState) -> np.ndarray:
        jets = field_jets(state.fields, state.L, needed)
        return np.stack([c(jets, state.N) for c in parts])

    evaluate.flow = f
    return evaluate


def compile_density(p: DiffPoly) -> Callable[[GridState], np.ndarray]:
    cp = CompiledPoly(p)

    def evaluate(state: GridState) -> np.ndarray:
        return cp(field_jets(state.fields, state.L, cp.jets), state.N)

    return evaluate


def integral(values: np.ndarray, L: float) -> float:
    return float(np.mean(values) * L)


# ---------------------------------------------------------------------------
# time stepping


def stability_number(f: FlowSpec, N: int, L: float, dt: float) -> float:
    """dt * |linear symbol| at the largest wavenumber, to compare with RK4's 2*sqrt(2)."""
    kmax = math.pi * N / L
    total = 0.0
    for p in f.rhs:
        for m, c in p:
            if len(m) == 1 and m[0][2] == 1:
                total += abs(float(c)) * kmax ** m[0][1]
    return dt * total


def _rk4_step(rhs, state: GridState, dt: float) -> GridState:
    y, t, L = state.fields, state.t, state.L
    k1 = rhs(GridState(y, L, t))
    k2 = rhs(GridState(y + 0.5 * dt * k1, L, t + 0.5 * dt))
    k3 = rhs(GridState(y + 0.5 * dt * k2, L, t + 0.5 * dt))
    k4 = rhs(GridState(y + dt * k3, L, t + dt))
    return GridState(y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), L, t + dt)


def _euler_step(rhs, state: GridState, dt: float) -> GridState:
    return GridState(state.fields + dt * rhs(state), state.L, state.t + dt)


SCHEMES = {"rk4": _rk4_step, "euler": _euler_step}


@dataclass
class Trajectory:
    states: List[GridState] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> GridState:
        return self.states[-1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            rank = self.states[0].rank
            w.writerow(["t", "z"] + [f"u{i}" for i in range(1, rank + 1)])
            for s in self.states:
                for k, z in enumerate(s.z):
                    w.writerow([repr(s.t), repr(float(z))] + [repr(float(x)) for x in s.fields[:, k]])


def integrate(s0: GridState, f: FlowSpec, dt: float, steps: int, scheme: str = "rk4",
              stride: int | None = None, rhs=None) -> Trajectory:
    """Advance s0 by ``steps`` steps of size dt, keeping every ``stride``-th state."""
    if f.ctx.rank != s0.rank:
        raise ValueError("state rank does not match flow rank")
    step_fn = SCHEMES[scheme]
    rhs = rhs or compile_rhs(f)
    sigma = stability_number(f, s0.N, s0.L, dt)
    if scheme == "rk4" and sigma > RK4_IMAG_STABILITY:
        warnings.warn(
            f"dt={dt} exceeds the RK4 stability budget (dt*|symbol| = {sigma:.3g} > 2.83)",
            StabilityWarning,
            stacklevel=2,
        )
    stride = stride or max(1, steps // 100)
    traj = Trajectory([s0])
    state = s0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, steps + 1):
            state = step_fn(rhs, state, dt)
            if not np.all(np.isfinite(state.fields)):
                raise IntegrationError(step)
            if step % stride == 0 or step == steps:
                traj.states.append(state)
    return traj


# ---------------------------------------------------------------------------
# conservation monitoring


@dataclass
class DensityReport:
    density: str
    series: List[float]
    initial: float
    final: float
    max_rel_drift: float
    absolute: bool = False

    def to_json(self) -> dict:
        return {
            "density": self.density,
            "initial": self.initial,
            "final": self.final,
            "max_rel_drift": self.max_rel_drift,
            "drift_kind": "absolute" if self.absolute else "relative",
        }


@dataclass
class ConservationReport:
    times: List[float]
    densities: List[DensityReport]

    @property
    def max_drift(self) -> float:
        return max((d.max_rel_drift for d in self.densities), default=0.0)

    def to_json(self) -> dict:
        return {"times": self.times, "densities": [d.to_json() for d in self.densities]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def monitor(traj: Trajectory, densities: Sequence, tiny: float = 1e-12) -> ConservationReport:
    """Time series of the integral of each density and its drift from t = 0.

    Drift is relative to the t = 0 value, or absolute when that value is below
    ``tiny`` in magnitude (e.g. densities that integrate to zero by symmetry).
    """
    reports = []
    for d in densities:
        label = getattr(d, "label", repr(d))
        poly = getattr(d, "value", d)
        ev = compile_density(poly)
        series = [integral(ev(s), s.L) for s in traj.states]
        first = series[0]
        absolute = abs(first) < tiny
        scale = 1.0 if absolute else abs(first)
        drift = max(abs(x - first) for x in series) / scale
        reports.append(DensityReport(label, series, first, series[-1], drift, absolute))
    return ConservationReport([float(t) for t in traj.times], reports)


# ---------------------------------------------------------------------------
# initial data


def initial_profile(kind: str, N: int, L: float, rank: int = 1, amplitude: float = 1.0,
                    width: float = 1.0, center: float | None = None) -> GridState:
    """Built-in profiles: 'sine', 'gaussian', 'sech', 'zero' (same profile in every field)."""
    z = np.arange(N) * (L / N)
    c = L / 2 if center is None else center
    if kind == "sine":
        prof = amplitude * np.sin(2 * np.pi * z / L)
    elif kind == "gaussian":
        prof = amplitude * np.exp(-(((z - c) / width) ** 2))
    elif kind == "sech":
        prof = amplitude / np.cosh((z - c) / width)
    elif kind == "zero":
        prof = np.zeros(N)
    else:
        raise ValueError(f"unknown profile {kind!r}")
    return GridState(np.tile(prof, (rank, 1)), L, 0.0)


def translation_shift(a: np.ndarray, b: np.ndarray, L: float) -> float:
    """Shift s (mod L) maximizing the periodic cross-correlation of b with a(z - s)."""
    N = a.shape[-1]
    corr = np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), n=N)
    k = int(np.argmax(corr))
    # parabolic refinement of the peak
    cm, c0, cp = corr[k - 1], corr[k], corr[(k + 1) % N]
    denom = cm - 2 * c0 + cp
    frac = 0.5 * (cm - cp) / denom if denom else 0.0
    return ((k + frac) * L / N) % L
