"""Nonlinear least-squares fitting of coincidence fringes.

Two models: an undamped cosine fringe against the controller delay,

    g2(x) = 1 + (v/2) * cos(phase + 2*pi*frequency*x)

and a Gaussian-damped fringe against the post-processing shift,

    g2(x) = 1 + (v/2) * exp(-(linewidth*x)^2) * cos(phase + 2*pi*frequency*x).

The minimizer is damped Gauss-Newton with a Levenberg-Marquardt damping
schedule and analytic Jacobians.  Parameter errors come from the inverse
curvature matrix scaled by sqrt(chi2/dof).  Results are reported in the
canonical gauge: visibility >= 0, phase in (-pi, pi], frequency >= 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DELAY_PARAM_NAMES = ("visibility", "phase", "frequency")
TAU_PARAM_NAMES = ("visibility", "linewidth", "phase", "frequency")

MAX_ITERATIONS = 200
GRADIENT_TOL = 1e-12
STEP_TOL = 1e-13
CHI2_REL_TOL = 1e-14
CONDITION_LIMIT = 1e13


class FitNotConverged(RuntimeError):
    """Raised by callers that insist on convergence; the fit itself never raises."""


@dataclass
class FitResult:
    """Outcome of one least-squares fit.

    params maps each parameter name to (value, standard error); the error is
    None when the curvature matrix was too ill-conditioned to invert safely.
    """

    model: str  # "delay" | "tau"
    params: dict[str, tuple[float, float | None]]
    chi2: float
    dof: int
    converged: bool
    iterations: int
    degenerate: bool = False
    notes: tuple[str, ...] = ()
    chi2_trace: tuple[float, ...] = field(default=(), repr=False)

    def value(self, name: str) -> float:
        return self.params[name][0]

    def stderr(self, name: str) -> float | None:
        return self.params[name][1]

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "params": {
                name: {"value": value, "stderr": stderr}
                for name, (value, stderr) in self.params.items()
            },
            "chi2": self.chi2,
            "dof": self.dof,
            "converged": self.converged,
            "iterations": self.iterations,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=True)

    def summary_lines(self) -> list[str]:
        unit = {"frequency": "Hz", "linewidth": "Hz"}
        lines = []
        for name, (value, stderr) in self.params.items():
            err = "---" if stderr is None else f"{stderr:.6g}"
            suffix = f" {unit[name]}" if name in unit else ""
            lines.append(f"{name:>10s} = {value:.6g} +/- {err}{suffix}")
        lines.append(
            f"  chi2/dof = {self.chi2:.6g}/{self.dof}"
            f"   converged={self.converged} iterations={self.iterations}"
        )
        if self.degenerate:
            lines.append("  WARNING: degenerate fit, errors unreliable")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return lines


def delay_fringe(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    v, phase, freq = params
    return 1.0 + 0.5 * v * np.cos(phase + 2.0 * math.pi * freq * x)


def delay_fringe_jacobian(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    v, phase, freq = params
    arg = phase + 2.0 * math.pi * freq * x
    cos_a, sin_a = np.cos(arg), np.sin(arg)
    jac = np.empty((x.size, 3))
    jac[:, 0] = 0.5 * cos_a
    jac[:, 1] = -0.5 * v * sin_a
    jac[:, 2] = -0.5 * v * sin_a * 2.0 * math.pi * x
    return jac


def tau_fringe(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    v, width, phase, freq = params
    envelope = np.exp(-((width * x) ** 2))
    return 1.0 + 0.5 * v * envelope * np.cos(phase + 2.0 * math.pi * freq * x)


def tau_fringe_jacobian(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    v, width, phase, freq = params
    envelope = np.exp(-((width * x) ** 2))
    arg = phase + 2.0 * math.pi * freq * x
    cos_a, sin_a = np.cos(arg), np.sin(arg)
    jac = np.empty((x.size, 4))
    jac[:, 0] = 0.5 * envelope * cos_a
    jac[:, 1] = -v * width * (x**2) * envelope * cos_a
    jac[:, 2] = -0.5 * v * envelope * sin_a
    jac[:, 3] = -0.5 * v * envelope * sin_a * 2.0 * math.pi * x
    return jac


_MODELS = {
    "delay": (DELAY_PARAM_NAMES, delay_fringe, delay_fringe_jacobian),
    "tau": (TAU_PARAM_NAMES, tau_fringe, tau_fringe_jacobian),
}


def _wrap_phase(phase: float) -> float:
    wrapped = math.remainder(phase, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def canonicalize(model: str, params: np.ndarray) -> np.ndarray:
    """Resolve the cosine sign/phase degeneracies.

    visibility >= 0 (flip absorbs a pi phase shift), frequency >= 0 (flip
    conjugates the phase), linewidth >= 0 (envelope is even), phase wrapped
    into (-pi, pi].
    """
    p = np.array(params, dtype=float)
    if model == "delay":
        v_i, phase_i, freq_i = 0, 1, 2
    else:
        v_i, phase_i, freq_i = 0, 2, 3
        p[1] = abs(p[1])
    if p[v_i] < 0:
        p[v_i] = -p[v_i]
        p[phase_i] += math.pi
    if p[freq_i] < 0:
        p[freq_i] = -p[freq_i]
        p[phase_i] = -p[phase_i]
    p[phase_i] = _wrap_phase(p[phase_i])
    return p


def _periodogram_peak(x: np.ndarray, y: np.ndarray, f_grid: np.ndarray) -> float:
    centered = y - y.mean()
    phases = np.exp(-2j * math.pi * np.outer(f_grid, x))
    power = np.abs(phases @ centered) ** 2
    return float(f_grid[int(np.argmax(power))])


def guess_frequency(x: np.ndarray, y: np.ndarray, band: tuple[float, float] = (0.5, 1.5)) -> float:
    """Fringe frequency guess: coarse periodogram, then a refined scan of a
    configurable band around the coarse peak (default 0.5x to 1.5x)."""
    span = float(x.max() - x.min())
    if span <= 0:
        return 0.0
    # from half a cycle over the span up to the Nyquist rate of the typical
    # sample spacing (median, so sparse outlying points don't cap the band)
    spacing = float(np.median(np.diff(np.sort(x))))
    f_low = 0.5 / span
    f_high = max(0.5 / spacing, 2.0 * f_low) if spacing > 0 else 2.0 * f_low
    n_coarse = int(np.clip(4.0 * span * (f_high - f_low), 256, 8192))
    coarse = _periodogram_peak(x, y, np.linspace(f_low, f_high, n_coarse))
    lo, hi = band[0] * coarse, band[1] * coarse
    return _periodogram_peak(x, y, np.linspace(lo, hi, 512))


def initial_guess(
    x: np.ndarray, y: np.ndarray, model: str, band: tuple[float, float] = (0.5, 1.5)
) -> np.ndarray:
    """Starting point from the data: swing, periodogram frequency, first
    extremum phase, and (tau model) envelope half-width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if model not in _MODELS:
        raise ValueError(f"unknown model kind {model!r}")
    if x.size < 4:
        raise ValueError(f"need at least 4 points to build a guess, got {x.size}")
    visibility = float(np.clip(y.max() - y.min(), 0.0, 1.0))
    freq = guess_frequency(x, y, band)
    if freq <= 0.0:
        freq = 1.0 / max(x.max() - x.min(), 1.0)
    # phase such that the model peaks where the data peak
    x_peak = float(x[int(np.argmax(y))])
    phase = _wrap_phase(-2.0 * math.pi * freq * x_peak)
    if model == "delay":
        return np.array([visibility, phase, freq])
    # envelope half-width from where |y - 1| falls to half its maximum
    magnitude = np.abs(y - 1.0)
    peak = magnitude.max()
    width = 0.0
    if peak > 0:
        outside = np.abs(x)[magnitude >= 0.5 * peak]
        half_x = float(outside.max()) if outside.size else 0.0
        if half_x > 0:
            width = math.sqrt(math.log(2.0)) / half_x
    if width <= 0.0:
        width = 0.5 / max(np.abs(x).max(), 1.0)
    return np.array([visibility, width, phase, freq])


def _solve_damped(jtj: np.ndarray, grad: np.ndarray, damping: float) -> np.ndarray:
    # solve in diagonally scaled space: parameters of wildly different
    # physical magnitude (visibility vs frequency in Hz) stay well conditioned
    scale = np.sqrt(np.diag(jtj))
    scale[scale <= 0] = 1.0
    normalized = jtj / np.outer(scale, scale)
    step_scaled = np.linalg.solve(
        normalized + damping * np.eye(jtj.shape[0]), grad / scale
    )
    return step_scaled / scale


def _scaled_covariance(jtj: np.ndarray, chi2: float, dof: int) -> np.ndarray | None:
    """Inverse curvature scaled by chi2/dof, or None when near-singular."""
    diag = np.diag(jtj)
    if np.any(~np.isfinite(diag)) or np.any(diag < 0):
        return None
    top = diag.max() if diag.size else 0.0
    if top <= 0 or np.any(diag <= 1e-28 * top):
        return None
    scale = np.sqrt(diag)
    normalized = jtj / np.outer(scale, scale)
    if not np.all(np.isfinite(normalized)) or np.linalg.cond(normalized) > CONDITION_LIMIT:
        return None
    inverse = np.linalg.inv(normalized) / np.outer(scale, scale)
    return inverse * (chi2 / dof if chi2 > 0 else 1.0)


def _levenberg_marquardt(
    model_fn,
    jac_fn,
    p0: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    max_iterations: int,
):
    """Weighted LM loop; returns (params, trace, converged, iterations, jtj)."""
    p = np.array(p0, dtype=float)
    w = weights[:, None]

    def chi2_of(params):
        r = (y - model_fn(params, x)) * weights
        return float(r @ r)

    chi2 = chi2_of(p)
    trace = [chi2]
    damping = 1e-3
    converged = False
    iterations = 0
    jtj = None
    for iterations in range(1, max_iterations + 1):
        residual = (y - model_fn(p, x)) * weights
        jac = jac_fn(p, x) * w
        jtj = jac.T @ jac
        grad = jac.T @ residual
        if np.linalg.norm(grad) < GRADIENT_TOL * max(1.0, chi2):
            converged = True
            break
        accepted = False
        for _ in range(50):
            try:
                step = _solve_damped(jtj, grad, damping)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = p + step
            trial_chi2 = chi2_of(trial)
            if trial_chi2 <= chi2:
                scale = np.maximum(np.abs(p), 1e-30)
                small_step = np.all(np.abs(step) < STEP_TOL * scale)
                small_drop = (chi2 - trial_chi2) <= CHI2_REL_TOL * max(chi2, 1e-300)
                p, chi2 = trial, trial_chi2
                trace.append(chi2)
                damping = max(damping / 10.0, 1e-15)
                accepted = True
                if small_step or small_drop:
                    converged = True
                break
            damping *= 10.0
        if converged:
            break
        if not accepted:
            # damping grew fifty decades without a downhill step, so the
            # current point is stationary to machine precision
            converged = True
            break
    # curvature at the point actually reported
    jac = jac_fn(p, x) * w
    jtj = jac.T @ jac
    return p, trace, converged, iterations, jtj


def _finish(
    model: str,
    names: tuple[str, ...],
    p: np.ndarray,
    trace: list[float],
    converged: bool,
    iterations: int,
    jtj: np.ndarray | None,
    n_points: int,
    notes: list[str],
) -> FitResult:
    p = canonicalize(model, p)
    dof = max(n_points - len(names), 1)
    chi2 = trace[-1]
    degenerate = False
    errors: list[float | None] = [None] * len(names)
    covariance = _scaled_covariance(jtj, chi2, dof) if jtj is not None else None
    if covariance is None:
        degenerate = True
        notes.append("curvature matrix is near-singular; errors omitted")
    else:
        diag = np.diag(covariance)
        if np.all(diag >= 0):
            errors = list(np.sqrt(diag))
        else:
            degenerate = True
            notes.append("covariance not positive definite; errors omitted")
    if model == "tau" and errors[1] is not None and errors[1] >= abs(p[1]) > 0:
        notes.append("linewidth weakly identified: error bar covers zero")
    params = {name: (float(value), err) for name, value, err in zip(names, p, errors)}
    return FitResult(
        model=model,
        params=params,
        chi2=chi2,
        dof=dof,
        converged=converged,
        iterations=iterations,
        degenerate=degenerate,
        notes=tuple(notes),
        chi2_trace=tuple(trace),
    )


def _prepare(curve, weighted: bool):
    x = np.asarray(curve.x, dtype=float)
    y = np.asarray(curve.g2, dtype=float)
    sigma = np.asarray(curve.sigma, dtype=float)
    if weighted:
        if np.any(sigma <= 0):
            raise ValueError("weighted fit requires positive sigma for every point")
        weights = 1.0 / sigma
    else:
        weights = np.ones_like(y)
    return x, y, weights


def fit_delay_model(
    curve,
    initial: np.ndarray | None = None,
    weighted: bool = True,
    max_iterations: int = MAX_ITERATIONS,
    band: tuple[float, float] = (0.5, 1.5),
) -> FitResult:
    """Fit the undamped fringe to a delay-scan curve.

    curve needs >= 4 points spanning at least half an oscillation period of
    the starting frequency.
    """
    x, y, weights = _prepare(curve, weighted)
    if x.size < 4:
        raise ValueError(f"delay fit needs >= 4 points, got {x.size}")
    notes: list[str] = []
    p0 = np.array(initial, dtype=float) if initial is not None else initial_guess(x, y, "delay", band)
    span = x.max() - x.min()
    if p0[2] > 0 and span * p0[2] < 0.5:
        raise ValueError(
            f"delay scan spans {span * p0[2]:.3g} oscillation periods; need at least 0.5"
        )
    p, trace, converged, iterations, jtj = _levenberg_marquardt(
        delay_fringe, delay_fringe_jacobian, p0, x, y, weights, max_iterations
    )
    return _finish("delay", DELAY_PARAM_NAMES, p, trace, converged, iterations, jtj, x.size, notes)


def fit_tau_model(
    curve,
    initial: np.ndarray | None = None,
    weighted: bool = True,
    max_iterations: int = MAX_ITERATIONS,
    band: tuple[float, float] = (0.5, 1.5),
) -> FitResult:
    """Fit the Gaussian-damped fringe to a shift-scan curve.

    With an explicit initial guess the scan must reach max|x| >= 2/linewidth
    so the envelope decay is actually in the data; the automatic guess
    clamps itself to the available span instead.
    """
    x, y, weights = _prepare(curve, weighted)
    if x.size < 5:
        raise ValueError(f"tau fit needs >= 5 points, got {x.size}")
    notes: list[str] = []
    if initial is not None:
        p0 = np.array(initial, dtype=float)
        if p0[1] > 0 and np.abs(x).max() < 2.0 / p0[1]:
            raise ValueError(
                "shift scan too short to constrain the envelope: "
                f"max|x| = {np.abs(x).max():.3g} < 2/linewidth = {2.0 / p0[1]:.3g}"
            )
    else:
        p0 = initial_guess(x, y, "tau", band)
    p, trace, converged, iterations, jtj = _levenberg_marquardt(
        tau_fringe, tau_fringe_jacobian, p0, x, y, weights, max_iterations
    )
    return _finish("tau", TAU_PARAM_NAMES, p, trace, converged, iterations, jtj, x.size, notes)
