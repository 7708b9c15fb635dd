"""Damped Gauss-Newton (Levenberg-Marquardt) least squares and a small model library.

Models are referred to by name::

    line          slope, intercept
    proportional  slope                      (line through the origin)
    polynomial    c_n, ..., c_1, c_0         (numpy.polyval order)
    gaussian      center, sigma, amplitude, background
    sinusoid      offset, amplitude, frequency, phase
                  y = offset + amplitude * cos(2 pi frequency x + phase)
    sech2         amplitude, center, tau, offset

or a callable ``f(x, params) -> y`` can be passed instead (Jacobian by finite
differences).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

MAX_ITER = 200
RTOL = 1e-10
POISSON_REFITS = 2
POISSON_VARIANCE_FLOOR = 0.1


class GuessUnavailable(ValueError):
    """Raised when data are too degenerate for a heuristic starting point."""


@dataclass
class FitResult:
    params: np.ndarray
    param_errs: np.ndarray
    residual_rms: float
    converged: bool
    iterations: int
    covariance: np.ndarray
    chi2: float
    dof: int
    message: str = ""

    def __iter__(self):
        return iter((self.params, self.param_errs))


def _poly(x, p):
    return np.polyval(p, x)


def _poly_jac(x, p):
    n = len(p)
    return np.stack([x ** (n - 1 - k) for k in range(n)], axis=1)


def _gauss(x, p):
    c, s, a, b = p
    return a * np.exp(-0.5 * ((x - c) / s) ** 2) + b


def _gauss_jac(x, p):
    c, s, a, _ = p
    u = (x - c) / s
    g = np.exp(-0.5 * u**2)
    return np.stack([a * g * u / s, a * g * u**2 / s, g, np.ones_like(x)], axis=1)


def _sinus(x, p):
    off, amp, f, ph = p
    return off + amp * np.cos(2 * np.pi * f * x + ph)


def _sinus_jac(x, p):
    _, amp, f, ph = p
    arg = 2 * np.pi * f * x + ph
    s = np.sin(arg)
    return np.stack([np.ones_like(x), np.cos(arg), -amp * s * 2 * np.pi * x, -amp * s], axis=1)


def _sech2(x, p):
    a, c, tau, off = p
    return a / np.cosh((x - c) / tau) ** 2 + off


def _sech2_jac(x, p):
    a, c, tau, _ = p
    u = (x - c) / tau
    s2 = 1.0 / np.cosh(u) ** 2
    d = 2 * a * s2 * np.tanh(u)  # -d/du of a sech^2(u)
    return np.stack([s2, d / tau, d * u / tau, np.ones_like(x)], axis=1)


MODELS: dict[str, tuple[Callable, Callable]] = {
    "line": (_poly, _poly_jac),
    "proportional": (lambda x, p: p[0] * x, lambda x, p: x[:, None].astype(float)),
    "polynomial": (_poly, _poly_jac),
    "gaussian": (_gauss, _gauss_jac),
    "sinusoid": (_sinus, _sinus_jac),
    "sech2": (_sech2, _sech2_jac),
}


def evaluate(model, x, params) -> np.ndarray:
    f, _ = _resolve(model)
    return f(np.asarray(x, dtype=float), np.asarray(params, dtype=float))


def _resolve(model):
    if callable(model):
        return model, None
    try:
        return MODELS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}") from None


def _numeric_jac(f, x, p):
    p = np.asarray(p, dtype=float)
    f0 = f(x, p)
    jac = np.empty((x.size, p.size))
    for k in range(p.size):
        h = 1e-7 * max(abs(p[k]), 1e-3)
        dp = p.copy()
        dp[k] += h
        jac[:, k] = (f(x, dp) - f0) / h
    return jac


def poisson_weights(y) -> np.ndarray:
    return 1.0 / np.sqrt(np.maximum(np.asarray(y, dtype=float), 1.0))


def least_squares(model, x, y, p0=None, weights=None, *, fixed=None, max_iter: int = MAX_ITER,
                  rtol: float = RTOL, absolute_sigma: bool | None = None, **guess_opts) -> FitResult:
    """Minimise sum((w * (y - f(x, p)))**2) over the free parameters.

    ``weights`` may be an array of per-point multipliers (1/sigma), the string
    ``"poisson"`` for count data, or None for uniform weighting. Parameter
    errors come from the inverse curvature matrix; they are rescaled by the
    reduced chi-square unless ``absolute_sigma`` (default: True whenever
    weights are given).

    Poisson fits start from weights 1/sqrt(max(y, 1)) and are then refitted
    twice with the model as the variance. Data-derived weights alone pull a
    low-count background down by about one count per bin.
    """
    if isinstance(weights, str) and weights == "poisson":
        res = _least_squares(model, x, y, p0, "poisson", fixed, max_iter, rtol, absolute_sigma, guess_opts)
        f, _ = _resolve(model)
        xa = np.asarray(x, dtype=float)
        for _ in range(POISSON_REFITS):
            if not (res.converged and np.all(np.isfinite(res.params))):
                break
            w = 1.0 / np.sqrt(np.maximum(f(xa, res.params), POISSON_VARIANCE_FLOOR))
            refit = _least_squares(model, x, y, res.params, w, fixed, max_iter, rtol, True, guess_opts)
            if not refit.converged:
                break
            res = refit
        return res
    return _least_squares(model, x, y, p0, weights, fixed, max_iter, rtol, absolute_sigma, guess_opts)


def _least_squares(model, x, y, p0, weights, fixed, max_iter, rtol, absolute_sigma, guess_opts) -> FitResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    f, jac_fn = _resolve(model)
    if p0 is None:
        if callable(model):
            raise ValueError("p0 is required for callable models")
        p0 = initial_guess(model, x, y, **guess_opts)
    p = np.array(p0, dtype=float)
    free = np.ones(p.size, bool) if fixed is None else ~np.asarray(fixed, bool)
    n_free = int(free.sum())
    if x.size < n_free + 1:
        raise ValueError(f"need at least {n_free + 1} points for {n_free} free parameters")

    if isinstance(weights, str):
        if weights != "poisson":
            raise ValueError(f"unknown weighting {weights!r}")
        w = poisson_weights(y)
    elif weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float)
    if absolute_sigma is None:
        absolute_sigma = weights is not None

    def residuals(pp):
        return w * (y - f(x, pp))

    def jacobian(pp):
        full = jac_fn(x, pp) if jac_fn is not None else _numeric_jac(f, x, pp)
        return w[:, None] * full[:, free]

    r = residuals(p)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    message = ""
    it = 0
    if not np.isfinite(cost):
        message = "non-finite residuals at the starting point"
    while np.isfinite(cost) and it < max_iter:
        it += 1
        if cost == 0.0:
            converged = True
            break
        J = jacobian(p)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = max(float(diag.max(initial=0.0)), 1.0) * 1e-12
        try:
            step = np.linalg.solve(A + lam * np.diag(diag), g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = p.copy()
        trial[free] += step
        r_new = residuals(trial)
        new_cost = float(r_new @ r_new)
        if np.isfinite(new_cost) and new_cost <= cost:
            decrease = cost - new_cost
            p, r, cost = trial, r_new, new_cost
            lam = max(lam / 10.0, 1e-15)
            if decrease <= rtol * max(new_cost, np.finfo(float).tiny):
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e16:
                # no downhill step exists at machine precision: we are at the minimum
                converged = True
                break
    if not converged and not message:
        message = f"no convergence after {it} iterations"
    if converged and cost > 0:
        # one undamped Gauss-Newton step: exact for models linear in their parameters
        J = jacobian(p)
        try:
            step = np.linalg.lstsq(J, r, rcond=None)[0]
            trial = p.copy()
            trial[free] += step
            r_new = residuals(trial)
            new_cost = float(r_new @ r_new)
            if np.isfinite(new_cost) and new_cost <= cost * (1.0 + 1e-12):
                p, r, cost = trial, r_new, new_cost
        except np.linalg.LinAlgError:
            pass

    J = jacobian(p)
    A = J.T @ J
    dof = max(x.size - n_free, 1)
    cov_free = None
    if np.linalg.cond(A) < 1e14:
        cov_free = np.linalg.inv(A)
    else:
        converged = False
        message = "singular normal equations: parameters are not all identifiable"
    cov = np.zeros((p.size, p.size))
    if cov_free is None:
        cov[np.ix_(free, free)] = np.inf
    else:
        scale = 1.0 if absolute_sigma else cost / dof
        cov[np.ix_(free, free)] = cov_free * scale
    errs = np.sqrt(np.abs(np.diag(cov)))
    resid = y - f(x, p)
    rms = float(np.sqrt(np.mean(resid**2)))
    if not (np.isfinite(rms) and np.all(np.isfinite(p))):
        converged = False
        message = message or "non-finite result"
    if not converged:
        logger.debug("fit did not converge: %s", message)
    return FitResult(p, errs, rms, converged, it, cov, cost, dof, message)


def linear_fit(design: np.ndarray, y, weights=None):
    """Closed-form weighted linear least squares. Returns (params, covariance, chi2)."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    Xw = X * w[:, None]
    params, *_ = np.linalg.lstsq(Xw, w * y, rcond=None)
    chi2 = float(np.sum((w * (y - X @ params)) ** 2))
    cov = np.linalg.pinv(Xw.T @ Xw)
    return params, cov, chi2


def initial_guess(model, x, y, *, degree: int | None = None, frequency: float | None = None) -> np.ndarray:
    """Deterministic starting parameters for the library models."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if model == "line":
        return _polyguess(x, y, 1)
    if model == "polynomial":
        if degree is None:
            raise GuessUnavailable("polynomial guess needs degree=")
        return _polyguess(x, y, degree)
    if model == "proportional":
        sxx = float(x @ x)
        if sxx == 0:
            raise GuessUnavailable("all x are zero")
        return np.array([float(x @ y) / sxx])
    if model == "gaussian":
        bg = float(y.min())
        yy = y - bg
        tot = yy.sum()
        if not tot > 0:
            raise GuessUnavailable("flat data: no peak to describe")
        c = float((x * yy).sum() / tot)
        s = float(np.sqrt(((x - c) ** 2 * yy).sum() / tot))
        if not s > 0:
            raise GuessUnavailable("peak has zero width")
        return np.array([c, s, float(yy.max()), bg])
    if model == "sech2":
        off = float(y.min())
        yy = y - off
        if not yy.max() > 0:
            raise GuessUnavailable("flat data: no peak to describe")
        k = int(np.argmax(yy))
        above = x[yy >= 0.5 * yy[k]]
        fwhm = max(float(above.max() - above.min()), float(np.min(np.diff(np.sort(x)))))
        return np.array([float(yy[k]), float(x[k]), fwhm / 1.7627, off])
    if model == "sinusoid":
        return _sinus_guess(x, y, frequency)
    raise GuessUnavailable(f"no heuristic for model {model!r}")


def _polyguess(x, y, degree):
    X = np.vander(x, degree + 1)
    if np.linalg.matrix_rank(X) < degree + 1:
        raise GuessUnavailable("x values do not determine the polynomial")
    return np.linalg.solve(X.T @ X, X.T @ y)


def spectral_peak_frequency(x, y, pad: int = 16) -> float:
    """Dominant frequency (cycles per unit x) from a zero-padded discrete spectrum."""
    order = np.argsort(x)
    x, y = x[order], y[order]
    n = x.size
    xu = np.linspace(x[0], x[-1], n)
    yu = np.interp(xu, x, y) - np.mean(y)
    step = xu[1] - xu[0]
    spec = np.abs(np.fft.rfft(yu, pad * n))
    freqs = np.fft.rfftfreq(pad * n, step)
    k = int(np.argmax(spec))
    if k == 0 or spec[k] == 0:
        raise GuessUnavailable("no oscillation in data; supply frequency=")
    return float(freqs[k])


def _sinus_guess(x, y, frequency):
    if frequency is None:
        frequency = spectral_peak_frequency(x, y)
    arg = 2 * np.pi * frequency * x
    X = np.stack([np.ones_like(x), np.cos(arg), np.sin(arg)], axis=1)
    (off, a, b), *_ = np.linalg.lstsq(X, y, rcond=None)
    # a cos + b sin = A cos(arg + ph) with A cos ph = a, -A sin ph = b
    return np.array([off, float(np.hypot(a, b)), frequency, float(np.arctan2(-b, a))])
