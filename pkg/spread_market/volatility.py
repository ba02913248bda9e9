"""
EGARCH(1, 1) volatility models with and without exogenous covariates.

Returns follow ``r_t = mu + eps_t`` with ``eps_t = sigma_t * eta_t`` and standard normal ``eta_t``; the
log-variance obeys::

    ln sigma_t^2 = omega0 + omega * eta_{t-1} + gamma * |eta_{t-1}| + tau * ln sigma_{t-1}^2 + lambda . x_t

The pre-sample values are ``sigma_{-1}^2 = var(r)`` (sample variance) and ``eta_{-1} = 0``. Model 0 has no
covariates; Model X adds one ``lambda`` per covariate column.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.stats import norm

from .logger import RunLogger

CORE_PARAMS = ("mu", "omega0", "omega", "gamma", "tau")
TABLE_COLUMNS = ("parameter", "model0_coef", "model0_t", "modelX_coef", "modelX_t")
VARIANCE_COLUMNS = ("date", "ret", "sigma")

#: smallest sample accepted by :func:`fit_egarch`
MIN_OBSERVATIONS = 30
TAU_BOUND = 0.999
_LOG_VARIANCE_CAP = 700.0
_PENALTY = 1e10


class VolatilityError(ValueError):
    """Base class of the errors raised by the volatility models."""


class NonFinite(VolatilityError):
    """The variance recursion overflowed or an input is not finite."""


class NoConvergence(VolatilityError):
    """The optimizer stopped before converging."""


class HessianSingular(VolatilityError):
    """The numerical Hessian at the optimum cannot be inverted."""


class InsufficientData(VolatilityError):
    """Fewer returns than the model needs."""


@dataclass(frozen=True)
class EgarchSpec:
    """Constant-mean Gaussian EGARCH(1, 1) with the named covariates (empty for Model 0)."""

    covariates: Tuple[str, ...] = ()

    @property
    def name(self) -> str:
        """``"Model 0"`` or ``"Model X"``."""
        return "Model X" if self.covariates else "Model 0"

    @property
    def param_names(self) -> List[str]:
        """Core parameters followed by ``lambda_<covariate>``."""
        return list(CORE_PARAMS) + [f"lambda_{c}" for c in self.covariates]

    @property
    def k(self) -> int:
        """Number of estimated parameters."""
        return len(CORE_PARAMS) + len(self.covariates)


@dataclass(frozen=True, eq=False)
class EgarchFit:
    """
    A fitted EGARCH model.

    ``std_errors`` holds ``nan`` when the Hessian was singular (``hessian_ok`` is then false);
    ``converged`` is false when the optimizer returned its best point without converging.
    """

    spec: EgarchSpec
    params: np.ndarray
    std_errors: np.ndarray
    loglik: float
    aic_norm: float
    bic_norm: float
    sigma2: np.ndarray
    converged: bool
    n: int
    hessian_ok: bool = True
    message: str = ""

    @property
    def param_names(self) -> List[str]:
        """Names in ``params`` order."""
        return self.spec.param_names

    @property
    def t_values(self) -> np.ndarray:
        """Coefficient over standard error."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.std_errors

    def as_dict(self) -> Dict[str, float]:
        """Parameter name -> estimate."""
        return dict(zip(self.param_names, self.params.tolist()))


def _as_matrix(covariates: Optional[np.ndarray], n: int) -> np.ndarray:
    if covariates is None:
        return np.zeros((n, 0))
    matrix = np.asarray(covariates, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.shape[0] != n:
        raise VolatilityError(f"Covariate matrix has {matrix.shape[0]} rows for {n} returns.")
    return matrix


def egarch_loglik(
    params: Sequence[float], returns: np.ndarray, covariates: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """
    Gaussian log-likelihood and conditional variances at ``params`` (``mu, omega0, omega, gamma, tau, lambda...``).

    Raises
    ------
    NonFinite
        The log-variance recursion leaves the representable range.
    """
    returns = np.asarray(returns, dtype=float)
    n = len(returns)
    if n < 2:
        raise InsufficientData("The variance recursion needs at least two returns.")
    x = _as_matrix(covariates, n)
    params = np.asarray(params, dtype=float)
    if len(params) != len(CORE_PARAMS) + x.shape[1]:
        raise VolatilityError(f"Expected {len(CORE_PARAMS) + x.shape[1]} parameters, got {len(params)}.")
    mu, omega0, omega, gamma, tau = (float(p) for p in params[:5])
    exogenous = (x @ params[5:]).tolist() if x.shape[1] else [0.0] * n

    log_variance = math.log(max(float(np.var(returns, ddof=1)), np.finfo(float).tiny))
    eta = 0.0
    loglik = 0.0
    sigma2 = np.empty(n)
    half_log_2pi = 0.5 * math.log(2.0 * math.pi)
    for t, r in enumerate(returns.tolist()):
        log_variance = omega0 + omega * eta + gamma * abs(eta) + tau * log_variance + exogenous[t]
        if not -_LOG_VARIANCE_CAP < log_variance < _LOG_VARIANCE_CAP:
            raise NonFinite(f"Log-variance {log_variance} at step {t} is out of range.")
        variance = math.exp(log_variance)
        eps = r - mu
        eta = eps / math.sqrt(variance)
        loglik -= half_log_2pi + 0.5 * log_variance + 0.5 * eps * eps / variance
        sigma2[t] = variance
    if not math.isfinite(loglik):
        raise NonFinite("Log-likelihood is not finite.")
    return loglik, sigma2


def _to_free(params: np.ndarray) -> np.ndarray:
    free = np.array(params, dtype=float)
    free[4] = np.arctanh(np.clip(params[4] / TAU_BOUND, -0.999999, 0.999999))
    return free


def _from_free(free: np.ndarray) -> np.ndarray:
    params = np.array(free, dtype=float)
    params[4] = TAU_BOUND * np.tanh(free[4])
    return params


def _hessian(func, point: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with steps ``step * max(|p|, 1)``."""
    k = len(point)
    eps = step * np.maximum(np.abs(point), 1.0)
    unit = np.diag(eps)
    hessian = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            value = (
                func(point + unit[i] + unit[j])
                - func(point + unit[i] - unit[j])
                - func(point - unit[i] + unit[j])
                + func(point - unit[i] - unit[j])
            ) / (4.0 * eps[i] * eps[j])
            hessian[i, j] = hessian[j, i] = value
    return hessian


def start_points(returns: np.ndarray, m: int) -> List[np.ndarray]:
    """
    Optimizer starts: ``mu`` = mean, ``omega0 = ln var(r)``, ``omega = 0``, ``gamma = 0.1``, ``tau = 0.9``,
    ``lambda = 0``; and the same with ``omega0`` scaled by ``1 - tau`` so the stationary level matches ``var(r)``.
    """
    log_var = math.log(max(float(np.var(returns, ddof=1)), np.finfo(float).tiny))
    base = np.concatenate([[float(np.mean(returns)), log_var, 0.0, 0.1, 0.9], np.zeros(m)])
    level = base.copy()
    level[1] = (1.0 - 0.9) * log_var
    return [base, level]


def fit_egarch(
    spec: EgarchSpec,
    returns: np.ndarray,
    covariates: Optional[np.ndarray] = None,
    max_iter: int = 2000,
    logger: Optional[RunLogger] = None,
    require_convergence: bool = False,
    initial: Optional[Sequence[float]] = None,
) -> EgarchFit:
    """
    Maximum-likelihood fit of ``spec``.

    The likelihood is maximized with L-BFGS-B over an unconstrained parametrization (``tau = 0.999 tanh(theta)``)
    from every :func:`start_points` start, with a Nelder-Mead polish when L-BFGS-B does not converge.
    ``initial`` is tried as one more start; passing the Model 0 estimates with zero ``lambda`` makes the Model X
    likelihood at least the Model 0 one.
    Standard errors come from the inverse of the numerical Hessian.
    ``aic_norm = (-2 ll + 2 k) / n`` and ``bic_norm = (-2 ll + k ln n) / n``.

    Raises
    ------
    InsufficientData
        Fewer than 30 returns.
    NonFinite
        Non-finite returns or covariates, or no start point with a finite likelihood.
    NoConvergence
        Only with ``require_convergence``; otherwise the best point is returned with ``converged=False``.
    """
    returns = np.asarray(returns, dtype=float)
    n = len(returns)
    if n < MIN_OBSERVATIONS:
        raise InsufficientData(f"EGARCH needs at least {MIN_OBSERVATIONS} returns, got {n}.")
    x = _as_matrix(covariates, n)
    if x.shape[1] != len(spec.covariates):
        raise VolatilityError(f"{spec.name} expects {len(spec.covariates)} covariate columns, got {x.shape[1]}.")
    if not (np.all(np.isfinite(returns)) and np.all(np.isfinite(x))):
        raise NonFinite("Returns and covariates must be finite.")

    def objective(free: np.ndarray) -> float:
        try:
            return -egarch_loglik(_from_free(free), returns, x)[0] / n
        except NonFinite:
            return _PENALTY

    starts = start_points(returns, x.shape[1])
    if initial is not None:
        if len(initial) != spec.k:
            raise VolatilityError(f"{spec.name} has {spec.k} parameters, the initial point has {len(initial)}.")
        starts.append(np.asarray(initial, dtype=float))

    best = None
    for start in starts:
        if objective(_to_free(start)) >= _PENALTY:
            continue
        result = minimize(objective, _to_free(start), method="L-BFGS-B", options={"maxiter": max_iter})
        if not result.success:
            polished = minimize(
                objective, result.x, method="Nelder-Mead", options={"maxiter": max_iter * 5, "xatol": 1e-8, "fatol": 1e-10}
            )
            if polished.fun <= result.fun:
                result = polished
        if best is None or result.fun < best.fun:
            best = result
    if best is None:
        raise NonFinite(f"{spec.name} has no start point with a finite likelihood.")

    params = _from_free(best.x)
    loglik, sigma2 = egarch_loglik(params, returns, x)
    converged = bool(best.success)
    if not converged and logger is not None:
        logger.log_numerical("egarch_no_convergence", model=spec.name, message=str(best.message))
    if not converged and require_convergence:
        raise NoConvergence(f"{spec.name} did not converge: {best.message}")

    def loglik_at(point: np.ndarray) -> float:
        try:
            return egarch_loglik(point, returns, x)[0]
        except NonFinite:
            return -np.inf

    hessian_ok = True
    try:
        covariance = np.linalg.inv(-_hessian(loglik_at, params))
        variances = np.diag(covariance)
        if not np.all(np.isfinite(variances)) or np.any(variances <= 0):
            raise HessianSingular("Inverse Hessian has non-positive variances.")
        std_errors = np.sqrt(variances)
    except (np.linalg.LinAlgError, HessianSingular) as exc:
        hessian_ok = False
        std_errors = np.full(len(params), np.nan)
        if logger is not None:
            logger.log_numerical("egarch_hessian_singular", model=spec.name, message=str(exc))

    k = spec.k
    return EgarchFit(
        spec=spec,
        params=params,
        std_errors=std_errors,
        loglik=loglik,
        aic_norm=(-2.0 * loglik + 2.0 * k) / n,
        bic_norm=(-2.0 * loglik + k * math.log(n)) / n,
        sigma2=sigma2,
        converged=converged,
        n=n,
        hessian_ok=hessian_ok,
        message=str(best.message),
    )


def simulate_egarch(
    params: Sequence[float],
    n: int,
    rng: Optional[np.random.Generator] = None,
    covariates: Optional[np.ndarray] = None,
    burn: int = 500,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw ``n`` returns from the model at ``params``; returns ``(returns, sigma2)``.

    The recursion starts at ``ln sigma^2 = omega0 / (1 - tau)`` and runs ``burn`` discarded steps first
    (without covariates).
    """
    rng = rng if rng is not None else np.random.default_rng()
    params = np.asarray(params, dtype=float)
    x = _as_matrix(covariates, n)
    mu, omega0, omega, gamma, tau = params[:5]
    exogenous = np.concatenate([np.zeros(burn), x @ params[5:] if x.shape[1] else np.zeros(n)])
    shocks = rng.standard_normal(burn + n)
    log_variance = omega0 / (1.0 - tau) if abs(tau) < 1 else omega0
    eta = 0.0
    returns = np.empty(burn + n)
    sigma2 = np.empty(burn + n)
    for t in range(burn + n):
        log_variance = omega0 + omega * eta + gamma * abs(eta) + tau * log_variance + exogenous[t]
        sigma2[t] = math.exp(log_variance)
        eta = shocks[t]
        returns[t] = mu + math.sqrt(sigma2[t]) * eta
    return returns[burn:], sigma2[burn:]


def significance_stars(p_value: float) -> str:
    """``***`` below 0.01, ``**`` below 0.05, ``*`` below 0.1."""
    if not np.isfinite(p_value):
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def covariate_log_returns(levels: np.ndarray) -> np.ndarray:
    """Log returns of ``1 + level``; the first entry is ``nan``."""
    levels = np.asarray(levels, dtype=float)
    if np.any(levels <= -1.0):
        raise NonFinite("Covariate levels must be greater than -1 for a log return of 1 + level.")
    values = np.full(len(levels), np.nan)
    values[1:] = np.diff(np.log1p(levels))
    return values


@dataclass(frozen=True, eq=False)
class ModelComparison:
    """Side-by-side estimates of Model 0 and Model X."""

    fit0: EgarchFit
    fitX: EgarchFit
    table: pd.DataFrame = field(repr=False)

    @property
    def loglik_gain(self) -> float:
        """``loglik(Model X) - loglik(Model 0)``."""
        return self.fitX.loglik - self.fit0.loglik

    def summary(self) -> List[str]:
        """Readable ``name coef t stars`` lines for both models (stars from a normal approximation)."""
        lines = []
        for fit in (self.fit0, self.fitX):
            lines.append(f"{fit.spec.name}: loglik={fit.loglik:.3f} AIC={fit.aic_norm:.3f} BIC={fit.bic_norm:.3f}")
            for name, coef, t in zip(fit.param_names, fit.params, fit.t_values):
                stars = significance_stars(2.0 * norm.sf(abs(t))) if np.isfinite(t) else ""
                lines.append(f"  {name} {coef:.4f} {t:.3f}{stars}")
        return lines


def compare_models(fit0: EgarchFit, fitX: EgarchFit) -> ModelComparison:
    """
    Coefficients and t-values of both fits in one table, followed by loglik / AIC / BIC rows.

    Parameters Model 0 does not have are left blank in its columns; the criterion rows carry values in the
    ``*_coef`` columns only.
    """
    if fit0.n != fitX.n:
        raise VolatilityError("Both models must be fit on the same returns.")
    coefficients0 = dict(zip(fit0.param_names, zip(fit0.params, fit0.t_values)))
    coefficientsX = dict(zip(fitX.param_names, zip(fitX.params, fitX.t_values)))
    names = list(dict.fromkeys(fit0.param_names + fitX.param_names))
    rows: List[Tuple[str, float, float, float, float]] = []
    for name in names:
        coef0, t0 = coefficients0.get(name, (np.nan, np.nan))
        coefX, tX = coefficientsX.get(name, (np.nan, np.nan))
        rows.append((name, coef0, t0, coefX, tX))
    rows.append(("loglik", fit0.loglik, np.nan, fitX.loglik, np.nan))
    rows.append(("AIC", fit0.aic_norm, np.nan, fitX.aic_norm, np.nan))
    rows.append(("BIC", fit0.bic_norm, np.nan, fitX.bic_norm, np.nan))
    table = pd.DataFrame(rows, columns=list(TABLE_COLUMNS))
    return ModelComparison(fit0=fit0, fitX=fitX, table=table)


def variance_table(fit: EgarchFit, dates: Sequence, returns: np.ndarray) -> pd.DataFrame:
    """``date,ret,sigma`` rows: the returns against the fitted conditional standard deviation."""
    returns = np.asarray(returns, dtype=float)
    if len(dates) != fit.n or len(returns) != fit.n:
        raise VolatilityError("Dates and returns must match the fitted sample.")
    return pd.DataFrame(
        {"date": [str(d) for d in dates], "ret": returns, "sigma": np.sqrt(fit.sigma2)}
    )


def fits_to_dict(fits: Union[EgarchFit, Sequence[EgarchFit]]) -> List[Dict[str, object]]:
    """JSON-ready summaries for the run manifest."""
    fits = [fits] if isinstance(fits, EgarchFit) else list(fits)
    return [
        {
            "model": f.spec.name,
            "params": f.as_dict(),
            "loglik": f.loglik,
            "aic_norm": f.aic_norm,
            "bic_norm": f.bic_norm,
            "converged": f.converged,
            "hessian_ok": f.hessian_ok,
        }
        for f in fits
    ]
