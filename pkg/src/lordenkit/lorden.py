"""Classical and generalized Lorden bounds on the mean overshoot, with Monte Carlo verification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gendist import DEFAULT_TOL, as_view, moment
from .renewal import Envelope, RenewalPolicy, recurrence_samples
from .reporting import dumps_json, rows_to_csv

__all__ = [
    "BoundReport", "VerificationTable", "classical_bound", "asymptotic_mean_overshoot",
    "generalized_bound", "moment_bound", "verify_bounds_mc",
]


def _first_two(view, tol):
    view = as_view(view, tol)
    m1, m2 = moment(view, 1, tol), moment(view, 2, tol)
    return m1, m2


def classical_bound(view, tol=DEFAULT_TOL):
    """``E xi^2 / E xi``; ``inf`` when the second moment diverges."""
    m1, m2 = _first_two(view, tol)
    if m1.diverged or m2.diverged:
        return math.inf
    return m2.value / m1.value


def asymptotic_mean_overshoot(view, tol=DEFAULT_TOL):
    """Limit of ``E B_t`` for an iid renewal process: ``E xi^2 / (2 E xi)``."""
    return 0.5 * classical_bound(view, tol)


@dataclass(frozen=True)
class BoundReport:
    mu_Phi: float
    m2_Phi: float
    mu_G: float
    classical_bound: float
    generalized_bound: float | None
    moment_bounds: list = field(default_factory=list)
    tol: float = DEFAULT_TOL
    diverged: bool = False

    def to_dict(self):
        return {
            "mu_Phi": self.mu_Phi, "m2_Phi": self.m2_Phi, "mu_G": self.mu_G,
            "classical_bound": self.classical_bound, "generalized_bound": self.generalized_bound,
            "moment_bounds": [{"order": l, "value": v} for l, v in self.moment_bounds],
            "tol": self.tol, "diverged": self.diverged,
        }

    def to_json(self):
        return dumps_json(self.to_dict())

    def to_csv(self):
        rows = [{"quantity": k, "value": v} for k, v in self.to_dict().items() if k != "moment_bounds"]
        rows += [{"quantity": f"moment_bound_{l}", "value": v} for l, v in self.moment_bounds]
        return rows_to_csv(["quantity", "value"], rows)


def _envelope_moments(envelope, orders, tol):
    heavy, light = as_view(envelope.phi, tol), as_view(envelope.Q, tol)
    mu_G = moment(light, 1, tol)
    phi_m = {l: moment(heavy, l, tol) for l in orders}
    return phi_m, mu_G


def generalized_bound(envelope: Envelope, tol=DEFAULT_TOL) -> BoundReport:
    """``mu_Phi + m2_Phi / (2 mu_G)`` plus the moment bounds for ``l = 1 .. k-1``."""
    orders = range(1, envelope.k + 1)
    phi_m, mu_G = _envelope_moments(envelope, orders, tol)
    mu, m2 = phi_m[1], phi_m[2]
    if mu.diverged or m2.diverged or mu_G.diverged:
        return BoundReport(mu.value, m2.value, mu_G.value, math.inf, None, [], tol, True)
    bound = mu.value + m2.value / (2.0 * mu_G.value)
    moments = []
    for l in range(1, envelope.k):
        hi = phi_m[l + 1]
        if hi.diverged:
            break
        moments.append((l, phi_m[l].value + hi.value / ((l + 1) * mu_G.value)))
    return BoundReport(mu.value, m2.value, mu_G.value, m2.value / mu.value, bound, moments, tol)


def moment_bound(envelope: Envelope, order: int, tol=DEFAULT_TOL):
    """``m_l(Phi) + m_{l+1}(Phi) / ((l + 1) mu_G)`` for ``1 <= l <= k - 1``."""
    if int(order) != order or not 1 <= order <= envelope.k - 1:
        raise ValueError(f"moment order must be an integer in [1, {envelope.k - 1}]")
    phi_m, mu_G = _envelope_moments(envelope, (order, order + 1), tol)
    if phi_m[order + 1].diverged or mu_G.diverged:
        return math.inf
    return phi_m[order].value + phi_m[order + 1].value / ((order + 1) * mu_G.value)


@dataclass(frozen=True)
class VerificationTable:
    rows: list
    bound: float
    n: int

    COLUMNS = ("t", "mean_B", "halfwidth_B", "margin_B", "mean_W", "halfwidth_W", "margin_W",
               "bound", "flag")

    @property
    def flagged(self):
        return [r["t"] for r in self.rows if r["flag"]]

    def to_dict(self):
        return {"bound": self.bound, "n": self.n, "rows": self.rows}

    def to_json(self):
        return dumps_json(self.to_dict())

    def to_csv(self):
        return rows_to_csv(list(self.COLUMNS), self.rows)


def verify_bounds_mc(policy: RenewalPolicy, envelope: Envelope, times, n, seed=0, workers=None,
                     bound=None, min_n=1000):
    """Empirical ``E B_t`` and ``E W_t`` against the generalized bound, one row per ``t``.

    A row is flagged when ``estimate - 3 sigma > bound`` for either recurrence time.
    """
    if n < min_n:
        raise ValueError(f"need at least {min_n} paths")
    if bound is None:
        report = generalized_bound(envelope)
        if report.diverged:
            raise ValueError("envelope moments diverge; no bound to verify")
        bound = report.generalized_bound
    B, W = recurrence_samples(policy, times, n, seed, workers, tag="verify")
    rows = []
    for j, t in enumerate(np.asarray(times, dtype=float)):
        row = {"t": float(t), "bound": float(bound)}
        flag = False
        for name, x in (("B", B[:, j]), ("W", W[:, j])):
            mean = float(x.mean())
            half = 3.0 * float(x.std(ddof=1)) / math.sqrt(n)
            row[f"mean_{name}"] = mean
            row[f"halfwidth_{name}"] = half
            row[f"margin_{name}"] = float(bound) - mean
            flag |= mean - half > bound
        row["flag"] = bool(flag)
        rows.append(row)
    return VerificationTable(rows, float(bound), int(n))
