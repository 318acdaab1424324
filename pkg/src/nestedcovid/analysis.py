"""Threshold and stability analysis of the reduced SEI model.

Closed forms for the basic reproduction number, the two equilibria, the
Jacobian and the cubic characteristic polynomial at the endemic point are
cross-checked numerically wherever the algebra could hide a slip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .between_host import BetweenHostParams, BetweenHostState, between_host_rhs

STABLE = "stable"
UNSTABLE = "unstable"
NOT_APPLICABLE = "not_applicable"

# real parts within this band of zero are not counted as decaying
DEADBAND = 1e-9
COEFFICIENT_TOL = 1e-6


class ParameterDomainError(ValueError):
    pass


class DegreeError(ValueError):
    pass


class NoTransmissionError(ValueError):
    pass


def _loss_rates(p: BetweenHostParams):
    """Exit rates from E and from I."""
    return p.mu + p.pi + p.gamma1, p.mu + p.gamma2 + p.d * p.N_h


def compute_R0(params: BetweenHostParams):
    """Basic reproduction number.

    Works with any numeric type supporting field arithmetic (floats,
    :class:`fractions.Fraction`).
    """
    p = params
    exposed_loss, infected_loss = _loss_rates(p)
    denominator = p.mu * exposed_loss * infected_loss
    if not denominator > 0:
        raise ParameterDomainError(f"R0 denominator mu(mu+pi+gamma1)(mu+gamma2+d N_h) = {denominator!r} is not positive")
    return p.beta * p.N_h * p.pi * p.Lambda / denominator


def disease_free_equilibrium(params: BetweenHostParams) -> BetweenHostState:
    return BetweenHostState(params.Lambda / params.mu, 0.0, 0.0)


def _formal_endemic(params: BetweenHostParams, R0: float) -> BetweenHostState | None:
    """Endemic-point formulas evaluated regardless of sign (None when undefined)."""
    p = params
    contact = p.beta * p.N_h
    if contact == 0 or p.pi == 0 or R0 == 0:
        return None
    _, infected_loss = _loss_rates(p)
    I_star = p.mu * (R0 - 1.0) / contact
    S_star = p.Lambda / (contact * I_star + p.mu)
    E_star = infected_loss * I_star / p.pi
    return BetweenHostState(S_star, E_star, I_star)


def equilibria(params: BetweenHostParams) -> tuple[BetweenHostState, BetweenHostState | None]:
    """Disease-free point and, when ``R0 > 1``, the endemic point."""
    R0 = compute_R0(params)
    E0 = disease_free_equilibrium(params)
    if not R0 > 1:
        return E0, None
    return E0, _formal_endemic(params, R0)


def equilibrium_residual(params: BetweenHostParams, state: BetweenHostState) -> float:
    return float(np.linalg.norm(between_host_rhs(params, state)))


def jacobian(params: BetweenHostParams, at: BetweenHostState) -> np.ndarray:
    p = params
    contact = p.beta * p.N_h
    exposed_loss, infected_loss = _loss_rates(p)
    S, I = at.S, at.I
    return np.array(
        [
            [-(contact * I + p.mu), 0.0, -contact * S],
            [contact * I, -exposed_loss, contact * S],
            [0.0, p.pi, -infected_loss],
        ],
        dtype=float,
    )


def characteristic_coefficients(params: BetweenHostParams) -> tuple[float, float, float]:
    """``(A1, B1, C1)`` of ``lambda^3 + A1 lambda^2 + B1 lambda + C1`` at the endemic point.

    For ``R0 <= 1`` the same expressions are evaluated at the formal
    (non-positive) endemic point, which keeps ``C1 = mu (mu+pi+gamma1)
    (mu+gamma2+d N_h) (R0 - 1)`` valid on both sides of the threshold.
    """
    p = params
    R0 = compute_R0(p)
    exposed_loss, infected_loss = _loss_rates(p)
    E1 = _formal_endemic(p, R0)
    if E1 is None:
        # R0 = 0 limit: beta N_h I* -> -mu and beta N_h pi S* -> exposed_loss * infected_loss
        return exposed_loss + infected_loss, 0.0, -p.mu * exposed_loss * infected_loss
    contact = p.beta * p.N_h
    S, I = E1.S, E1.I
    depletion = p.mu + contact * I
    A1 = 3 * p.mu + p.pi + contact * I + p.gamma1 + p.gamma2 + p.d * p.N_h
    B1 = (
        depletion * (2 * p.mu + p.pi + p.gamma1 + p.gamma2 + p.d * p.N_h)
        + exposed_loss * infected_loss
        - contact * p.pi * S
    )
    C1 = depletion * (exposed_loss * infected_loss - contact * p.pi * S) + contact**2 * S * I * p.pi
    return float(A1), float(B1), float(C1)


def simplified_C1(params: BetweenHostParams) -> float:
    exposed_loss, infected_loss = _loss_rates(params)
    return params.mu * exposed_loss * infected_loss * (compute_R0(params) - 1.0)


def matrix_characteristic_coefficients(matrix: np.ndarray) -> tuple[float, float, float]:
    """Coefficients of ``det(lambda I - J)`` from trace, principal minors and determinant."""
    J = np.asarray(matrix, dtype=float)
    minors = (
        J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
        + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1]
    )
    return float(-np.trace(J)), float(minors), float(-np.linalg.det(J))


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def eigenvalues_cubic(a3: float, a2: float, a1: float, a0: float) -> np.ndarray:
    """Roots of ``a3 l^3 + a2 l^2 + a1 l + a0``, sorted by (real, imag).

    Companion-matrix eigenvalues followed by a guarded Newton polish.
    """
    if a3 == 0:
        raise DegreeError("leading coefficient must be non-zero for a cubic")
    coeffs = np.array([a3, a2, a1, a0], dtype=float)
    roots = np.roots(coeffs).astype(complex)
    if roots.size < 3:  # np.roots drops trailing zeros, i.e. roots at 0
        roots = np.concatenate([roots, np.zeros(3 - roots.size, dtype=complex)])
    dcoeffs = np.polyder(coeffs)
    polished = []
    for r in roots:
        best, best_res = r, abs(np.polyval(coeffs, r))
        z = r
        for _ in range(3):
            slope = np.polyval(dcoeffs, z)
            if slope == 0:
                break
            with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
                # an overflowing iterate has a non-finite residual and is never kept
                z = z - np.polyval(coeffs, z) / slope
                res = abs(np.polyval(coeffs, z))
            if res < best_res:
                best, best_res = z, res
        polished.append(best)
    out = np.array(polished, dtype=complex)
    order = np.lexsort((out.imag, out.real))
    return out[order]


def classify(eigenvalues) -> str:
    """``stable`` iff every real part is below ``-DEADBAND``."""
    return STABLE if float(np.max(np.real(eigenvalues))) < -DEADBAND else UNSTABLE


def _sorted_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(matrix).astype(complex)
    return ev[np.lexsort((ev.imag, ev.real))]


@dataclass(frozen=True)
class StabilityReport:
    R0: float
    E0: BetweenHostState
    E1: BetweenHostState | None
    eigenvalues_E0: np.ndarray
    eigenvalues_E1: np.ndarray | None
    rh_coefficients: tuple[float, float, float]
    rh_margin: float
    classification_E0: str
    classification_E1: str
    coefficient_mismatch: float
    c1_sign_consistent: bool

    def to_record(self) -> dict:
        """Flat key/value view; absent entries are ``None``."""
        A1, B1, C1 = self.rh_coefficients
        record: dict = {"R0": self.R0}
        for name, state in (("E0", self.E0), ("E1", self.E1)):
            for comp in ("S", "E", "I"):
                record[f"{name}_{comp}"] = None if state is None else getattr(state, comp)
        for name, ev in (("E0", self.eigenvalues_E0), ("E1", self.eigenvalues_E1)):
            for i in range(3):
                record[f"eig_{name}_{i + 1}_re"] = None if ev is None else float(ev[i].real)
                record[f"eig_{name}_{i + 1}_im"] = None if ev is None else float(ev[i].imag)
        record.update(
            A1=A1,
            B1=B1,
            C1=C1,
            rh_margin=self.rh_margin,
            classification_E0=self.classification_E0,
            classification_E1=self.classification_E1,
            coefficient_mismatch=self.coefficient_mismatch,
            c1_sign_consistent=self.c1_sign_consistent,
        )
        return record


def routh_hurwitz(params: BetweenHostParams) -> StabilityReport:
    """Equilibria, spectra and the Routh-Hurwitz verdict for the endemic point.

    The closed-form ``(A1, B1, C1)`` are compared with the characteristic
    polynomial of the Jacobian at the (formal) endemic point; the largest
    relative gap is reported as ``coefficient_mismatch``.
    """
    R0 = float(compute_R0(params))
    E0, E1 = equilibria(params)
    A1, B1, C1 = characteristic_coefficients(params)
    margin = A1 * B1 - C1

    formal = _formal_endemic(params, R0)
    if formal is not None:
        numeric = matrix_characteristic_coefficients(jacobian(params, formal))
        mismatch = max(_relative_gap(a, b) for a, b in zip((A1, B1, C1), numeric))
    else:
        mismatch = 0.0
    c1_consistent = (C1 > 0) == (R0 > 1) and (C1 < 0) == (R0 < 1)

    eig_E0 = _sorted_eigenvalues(jacobian(params, E0))
    if E1 is None:
        eig_E1 = None
        class_E1 = NOT_APPLICABLE
    else:
        eig_E1 = _sorted_eigenvalues(jacobian(params, E1))
        class_E1 = STABLE if (A1 > 0 and C1 > 0 and margin > 0) else UNSTABLE
    return StabilityReport(
        R0=R0,
        E0=E0,
        E1=E1,
        eigenvalues_E0=eig_E0,
        eigenvalues_E1=eig_E1,
        rh_coefficients=(A1, B1, C1),
        rh_margin=margin,
        classification_E0=classify(eig_E0),
        classification_E1=class_E1,
        coefficient_mismatch=mismatch,
        c1_sign_consistent=c1_consistent,
    )


@dataclass(frozen=True)
class BifurcationQuantities:
    beta_star: float
    a_coeff: float
    b_coeff: float

    @property
    def forward(self) -> bool:
        """Transcritical exchange with a stable positive branch (``a < 0 < b``)."""
        return self.a_coeff < 0 < self.b_coeff


def critical_beta(params: BetweenHostParams) -> float:
    """Transmission coefficient at which ``R0 = 1``."""
    p = params
    if p.N_h == 0:
        raise NoTransmissionError("N_h = 0: no transmission for any beta")
    if p.pi == 0 or p.Lambda == 0:
        raise ParameterDomainError("R0 vanishes identically when pi or Lambda is zero")
    exposed_loss, infected_loss = _loss_rates(p)
    return p.mu * exposed_loss * infected_loss / (p.N_h * p.pi * p.Lambda)


def bifurcation_quantities(params: BetweenHostParams) -> BifurcationQuantities:
    beta_star = critical_beta(params)
    return BifurcationQuantities(
        beta_star=beta_star,
        a_coeff=-2.0 * beta_star**2 * params.N_h**2 * params.Lambda,
        b_coeff=params.N_h * params.Lambda,
    )

