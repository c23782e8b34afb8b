"""Closed-form statistics of the separable-pulse attack, by quadrature.

Every observable of the attack source is an average over the hidden pulse
polarization lambda, uniform on the circle.  The integrands are trigonometric
polynomials of degree at most 2*(n+m), so a uniform grid average with N nodes
is exact (to rounding) once N exceeds the degree; N = 512 leaves two orders
of magnitude of headroom over the order cap.

The eavesdropper error integrals run over quarter-period intervals where the
uniform-grid argument does not apply; those use Gauss-Legendre nodes instead,
again exact for polynomial integrands of this degree.

This module is the ground truth the Monte Carlo engine is tested against.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .polarization import TWO_PI, check_order

GRID_N = 512
_LAMBDA = np.arange(GRID_N) * TWO_PI / GRID_N

# Gauss-Legendre rule, plenty for integrands of trig degree <= 32.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)

# Canonical CHSH analyzer pairs: Alice {0, pi/4}, Bob {-pi/8, pi/8}.
CHSH_ALICE = (0.0, math.pi / 4)
CHSH_BOB = (-math.pi / 8, math.pi / 8)

# Attack orders reported by the standard performance table.
TABLE_ORDERS = ((1, 1), (2, 2), (2, 3), (3, 3))


@dataclass(frozen=True)
class AttackOrder:
    """Absorption orders (n photons to Alice, m photons to Bob)."""

    n: int
    m: int

    def __post_init__(self):
        object.__setattr__(self, "n", check_order(self.n))
        object.__setattr__(self, "m", check_order(self.m))

    def label(self):
        return f"({self.n},{self.m})"


@dataclass(frozen=True)
class OracleReport:
    """One row of the attack performance table."""

    attack: AttackOrder
    eta_alice: float
    eta_bob: float
    eta: float
    chsh: float
    visibility: float
    qber: float
    p_error_emitted: float
    p_error_sifted: float
    sum_visibility: float


def _as_attack(attack):
    if isinstance(attack, AttackOrder):
        return attack
    try:
        n, m = attack
    except (TypeError, ValueError):
        raise ConfigError(f"attack must be an AttackOrder or (n, m) pair, got {attack!r}")
    return AttackOrder(n, m)


def joint_probability(attack, theta_a, theta_b, k, l):
    """Coincidence probability P_kl for analyzer angles (theta_a, theta_b).

    Average over lambda of P_k^n(lambda, theta_a) * P_l^m(lambda + pi/2,
    theta_b).  Depends on the angles only through theta_a - theta_b.
    """
    attack = _as_attack(attack)
    if k not in (0, 1) or l not in (0, 1):
        raise ConfigError(f"outcome labels must be 0 or 1, got ({k!r}, {l!r})")
    a = _LAMBDA + theta_a
    b = _LAMBDA + math.pi / 2 + theta_b
    pa = np.cos(a) ** 2 if k == 0 else np.sin(a) ** 2
    pb = np.cos(b) ** 2 if l == 0 else np.sin(b) ** 2
    return float(np.mean(pa**attack.n * pb**attack.m))


def _joint_table(attack, delta):
    """All four P_kl as an array of shape (2, 2) + shape(delta)."""
    attack = _as_attack(attack)
    d = np.asarray(delta, dtype=float)
    lam = _LAMBDA.reshape((GRID_N,) + (1,) * d.ndim)
    ca = np.cos(lam) ** 2
    cb = np.cos(lam + math.pi / 2 - d) ** 2
    pa = (ca**attack.n, (1.0 - ca) ** attack.n)
    pb = (cb**attack.m, (1.0 - cb) ** attack.m)
    out = np.empty((2, 2) + d.shape)
    for k in (0, 1):
        for l in (0, 1):
            out[k, l] = np.mean(pa[k] * pb[l], axis=0)
    return out


def correlation(attack, delta):
    """Correlation E(delta) among detected coincidences.

    E = (P00 + P11 - P01 - P10) / sum(P_kl), with outcome k mapped to
    eigenvalue (-1)^(k+1).  Vectorized over delta.
    """
    p = _joint_table(attack, delta)
    num = p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0]
    den = p.sum(axis=(0, 1))
    out = num / den
    return float(out) if out.ndim == 0 else out


def coincidence_sum(attack, delta):
    """Probability that both sides click, sum of the four P_kl."""
    out = _joint_table(attack, delta).sum(axis=(0, 1))
    return float(out) if out.ndim == 0 else out


def _chsh_from_correlations(e):
    """Max over the four placements of the minus sign in the CHSH sum."""
    best = 0.0
    for neg in ((0, 0), (0, 1), (1, 0), (1, 1)):
        total = 0.0
        for p in (0, 1):
            for q in (0, 1):
                total += -e[p][q] if (p, q) == neg else e[p][q]
        best = max(best, abs(total))
    return best


def chsh(attack, angles_alice=CHSH_ALICE, angles_bob=CHSH_BOB):
    """CHSH parameter at two analyzer angles per side (canonical by default)."""
    if len(angles_alice) != 2 or len(angles_bob) != 2:
        raise ConfigError("chsh needs exactly two analyzer angles per side")
    e = [[correlation(attack, a - b) for b in angles_bob] for a in angles_alice]
    return _chsh_from_correlations(e)


def chsh_with_random_padding(attack, angles_alice=CHSH_ALICE, angles_bob=CHSH_BOB):
    """CHSH when every non-coincidence is replaced by fair random bits.

    Padding contributes zero expectation, so each correlation is scaled by
    the coincidence probability at its angle pair.  For any source built on
    local variables this stays at or below 2: the padded estimator closes
    the detection loophole.
    """
    e = [
        [
            correlation(attack, a - b) * coincidence_sum(attack, a - b)
            for b in angles_bob
        ]
        for a in angles_alice
    ]
    return _chsh_from_correlations(e)


def visibility_and_qber(attack):
    """Interference visibility |E(0)| and the implied QBER (1 - V) / 2."""
    v = abs(correlation(attack, 0.0))
    return v, (1.0 - v) / 2.0


def mean_detection_efficiency(order):
    """Lambda-averaged click probability of an order-n receiver."""
    order = check_order(order)
    return float(np.mean(np.cos(_LAMBDA) ** (2 * order) + np.sin(_LAMBDA) ** (2 * order)))


def coincidence_sum_visibility(attack, scan_points=181):
    """Modulation depth of the coincidence sum over delta in [0, pi/2].

    (max - min) / (max + min) of sum(P_kl).  Zero for a faithful singlet and
    whenever either side runs order 1; the residual angle dependence of
    higher orders is a passive signature of the attack.
    """
    deltas = np.linspace(0.0, math.pi / 2, scan_points)
    s = coincidence_sum(attack, deltas)
    return float((s.max() - s.min()) / (s.max() + s.min()))


def _quarter_integral(f, lo, hi):
    x = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    return 0.5 * (hi - lo) * float(np.sum(_GL_WEIGHTS * f(x)))


def eve_error_probability(attack):
    """Probability per emitted pair that both detected bits oppose the
    source's bet.

    The source bets on the majority channel of each side; with alpha the
    effective angle, errors occur with weight sin^(2(n+m)) on |alpha| < pi/4
    and cos^(2(n+m)) on the complement:
    (2/pi) * (int_0^{pi/4} sin^(2(n+m)) + int_{pi/4}^{pi/2} cos^(2(n+m))).
    """
    attack = _as_attack(attack)
    p = 2 * (attack.n + attack.m)
    s = _quarter_integral(lambda x: np.sin(x) ** p, 0.0, math.pi / 4)
    c = _quarter_integral(lambda x: np.cos(x) ** p, math.pi / 4, math.pi / 2)
    return (2.0 / math.pi) * (s + c)


def eve_error_sifted(attack):
    """Same error conditioned on the pair entering the sifted key."""
    return eve_error_probability(attack) / coincidence_sum(attack, 0.0)


def fs_click_probability(order, offset):
    """Polarimeter click rate in the fair-sampling test, lambda-averaged.

    For analyzer-to-polarimeter offset x = theta - phi the rate is
    (mean cos^2n) * (cos^2n(x) + sin^2n(x)): flat 1/2 at order 1,
    cos(4x)-modulated above.
    """
    order = check_order(order)
    base = float(np.mean(np.cos(_LAMBDA) ** (2 * order)))
    x = np.asarray(offset, dtype=float)
    out = base * (np.cos(x) ** (2 * order) + np.sin(x) ** (2 * order))
    return float(out) if out.ndim == 0 else out


def report(attack):
    """Full oracle report row for one attack order."""
    attack = _as_attack(attack)
    eta_a = mean_detection_efficiency(attack.n)
    eta_b = mean_detection_efficiency(attack.m)
    v, q = visibility_and_qber(attack)
    return OracleReport(
        attack=attack,
        eta_alice=eta_a,
        eta_bob=eta_b,
        eta=0.5 * (eta_a + eta_b),
        chsh=chsh(attack),
        visibility=v,
        qber=q,
        p_error_emitted=eve_error_probability(attack),
        p_error_sifted=eve_error_sifted(attack),
        sum_visibility=coincidence_sum_visibility(attack),
    )


def performance_table(orders=TABLE_ORDERS):
    """Oracle reports for a list of (n, m) attack orders."""
    return [report(o) for o in orders]


def click_probability_curve(orders=(1, 2, 3), points=181):
    """Click probability versus lam + theta for several orders.

    Returns (angles, {order: values}); the order-1 row is identically 1.
    """
    x = np.linspace(0.0, math.pi / 2, points)
    curves = {}
    for order in orders:
        order = check_order(order)
        curves[order] = np.cos(x) ** (2 * order) + np.sin(x) ** (2 * order)
    return x, curves
