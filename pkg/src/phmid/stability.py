"""
Eigenvalue-based stability certificates for the mixed implicit scheme.

One mixed implicit step is linear in the state around the gradient term.
Eliminating the half-step, the update obeys

    [dq; dr] = S [q_bar; r_bar] - [G^-1 / tau; 0] grad f(q_bar)

in the coordinates r = p - tau Q q, where Q = (D + A)/2 (x) I_m,
G = I/tau^2 + Q/tau + Q^2 is positive definite, q_bar is the step
midpoint, dq the step difference, and S the midpoint map returned by
`midpoint_map_qr` (the same relation in (q, p) coordinates uses
`midpoint_map_qp`; the two are exactly similar through the lower
triangular change of basis returned by `change_of_basis`).

A certificate (P12, P22, U, u, epsilon) proves global asymptotic
stability of the consensus optimum when three matrix inequalities hold:
the metric P = [[G, P12], [P12', P22]] is positive definite, the Schur
block [[U, P12], [P12', I]] is PSD with u > 0, and the decrease
inequality

    P S + S' P + B  <=  -u [[I, 0], [0, 0]]

holds, where B bounds the gradient feedback term: `gradient_bound_block`
for general strongly convex costs (Young's inequality with the certified
mu and Lipschitz constants), or `quadratic_gradient_block` with the exact
Hessians for quadratic costs. All inequalities are verified by symmetric
eigenvalue computations; no semidefinite programming is involved. A
closed-form certificate covers every graph with D^2 - A^2 PSD (cycles,
complete graphs) at every step size, and small enough step sizes on any
connected graph.
"""

import numpy as np

from .numerics import kron, require_symmetric

_EIG_TOL = 1e-9


class InvalidCertificateError(ValueError):
    """Certificate violates a structural requirement (e.g. u <= 0)."""


class InvalidEpsilonError(ValueError):
    """epsilon = 0 requires U = 0 (and P12 = 0) in the bound block."""


class NonQuadraticCostError(TypeError):
    """A quadratic-cost-only operation received another cost family."""


def _lifted(block_n, m):
    return kron(block_n, np.eye(m))


def _graph_level(graph, tau):
    """N-level pieces (L, Q, G) shared by the matrix builders."""
    lap = graph.laplacian()
    qmat = graph.q_matrix()
    gram = np.eye(graph.n) / tau ** 2 + qmat / tau + qmat @ qmat
    return lap, qmat, (gram + gram.T) / 2.0


def step_gram(graph, m, tau):
    """G(tau) = I/tau^2 + Q/tau + Q^2, lifted by (x) I_m.

    Positive definite for every tau > 0 (its smallest eigenvalue is at
    least 1/tau^2), and a polynomial in Q, with which it commutes.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    _, _, gram = _graph_level(graph, tau)
    return _lifted(gram, m)


def midpoint_map_qr(graph, m, tau):
    """Linear midpoint map of the step in (q, r = p - tau Q q) coordinates.

    [[ -G^-1 (L/tau + Q L + L Q),  -G^-1 L / tau ],
     [  tau L,                      0            ]]

    The gradient feedback enters only the q row, which is what makes the
    (q, r) coordinates the right ones for the decrease inequality.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    lap, qmat, gram = _graph_level(graph, tau)
    n = graph.n
    a11 = -np.linalg.solve(gram, lap / tau + qmat @ lap + lap @ qmat)
    a12 = -np.linalg.solve(gram, lap) / tau
    block = np.block([[a11, a12], [tau * lap, np.zeros((n, n))]])
    return _lifted(block, m)


def midpoint_map_qp(graph, m, tau):
    """Linear midpoint map of the step in the raw (q, p) coordinates."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    lap, qmat, gram = _graph_level(graph, tau)
    a11 = -np.linalg.solve(gram, (np.eye(graph.n) / tau + qmat) @ lap)
    a12 = -np.linalg.solve(gram, lap) / tau
    a21 = np.linalg.solve(gram, lap) / tau
    a22 = -np.linalg.solve(gram, qmat @ lap)
    return _lifted(np.block([[a11, a12], [a21, a22]]), m)


def change_of_basis(graph, m, tau):
    """Lower triangular T with [q; r] = T [q; p], i.e. r = p - tau Q q.

    Satisfies midpoint_map_qr = T midpoint_map_qp T^-1 exactly.
    """
    n = graph.n
    qmat = graph.q_matrix()
    block = np.block([[np.eye(n), np.zeros((n, n))], [-tau * qmat, np.eye(n)]])
    return _lifted(block, m)


def gradient_feedback_gain(graph, m, tau, lipschitz):
    """gamma(tau) = (lipschitz / tau) * ||G(tau)||, the cross-term gain."""
    gram = step_gram(graph, m, tau)
    return (lipschitz / tau) * float(np.linalg.eigvalsh(gram)[-1])


def gradient_bound_block(graph, m, tau, epsilon, mu, lipschitz, u_cap):
    """Young-inequality bound on the gradient feedback term.

    blockdiag( (gamma eps / 2 - mu / tau) I,  gamma U / (2 eps) )

    where U upper-bounds P12' P12 through the Schur condition. mu / tau
    is the certified decrease rate: strong convexity of every local cost
    with constant mu makes the stacked gradient map strongly monotone
    with the same constant. At epsilon = 0 the off-diagonal coupling must
    be absent, so U (and P12) are required to vanish and the lower block
    is zero.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    nm = graph.n * m
    u_cap = require_symmetric(u_cap, name="U")
    if u_cap.shape != (nm, nm):
        raise ValueError(f"U must be {nm}x{nm}")
    gamma = gradient_feedback_gain(graph, m, tau, lipschitz)
    top = (gamma * epsilon / 2.0 - mu / tau) * np.eye(nm)
    if epsilon == 0:
        if float(np.max(np.abs(u_cap))) > 0.0:
            raise InvalidEpsilonError("epsilon = 0 requires U = 0")
        bottom = np.zeros((nm, nm))
    else:
        bottom = gamma * u_cap / (2.0 * epsilon)
    out = np.zeros((2 * nm, 2 * nm))
    out[:nm, :nm] = top
    out[nm:, nm:] = bottom
    return out


def quadratic_gradient_block(graph, m, tau, hessians, p12):
    """Exact gradient feedback term for quadratic costs.

    [[ -H / tau,              0 ],
     [ -P12' G(tau) H / tau,  0 ]]

    with H the block diagonal of the per-agent Hessians. Only the
    symmetric part enters the decrease inequality.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    hessians = np.asarray(hessians, dtype=float)
    n, mm = graph.n, m
    nm = n * mm
    if hessians.shape != (n, mm, mm):
        raise NonQuadraticCostError(
            f"expected per-agent Hessian stack of shape {(n, mm, mm)}, "
            f"got {hessians.shape}")
    hbd = np.zeros((nm, nm))
    for i in range(n):
        hbd[i * mm:(i + 1) * mm, i * mm:(i + 1) * mm] = hessians[i]
    p12 = np.asarray(p12, dtype=float)
    gram = step_gram(graph, mm, tau)
    out = np.zeros((2 * nm, 2 * nm))
    out[:nm, :nm] = -hbd / tau
    out[nm:, :nm] = -(p12.T @ gram @ hbd) / tau
    return out


def hessian_blocks_from(ensemble):
    """Per-agent Hessian stack of a quadratic ensemble."""
    try:
        return ensemble.hessian_blocks()
    except TypeError as exc:
        raise NonQuadraticCostError(str(exc)) from exc


class LmiCertificate:
    """Decision variables of a stability certificate.

    P12, P22 and U are Nm x Nm matrices (P22 and U symmetric), u the
    claimed per-step decrease coefficient, epsilon the Young-inequality
    split (0 allowed only with U = P12 = 0).
    """

    def __init__(self, p12, p22, u_cap, u, epsilon):
        self.p12 = np.asarray(p12, dtype=float)
        self.p22 = require_symmetric(p22, name="P22")
        self.u_cap = require_symmetric(u_cap, name="U")
        self.u = float(u)
        self.epsilon = float(epsilon)
        if self.epsilon < 0:
            raise InvalidCertificateError("epsilon must be >= 0")
        if self.p12.shape != self.p22.shape or self.p12.shape != self.u_cap.shape:
            raise ValueError("P12, P22 and U must share their (Nm, Nm) shape")

    def __repr__(self):
        return (f"LmiCertificate(size={self.p12.shape[0]}, u={self.u}, "
                f"epsilon={self.epsilon})")


class CertificateVerdict:
    """Outcome of a certificate check.

    margins holds the three minimal-eigenvalue margins, in order: metric
    positivity (must clear +tol), Schur semidefiniteness (>= -tol), and
    decrease slack (>= -tol).
    """

    def __init__(self, feasible, margins):
        self.feasible = bool(feasible)
        self.margins = tuple(float(x) for x in margins)

    @property
    def metric_margin(self):
        return self.margins[0]

    @property
    def schur_margin(self):
        return self.margins[1]

    @property
    def decrease_margin(self):
        return self.margins[2]

    def __repr__(self):
        return f"CertificateVerdict(feasible={self.feasible}, margins={self.margins})"


def assemble_metric(cert, graph, m, tau):
    """Lyapunov metric P = [[G(tau), P12], [P12', P22]]."""
    gram = step_gram(graph, m, tau)
    p = np.block([[gram, cert.p12], [cert.p12.T, cert.p22]])
    return (p + p.T) / 2.0


def _min_eig(mat):
    return float(np.linalg.eigvalsh((mat + mat.T) / 2.0)[0])


def _decrease_margin(p, smap, bound, u):
    nm = p.shape[0] // 2
    x = p @ smap + smap.T @ p + bound
    target = np.zeros_like(x)
    target[:nm, :nm] = u * np.eye(nm)
    return _min_eig(-(x + target))


def check_certificate(cert, graph, m, tau, mu, lipschitz, tol=_EIG_TOL):
    """Verify a certificate for strongly convex costs with constants (mu, L).

    Returns a CertificateVerdict; raises InvalidCertificateError when the
    claimed decrease coefficient u is not positive.
    """
    if cert.u <= 0:
        raise InvalidCertificateError("certificate requires u > 0")
    nm = graph.n * m
    p = assemble_metric(cert, graph, m, tau)
    metric_margin = _min_eig(p)
    schur = np.block([[cert.u_cap, cert.p12], [cert.p12.T, np.eye(nm)]])
    schur_margin = _min_eig(schur)
    bound = gradient_bound_block(graph, m, tau, cert.epsilon, mu, lipschitz,
                                 cert.u_cap)
    smap = midpoint_map_qr(graph, m, tau)
    decrease_margin = _decrease_margin(p, smap, bound, cert.u)
    feasible = (metric_margin >= tol and schur_margin >= -tol
                and decrease_margin >= -tol)
    return CertificateVerdict(feasible, (metric_margin, schur_margin,
                                         decrease_margin))


def check_certificate_quadratic(cert, graph, m, tau, hessians, tol=_EIG_TOL):
    """Verify a certificate against the exact quadratic-cost feedback term.

    Tests metric positivity, u > 0 and the decrease inequality with the
    per-agent Hessians in place of the (mu, L) bound; the Schur condition
    is not required in the quadratic variant (its margin is still
    reported for diagnostics).
    """
    if cert.u <= 0:
        raise InvalidCertificateError("certificate requires u > 0")
    nm = graph.n * m
    p = assemble_metric(cert, graph, m, tau)
    metric_margin = _min_eig(p)
    schur = np.block([[cert.u_cap, cert.p12], [cert.p12.T, np.eye(nm)]])
    schur_margin = _min_eig(schur)
    bound = quadratic_gradient_block(graph, m, tau, hessians, cert.p12)
    bound = (bound + bound.T) / 2.0
    smap = midpoint_map_qr(graph, m, tau)
    decrease_margin = _decrease_margin(p, smap, bound, cert.u)
    feasible = metric_margin >= tol and decrease_margin >= -tol
    return CertificateVerdict(feasible, (metric_margin, schur_margin,
                                         decrease_margin))


def closed_form_certificate(graph, m, tau, mu):
    """The certificate that needs no search.

    P12 = 0, U = 0, P22 = I/tau^2, u = mu * min(1, 1/tau), epsilon = 0.
    With these choices the decrease inequality reduces to the positive
    semidefiniteness of L/tau + Q L + L Q (note Q L + L Q equals
    (D^2 - A^2) (x) I_m exactly), so the certificate verifies on every
    graph with D^2 - A^2 PSD at every step size, and on any connected
    graph for small enough steps. The decrease coefficient is capped at
    mu / tau, the rate actually guaranteed per step, so certified runs
    pass the trajectory audit.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if not mu > 0:
        raise ValueError("mu must be > 0")
    nm = graph.n * m
    zero = np.zeros((nm, nm))
    return LmiCertificate(p12=zero, p22=np.eye(nm) / tau ** 2, u_cap=zero,
                          u=mu * min(1.0, 1.0 / tau), epsilon=0.0)


def search_certificate(graph, m, tau, mu=None, lipschitz=None, hessians=None,
                       tol=_EIG_TOL):
    """Scan a one-parameter certificate family; no semidefinite programming.

    The family is P12 = 0, U = 0, P22 = alpha I, u = beta, epsilon = 0,
    scanned over a log grid of alpha (the closed-form alpha = 1/tau^2
    first) and descending beta below the certified rate. Returns the
    first certificate that verifies - against the quadratic check when
    `hessians` is given, else against the (mu, lipschitz) check - or
    None when the whole family fails. None is NOT evidence of
    instability; the family is only sufficient.
    """
    if hessians is not None:
        hessians = np.asarray(hessians, dtype=float)
        if mu is None:
            mu = min(float(np.linalg.eigvalsh(h)[0]) for h in hessians)
    if mu is None or not mu > 0:
        raise ValueError("a positive mu is required (given or from Hessians)")
    nm = graph.n * m
    zero = np.zeros((nm, nm))
    alphas = [1.0 / tau ** 2] + list(np.logspace(-4, 4, 17))
    rate = mu / tau
    betas = [mu * min(1.0, 1.0 / tau)] + list(rate * np.logspace(0, -8, 17))
    seen = set()
    for alpha in alphas:
        for beta in betas:
            key = (round(float(alpha), 15), round(float(beta), 18))
            if key in seen or beta <= 0:
                continue
            seen.add(key)
            cert = LmiCertificate(p12=zero, p22=alpha * np.eye(nm),
                                  u_cap=zero, u=beta, epsilon=0.0)
            if hessians is not None:
                verdict = check_certificate_quadratic(cert, graph, m, tau,
                                                      hessians, tol)
            else:
                verdict = check_certificate(cert, graph, m, tau, mu,
                                            lipschitz, tol)
            if verdict.feasible:
                return cert
    return None


def audit_lyapunov(trace, cert, equilibrium, graph, tau):
    """Largest per-step violation of the certified decrease along a run.

    Transforms the recorded states to (q, r = p - tau Q q), builds
    V = e' P e / 2 around the equilibrium and returns

        max_k  V(e[k+1]) - V(e[k]) + u * ||q_bar[k] - q*||^2

    which is <= 0 (up to solver round-off) whenever the certificate
    genuinely certifies the run. Positive values are diagnostic only.
    """
    q_hist = getattr(trace, "q_history", None)
    p_hist = getattr(trace, "p_history", None)
    if q_hist is None or p_hist is None:
        raise ValueError("trace carries no state history; rerun with "
                         "record_lyapunov=True")
    q_hist = np.asarray(q_hist, dtype=float)
    p_hist = np.asarray(p_hist, dtype=float)
    if q_hist.shape != p_hist.shape or q_hist.ndim != 3:
        raise ValueError("state history must be (steps+1, N, m) arrays")
    steps_plus, n, m = q_hist.shape
    if n != graph.n or equilibrium.q.shape != (n, m):
        raise ValueError("history, graph and equilibrium disagree on shape")
    if steps_plus < 2:
        return 0.0
    qmat = graph.q_matrix()
    r_hist = p_hist - tau * np.einsum("ab,kbm->kam", qmat, q_hist)
    r_star = equilibrium.p - tau * (qmat @ equilibrium.q)
    err = np.concatenate([
        (q_hist - equilibrium.q[None]).reshape(steps_plus, n * m),
        (r_hist - r_star[None]).reshape(steps_plus, n * m)], axis=1)
    metric = assemble_metric(cert, graph, m, tau)
    values = 0.5 * np.einsum("ki,ij,kj->k", err, metric, err)
    q_mid = (q_hist[:-1] + q_hist[1:]) / 2.0
    dev = np.sum((q_mid - equilibrium.q[None]) ** 2, axis=(1, 2))
    violations = values[1:] - values[:-1] + cert.u * dev
    return float(np.max(violations))
