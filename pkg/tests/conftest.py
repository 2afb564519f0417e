import itertools

import numpy as np
import pytest

from activity_hmm import ActivityProfile, ModelParams, ModelSpec, SupportMask
from activity_hmm.simulate import simulate

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# -- random instances ---------------------------------------------------------


def random_profile(rng, n, T, zeros=True):
    f = rng.uniform(0.0, 1.0, (n, T))
    g = rng.uniform(0.0, 1.0, (n, T))
    if zeros:
        f[rng.random((n, T)) < 0.15] = 0.0
        g[rng.random((n, T)) < 0.15] = 0.0
    f[:, 0] = np.maximum(f[:, 0], 0.05)
    g[:, 0] = np.maximum(g[:, 0], 0.05)
    return ActivityProfile(f, g)


def random_params(rng, spec, fill=0.9):
    n, m = spec.n_states, spec.n_symbols
    mask = spec.support
    act = spec.activity
    tau = rng.uniform(0.0, 1.0, (n, n)) * mask.allowed_transitions
    eps = rng.uniform(0.0, 1.0, (m, n)) * mask.allowed_emissions
    for j in range(n):
        s = tau[:, j].sum()
        if s > 0 and act.f_star[j] > 0:
            tau[:, j] *= rng.uniform(0.2, fill) / (act.f_star[j] * s)
        s = eps[:, j].sum()
        if s > 0 and act.g_star[j] > 0:
            eps[:, j] *= rng.uniform(0.2, fill) / (act.g_star[j] * s)
    pi = rng.dirichlet(np.ones(n))
    return ModelParams(pi, tau, eps)


def random_instance(rng, n=None, m=None, T=None):
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    T = T or int(rng.integers(2, 9))
    spec = ModelSpec(n, m, T, random_profile(rng, n, T))
    params = random_params(rng, spec)
    _, y = simulate(spec, params, int(rng.integers(2**32)))
    return spec, params, y


# -- oracles ------------------------------------------------------------------


def path_joint(spec, params, x, y):
    """Pr(x, y) written straight from the model definition."""
    f, g = spec.activity.f, spec.activity.g
    tau, eps = params.tau, params.epsilon

    def a(i, j, t):
        if i != j:
            return f[j, t] * tau[i, j]
        return 1.0 - f[j, t] * sum(tau[r, j] for r in range(spec.n_states) if r != j)

    def b(s, j, t):
        if s != 0:
            return g[j, t] * eps[s - 1, j]
        return 1.0 - g[j, t] * eps[:, j].sum()

    p = params.pi[x[0]] * b(y[0], x[0], 0)
    for t in range(1, len(x)):
        p *= a(x[t], x[t - 1], t - 1) * b(y[t], x[t], t)
    return p


def enumerate_posteriors(spec, params, y):
    """gamma (N,T), xi (N,N,T-1), log Pr(y) by summing over every path."""
    n, T = spec.n_states, spec.horizon
    gamma = np.zeros((n, T))
    xi = np.zeros((n, n, T - 1))
    total = 0.0
    for x in itertools.product(range(n), repeat=T):
        p = path_joint(spec, params, x, y)
        if p == 0.0:
            continue
        total += p
        gamma[list(x), range(T)] += p
        for t in range(T - 1):
            xi[x[t + 1], x[t], t] += p
    return gamma / total, xi / total, np.log(total)


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def textbook_baum_welch(pi, A, B, y, n_iter):
    """Stationary Baum-Welch in the log domain.

    A[i, j] = Pr(next=i | cur=j); B[s, j] = Pr(y=s | state j), s in 0..M.
    Returns the list of (pi, A, B) after each iteration.
    """
    y = np.asarray(y)
    T = len(y)
    out = []
    with np.errstate(divide="ignore"):
        for _ in range(n_iter):
            lA, lB, lpi = np.log(A), np.log(B), np.log(pi)
            la = np.empty((T, len(pi)))
            lb = np.empty((T, len(pi)))
            la[0] = lpi + lB[y[0]]
            for t in range(1, T):
                la[t] = lB[y[t]] + _logsumexp(lA + la[t - 1][None, :], axis=1)
            lb[-1] = 0.0
            for t in range(T - 2, -1, -1):
                lb[t] = _logsumexp(lA + (lB[y[t + 1]] + lb[t + 1])[:, None], axis=0)
            ll = _logsumexp(la[-1], axis=0)
            gamma = np.exp(la + lb - ll)
            lxi = la[:-1, None, :] + lA[None] + (lB[y[1:]] + lb[1:])[:, :, None] - ll
            xi = np.exp(lxi)
            pi = gamma[0]
            A = xi.sum(axis=0) / gamma[:-1].sum(axis=0)[None, :]
            B = np.zeros_like(B)
            for s in range(B.shape[0]):
                B[s] = gamma[y == s].sum(axis=0)
            B = B / gamma.sum(axis=0)[None, :]
            out.append((pi, A, B))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


@pytest.fixture
def study_tau():
    return np.array(
        [
            [0.0, 0.298244, 0.0621274],
            [0.134788, 0.0, 0.3710750],
            [0.383490, 0.182008, 0.0],
        ]
    )


def constant_spec(n, m, T, mask=None, f=1.0, g=1.0):
    return ModelSpec(n, m, T, ActivityProfile(np.full((n, T), f), np.full((n, T), g)), mask)


def diagonal_mask(n):
    return SupportMask.diagonal_emissions(n)


# -- M-step optimality checks -------------------------------------------------


def _with_column(params, kind, j, col):
    tau, eps = params.tau.copy(), params.epsilon.copy()
    if kind == "tau":
        tau[:, j] = col
    else:
        eps[:, j] = col
    return ModelParams(params.pi, tau, eps)


def column_views(spec, params, post):
    """(kind, j, column, allowed, peak, case) for every tau and epsilon column."""
    from activity_hmm.mstep import EmissionSufficientStats, TransitionSufficientStats, constrained_column

    ts = TransitionSufficientStats.from_posterior(post)
    es = EmissionSufficientStats.from_posterior(post, spec.n_symbols)
    act, mask = spec.activity, spec.support
    out = []
    for j in range(spec.n_states):
        ok = mask.allowed_transitions[:, j]
        counts = np.where(ok, ts.Xi[:, j], 0.0)
        _, case = constrained_column(counts, ts.xi_diag[j], act.f[j, :-1], act.f_star[j], ok, params.tau[:, j])
        out.append(("tau", j, params.tau[:, j], ok, act.f_star[j], case))
        ok = mask.allowed_emissions[:, j]
        _, case = constrained_column(es.Lambda[:, j], es.lambda0[j], act.g[j], act.g_star[j], ok, params.epsilon[:, j])
        out.append(("epsilon", j, params.epsilon[:, j], ok, act.g_star[j], case))
    return out


def scaled_fd_gradient(spec, params, post, kind, j, rel=1e-6):
    """Central differences of the expected log-likelihood in the positive entries of one column.

    Each partial is multiplied by the entry and divided by T, so it is
    dimensionless and comparable across horizons.
    """
    from activity_hmm.mstep import expected_log_likelihood

    col = (params.tau if kind == "tau" else params.epsilon)[:, j]
    grads = []
    for i in np.flatnonzero(col > 0):
        h = rel * col[i]
        up, dn = col.copy(), col.copy()
        up[i] += h
        dn[i] -= h
        lu = expected_log_likelihood(spec, _with_column(params, kind, j, up), post)
        ld = expected_log_likelihood(spec, _with_column(params, kind, j, dn), post)
        grads.append(col[i] * (lu - ld) / (2 * h) / spec.horizon)
    return np.array(grads)


def perturbation_gap(spec, params, post, kind, j, allowed, peak, rng, n=200):
    """Largest gain in the expected log-likelihood over ``n`` random feasible perturbations of one column."""
    from activity_hmm.mstep import expected_log_likelihood

    base = expected_log_likelihood(spec, params, post)
    col = (params.tau if kind == "tau" else params.epsilon)[:, j]
    k = int(allowed.sum())
    if k == 0 or peak <= 0:
        return -np.inf
    scale = max(col.max(), 1.0 / (k * peak))
    best = -np.inf
    for _ in range(n):
        new = col.copy()
        new[allowed] += 10.0 ** rng.uniform(-5, -0.5) * scale * rng.standard_normal(k)
        new = np.clip(new, 0.0, None)
        if peak * new.sum() > 1.0:
            new *= rng.uniform(0.5, 1.0) / (peak * new.sum())
        val = expected_log_likelihood(spec, _with_column(params, kind, j, new), post)
        best = max(best, val - base)
    return best / max(1.0, abs(base))
