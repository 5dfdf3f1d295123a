"""Independent reference implementations used to validate the engine.

Everything in here is deliberately written the slow, textbook way: a plain
multivariate Kalman filter and Rauch-Tung-Striebel smoother, with diffuse
states approximated by a large but finite prior variance kappa. The engine
under test never calls any of this code.
"""

from __future__ import annotations

import numpy as np

KAPPA = 1e8


def initial_moments(model, kappa=KAPPA):
    """Large-kappa initialization matching the engine's stationary solve."""
    m = model.n_state
    a0 = np.zeros(m)
    P0 = np.zeros((m, m))
    stat = np.flatnonzero(~model.diffuse_flags)
    diff = np.flatnonzero(model.diffuse_flags)
    if stat.size:
        Tss = model.T[np.ix_(stat, stat)]
        Qss = model.rqr()[np.ix_(stat, stat)]
        # brute-force series sum for the unconditional covariance
        X = Qss.copy()
        term = Qss.copy()
        for _ in range(20000):
            term = Tss @ term @ Tss.T
            X += term
            if np.max(np.abs(term)) < 1e-16:
                break
        P0[np.ix_(stat, stat)] = X
        css = model.c[stat]
        if np.any(css != 0.0):
            a0[stat] = np.linalg.solve(np.eye(stat.size) - Tss, css)
    P0[diff, diff] = kappa
    return a0, P0


def multivariate_filter(model, y, mask, a0=None, P0=None, kappa=KAPPA):
    """Standard multivariate Kalman filter handling missing rows.

    Returns a dict with loglik, predicted and filtered moments.
    """
    n, p = y.shape
    m = model.n_state
    if a0 is None or P0 is None:
        a0, P0 = initial_moments(model, kappa)
    rqr = model.rqr()
    a = a0.copy()
    P = P0.copy()
    loglik = 0.0
    a_pred = np.zeros((n, m))
    P_pred = np.zeros((n, m, m))
    a_filt = np.zeros((n, m))
    P_filt = np.zeros((n, m, m))
    for t in range(n):
        a_pred[t] = a
        P_pred[t] = P
        obs = np.flatnonzero(mask[t])
        if obs.size:
            Zt = model.Z[obs]
            Ht = model.H[np.ix_(obs, obs)]
            v = y[t, obs] - Zt @ a
            F = Zt @ P @ Zt.T + Ht
            Finv = np.linalg.inv(F)
            sign, logdet = np.linalg.slogdet(F)
            loglik += -0.5 * (
                obs.size * np.log(2.0 * np.pi) + logdet + v @ Finv @ v
            )
            K = P @ Zt.T @ Finv
            a = a + K @ v
            P = P - K @ Zt @ P
            P = 0.5 * (P + P.T)
        a_filt[t] = a
        P_filt[t] = P
        a = model.T @ a + model.c
        P = model.T @ P @ model.T.T + rqr
        P = 0.5 * (P + P.T)
    return {
        "loglik": loglik,
        "predicted_mean": a_pred,
        "predicted_cov": P_pred,
        "filtered_mean": a_filt,
        "filtered_cov": P_filt,
    }


def rts_smoother(model, filt):
    """Rauch-Tung-Striebel backward pass on multivariate filter output."""
    a_filt = filt["filtered_mean"]
    P_filt = filt["filtered_cov"]
    a_pred = filt["predicted_mean"]
    P_pred = filt["predicted_cov"]
    n, m = a_filt.shape
    mean = np.zeros((n, m))
    cov = np.zeros((n, m, m))
    mean[-1] = a_filt[-1]
    cov[-1] = P_filt[-1]
    for t in range(n - 2, -1, -1):
        Pp = model.T @ P_filt[t] @ model.T.T + model.rqr()
        J = P_filt[t] @ model.T.T @ np.linalg.pinv(Pp)
        mean[t] = a_filt[t] + J @ (mean[t + 1] - (model.T @ a_filt[t] + model.c))
        cov[t] = P_filt[t] + J @ (cov[t + 1] - Pp) @ J.T
        cov[t] = 0.5 * (cov[t] + cov[t].T)
    return mean, cov


def univariate_kappa_filter(model, y, mask, kappa=KAPPA):
    """Brute-force large-kappa filter processing one scalar at a time.

    Keeps a single covariance matrix (no infinity-part bookkeeping), so it is
    an independent reference for the exact-diffuse engine. The sequential
    scalar updates keep the large-kappa cancellations rank one, which makes
    the recovered O(1) covariances accurate to about kappa * eps.
    """
    n, p = y.shape
    m = model.n_state
    a, P = initial_moments(model, kappa)
    Hd = np.diag(model.H)
    rqr = model.rqr()
    loglik = 0.0
    a_pred = np.zeros((n, m))
    P_pred = np.zeros((n, m, m))
    a_filt = np.zeros((n, m))
    P_filt = np.zeros((n, m, m))
    for t in range(n):
        a_pred[t] = a
        P_pred[t] = P
        for i in range(p):
            if not mask[t, i]:
                continue
            z = model.Z[i]
            v = y[t, i] - z @ a
            K = P @ z
            F = z @ K + Hd[i]
            a = a + K * (v / F)
            P = P - np.outer(K, K) / F
            P = 0.5 * (P + P.T)
            loglik += -0.5 * (np.log(2.0 * np.pi) + np.log(F) + v * v / F)
        a_filt[t] = a
        P_filt[t] = P
        a = model.T @ a + model.c
        P = model.T @ P @ model.T.T + rqr
        P = 0.5 * (P + P.T)
    return {
        "loglik": loglik,
        "predicted_mean": a_pred,
        "predicted_cov": P_pred,
        "filtered_mean": a_filt,
        "filtered_cov": P_filt,
    }


def stacked_diffuse_posterior(model, y, mask):
    """Exact diffuse smoothed moments via GLS on the stacked Gaussian.

    Treats the diffuse initial states as unknown fixed effects: stack all
    states into one vector A = G delta + b + (noise), condition the proper
    part on the observations, and estimate delta by generalized least
    squares. This is the exact infinite-variance limit with no large
    constants anywhere, so it is numerically clean; feasible for small
    n * n_state only. Requires H > 0 on observed rows.
    """
    n, p = y.shape
    m = model.n_state
    q = model.n_shock
    diff = np.flatnonzero(model.diffuse_flags)
    k = diff.size
    a0, P0 = initial_moments(model, kappa=0.0)
    P0[diff, diff] = 0.0

    W = np.zeros((m, k))
    W[diff, np.arange(k)] = 1.0

    # stacked deterministic part, diffuse loadings, and noise map
    nm = n * m
    b = np.zeros(nm)
    G = np.zeros((nm, k))
    nxi = m + (n - 1) * q
    N = np.zeros((nm, nxi))
    Tt = np.eye(m)
    b_t = a0.copy()
    G_t = W.copy()
    N[0:m, 0:m] = np.eye(m)
    for t in range(1, n):
        b_t = model.T @ b_t + model.c
        G_t = model.T @ G_t
        b[t * m : (t + 1) * m] = b_t
        G[t * m : (t + 1) * m] = G_t
        prev = N[(t - 1) * m : t * m]
        cur = model.T @ prev
        cur[:, m + (t - 1) * q : m + t * q] = model.R
        N[t * m : (t + 1) * m] = cur
    b[0:m] = a0
    G[0:m] = W

    Qxi = np.zeros((nxi, nxi))
    Qxi[0:m, 0:m] = P0
    for t in range(n - 1):
        Qxi[m + t * q : m + (t + 1) * q, m + t * q : m + (t + 1) * q] = model.Q

    Sigma_AA = N @ Qxi @ N.T

    rows = [(t, i) for t in range(n) for i in range(p) if mask[t, i]]
    ny = len(rows)
    M = np.zeros((ny, nm))
    Hd = np.diag(model.H)
    Hvec = np.zeros(ny)
    yvec = np.zeros(ny)
    for r, (t, i) in enumerate(rows):
        M[r, t * m : (t + 1) * m] = model.Z[i]
        Hvec[r] = Hd[i]
        yvec[r] = y[t, i]

    S = M @ Sigma_AA @ M.T + np.diag(Hvec)
    X = M @ G
    u0 = yvec - M @ b
    Sinv_u0 = np.linalg.solve(S, u0)
    Sinv_X = np.linalg.solve(S, X)
    Sigma_Au = Sigma_AA @ M.T
    W1 = np.linalg.solve(S, Sigma_Au.T).T

    if k:
        XtSX = X.T @ Sinv_X
        Vd = np.linalg.inv(XtSX)
        delta = Vd @ (X.T @ Sinv_u0)
        G_adj = G - W1 @ X
        mean = b + W1 @ u0 + G_adj @ delta
        cov = Sigma_AA - W1 @ Sigma_Au.T + G_adj @ Vd @ G_adj.T
    else:
        mean = b + W1 @ u0
        cov = Sigma_AA - W1 @ Sigma_Au.T
    mean = mean.reshape(n, m)
    cov_t = np.zeros((n, m, m))
    for t in range(n):
        cov_t[t] = cov[t * m : (t + 1) * m, t * m : (t + 1) * m]
    return mean, cov_t


def diffuse_loglik_correction(model, kappa=KAPPA):
    """Constant linking large-kappa and exact-diffuse log-likelihoods.

    Each of the rank reductions of the infinity part contributes
    -log(kappa)/2 to the finite-kappa likelihood; adding it back makes the
    two comparable (up to O(1/kappa)) once the diffuse phase has completed.
    """
    return 0.5 * int(model.diffuse_flags.sum()) * np.log(kappa)


def random_stable_model(rng, n_state, n_obs, n_diffuse=0, h_scale=0.0, min_diffuse_sv=0.0):
    """Random system with a stable stationary block and optional diffuse states.

    Diffuse states are random walks appended after the stationary block so
    the engine's block-structure requirements hold by construction. With
    ``min_diffuse_sv`` > 0, the diffuse block of Z is redrawn until its
    smallest singular value clears the floor; a weakly observed diffuse
    direction makes any finite-kappa reference converge like
    1/(kappa * sv^2), which would swamp comparison tolerances.
    """
    from gaptrack.statespace import SystemMatrices

    m_stat = n_state - n_diffuse
    A = rng.standard_normal((m_stat, m_stat))
    eig = np.max(np.abs(np.linalg.eigvals(A))) if m_stat else 1.0
    A = 0.7 * A / max(eig, 1e-12)
    T = np.zeros((n_state, n_state))
    T[:m_stat, :m_stat] = A
    for j in range(n_diffuse):
        T[m_stat + j, m_stat + j] = 1.0
    Z = rng.standard_normal((n_obs, n_state))
    if n_diffuse and min_diffuse_sv > 0.0:
        for _ in range(1000):
            sv = np.linalg.svd(Z[:, m_stat:], compute_uv=False)
            if sv.min() >= min_diffuse_sv:
                break
            Z[:, m_stat:] = rng.standard_normal((n_obs, n_diffuse))
    R = np.eye(n_state)
    Q = np.diag(rng.uniform(0.1, 1.0, size=n_state))
    H = np.diag(rng.uniform(0.1, 0.5, size=n_obs)) if h_scale else np.diag(
        np.full(n_obs, 0.2)
    )
    flags = np.zeros(n_state, dtype=bool)
    flags[m_stat:] = True
    return SystemMatrices(Z=Z, T=T, c=np.zeros(n_state), R=R, Q=Q, H=H, diffuse_flags=flags)


def simulate_from_model(model, n, rng, burn=50):
    """Simulate observations directly from the system matrices."""
    m = model.n_state
    q_sd = np.sqrt(np.diag(model.Q))
    h_sd = np.sqrt(np.diag(model.H))
    alpha = np.zeros(m)
    diff = np.flatnonzero(model.diffuse_flags)
    alpha[diff] = rng.standard_normal(diff.size)
    for _ in range(burn):
        stat = ~model.diffuse_flags
        alpha[stat] = (model.T @ alpha + model.c)[stat] + (
            model.R @ (rng.standard_normal(model.n_shock) * q_sd)
        )[stat]
    out = np.zeros((n, model.n_obs))
    states = np.zeros((n, m))
    for t in range(n):
        states[t] = alpha
        out[t] = model.Z @ alpha + rng.standard_normal(model.n_obs) * h_sd
        alpha = model.T @ alpha + model.c + model.R @ (
            rng.standard_normal(model.n_shock) * q_sd
        )
    return states, out
