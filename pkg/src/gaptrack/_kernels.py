"""Compiled numeric cores for the linear Gaussian state-space engine.

Observations are processed one scalar element at a time (the univariate
treatment of multivariate series), which keeps every update rank one and
lets missing entries drop out of the recursions entirely. Nonstationary
states carry an explicit infinity-part covariance, propagated separately
until it collapses to zero. All recursions below are the exact limits,
as the prior variance kappa on those states goes to infinity, of the
corresponding finite-kappa filter and smoother: expanding each quantity in
powers of 1/kappa and collecting orders yields the two-part covariance
updates in the filter and the (r0, r1) / (N0, N1, N2) backward recursions
in the smoother.

Kernels are JIT-compiled with numba when available; set GAPTRACK_NO_NUMBA=1
to run the pure-Python versions (identical results, much slower).
"""

from __future__ import annotations

import os

import numpy as np


def _identity_decorator(*args, **kwargs):
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap


if os.environ.get("GAPTRACK_NO_NUMBA"):
    njit = _identity_decorator
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover
        njit = _identity_decorator
        NUMBA_ENABLED = False

LOG_2PI = 1.8378770664093453

# Threshold below which a univariate step does not reduce the infinity part.
FINF_TOL = 1e-10
# Infinity-part matrix norm below which the diffuse phase is declared over.
COLLAPSE_TOL = 1e-8
# Floor applied to prediction-error variances before division.
F_FLOOR = 1e-12


@njit(cache=True)
def lyapunov_doubling(A, Q):
    """Solve X = A X A' + Q by doubling; requires spectral radius(A) < 1.

    After k iterations X holds sum_{j < 2^k} A^j Q A^j', so convergence is
    quadratic in the number of matrix products.
    """
    X = Q.copy()
    Ak = A.copy()
    for _ in range(100):
        inc = Ak @ X @ Ak.T
        X = X + inc
        scale = max(1.0, np.max(np.abs(X)))
        if np.max(np.abs(inc)) <= 1e-14 * scale:
            break
        Ak = Ak @ Ak
    return 0.5 * (X + X.T)


@njit(cache=True)
def filter_kernel(
    y,
    mask,
    Z,
    Hdiag,
    T,
    c,
    RQR,
    a1,
    Pstar1,
    Pinf1,
    store,
    a_pred,
    Ps_pred,
    Pi_pred,
    a_filt,
    Ps_filt,
    Pi_filt,
    step_t,
    step_i,
    step_v,
    step_Fs,
    step_Fi,
    step_Ks,
    step_Ki,
    step_phase,
    step_branch,
):
    """Exact-diffuse univariate Kalman filter forward pass.

    Returns (status, err_t, loglik, d, diffuse_done, n_steps). status != 0
    signals a non-finite likelihood contribution at time index err_t. When
    ``store`` is true the per-time moments and per-step update quantities
    are written into the caller-allocated output arrays; otherwise those
    arrays may be dummies.
    """
    n, p = y.shape
    m = a1.shape[0]

    a = a1.copy()
    Ps = Pstar1.copy()
    Pi = Pinf1.copy()
    Tt = np.ascontiguousarray(T.T)

    # work buffers reused across steps; rank-one updates write both
    # triangles from products that are symmetric by construction, so no
    # separate symmetrization pass is needed after measurement updates
    Ks = np.empty(m)
    Ki = np.empty(m)
    a_buf = np.empty(m)
    w1 = np.empty((m, m))
    w2 = np.empty((m, m))

    diffuse = np.max(np.abs(Pi)) > COLLAPSE_TOL
    loglik = 0.0
    d = 0
    s = 0

    for t in range(n):
        if store:
            a_pred[t] = a
            Ps_pred[t] = Ps
            Pi_pred[t] = Pi
        for i in range(p):
            if not mask[t, i]:
                continue
            z = Z[i]
            v = y[t, i] - z @ a
            np.dot(Ps, z, Ks)
            Fs = z @ Ks + Hdiag[i]
            if not (np.isfinite(v) and np.isfinite(Fs)):
                return 1, t, loglik, d, diffuse, s
            if diffuse:
                d += 1
                np.dot(Pi, z, Ki)
                Fi = z @ Ki
                if not np.isfinite(Fi):
                    return 1, t, loglik, d, diffuse, s
                if Fi > FINF_TOL:
                    # Infinity part absorbs the update; no residual term in
                    # the likelihood at this step.
                    if store:
                        step_branch[s] = 1
                        step_Fs[s] = Fs
                        step_Fi[s] = Fi
                        step_Ks[s] = Ks
                        step_Ki[s] = Ki
                    cm = v / Fi
                    c1 = Fs / (Fi * Fi)
                    c2 = 1.0 / Fi
                    for r in range(m):
                        a[r] += Ki[r] * cm
                    for r in range(m):
                        kir = Ki[r]
                        ksr = Ks[r]
                        for q in range(r, m):
                            val = Ps[r, q] + kir * Ki[q] * c1 - (
                                ksr * Ki[q] + kir * Ks[q]
                            ) * c2
                            Ps[r, q] = val
                            Ps[q, r] = val
                            val = Pi[r, q] - kir * Ki[q] * c2
                            Pi[r, q] = val
                            Pi[q, r] = val
                    loglik += -0.5 * (LOG_2PI + np.log(Fi))
                else:
                    Ff = max(Fs, F_FLOOR)
                    if store:
                        step_branch[s] = 0
                        step_Fs[s] = Ff
                        step_Fi[s] = 0.0
                        step_Ks[s] = Ks
                        step_Ki[s] = 0.0
                    cm = v / Ff
                    c2 = 1.0 / Ff
                    for r in range(m):
                        a[r] += Ks[r] * cm
                    for r in range(m):
                        ksr = Ks[r]
                        for q in range(r, m):
                            val = Ps[r, q] - ksr * Ks[q] * c2
                            Ps[r, q] = val
                            Ps[q, r] = val
                    loglik += -0.5 * (LOG_2PI + np.log(Ff) + v * v / Ff)
                if store:
                    step_t[s] = t
                    step_i[s] = i
                    step_v[s] = v
                    step_phase[s] = 1
                s += 1
                if np.max(np.abs(Pi)) < COLLAPSE_TOL:
                    Pi[:] = 0.0
                    diffuse = False
            else:
                Ff = max(Fs, F_FLOOR)
                if store:
                    step_t[s] = t
                    step_i[s] = i
                    step_v[s] = v
                    step_Fs[s] = Ff
                    step_Fi[s] = 0.0
                    step_Ks[s] = Ks
                    step_Ki[s] = 0.0
                    step_phase[s] = 0
                    step_branch[s] = 0
                cm = v / Ff
                c2 = 1.0 / Ff
                for r in range(m):
                    a[r] += Ks[r] * cm
                for r in range(m):
                    ksr = Ks[r]
                    for q in range(r, m):
                        val = Ps[r, q] - ksr * Ks[q] * c2
                        Ps[r, q] = val
                        Ps[q, r] = val
                loglik += -0.5 * (LOG_2PI + np.log(Ff) + v * v / Ff)
                s += 1
            if not np.isfinite(loglik):
                return 1, t, loglik, d, diffuse, s
        if store:
            a_filt[t] = a
            Ps_filt[t] = Ps
            Pi_filt[t] = Pi
        np.dot(T, a, a_buf)
        for r in range(m):
            a[r] = a_buf[r] + c[r]
        np.dot(T, Ps, w1)
        np.dot(w1, Tt, w2)
        for r in range(m):
            for q in range(r, m):
                val = 0.5 * (w2[r, q] + w2[q, r]) + RQR[r, q]
                Ps[r, q] = val
                Ps[q, r] = val
        if diffuse:
            np.dot(T, Pi, w1)
            np.dot(w1, Tt, w2)
            for r in range(m):
                for q in range(r, m):
                    val = 0.5 * (w2[r, q] + w2[q, r])
                    Pi[r, q] = val
                    Pi[q, r] = val
            if np.max(np.abs(Pi)) < COLLAPSE_TOL:
                Pi[:] = 0.0
                diffuse = False

    return 0, -1, loglik, d, not diffuse, s


@njit(cache=True)
def _rank1_symmetric_update(N, z, u, coef, m):
    """In place: N <- N - z u' - u z' + coef * z z' (keeps symmetry exact)."""
    for r in range(m):
        zr = z[r]
        ur = u[r]
        for q in range(r, m):
            val = N[r, q] - zr * u[q] - ur * z[q] + coef * zr * z[q]
            N[r, q] = val
            N[q, r] = val


@njit(cache=True)
def smoother_kernel(
    Z,
    T,
    a_pred,
    Ps_pred,
    Pi_pred,
    n_steps,
    step_t,
    step_i,
    step_v,
    step_Fs,
    step_Fi,
    step_Ks,
    step_Ki,
    step_phase,
    step_branch,
    want_cov,
    out_mean,
    out_cov,
):
    """Fixed-interval smoother backward pass matching the diffuse filter.

    Within the diffuse period the backward state runs at two orders,
    (r0, r1) for the mean and (N0, N1, N2) for the covariance; outside it
    only the zeroth order is active. The switch happens at the exact
    univariate step where the forward pass left the diffuse phase. Every
    per-observation update has the form N - z u' - u z' + c z z', so the
    backward pass costs one matrix-vector product per scalar observation;
    with ``want_cov`` false the N recursions are skipped entirely.
    """
    n = a_pred.shape[0]
    m = a_pred.shape[1]

    r0 = np.zeros(m)
    r1 = np.zeros(m)
    N0 = np.zeros((m, m))
    N1 = np.zeros((m, m))
    N2 = np.zeros((m, m))
    u0 = np.empty(m)
    u1 = np.empty(m)
    u2 = np.empty(m)
    vw = np.empty(m)
    v1 = np.empty(m)
    k = np.empty(m)
    w = np.empty(m)
    wrk = np.empty((m, m))
    Tt = np.ascontiguousarray(T.T)
    in_diffuse = False

    s = n_steps - 1
    for t in range(n - 1, -1, -1):
        while s >= 0 and step_t[s] == t:
            i = step_i[s]
            z = Z[i]
            v = step_v[s]
            if step_phase[s] == 1:
                if not in_diffuse:
                    in_diffuse = True
                    r1[:] = 0.0
                    if want_cov:
                        N1[:] = 0.0
                        N2[:] = 0.0
                if step_branch[s] == 1:
                    Fi = step_Fi[s]
                    Fs = step_Fs[s]
                    Ki = step_Ki[s]
                    Ks = step_Ks[s]
                    for r in range(m):
                        k[r] = Ki[r] / Fi
                        w[r] = (Ki[r] * (Fs / Fi) - Ks[r]) / Fi
                    kr0 = k @ r0
                    wr0 = w @ r0
                    kr1 = k @ r1
                    for r in range(m):
                        r1[r] += z[r] * (v / Fi + wr0 - kr1)
                        r0[r] -= z[r] * kr0
                    if want_cov:
                        np.dot(N0, k, u0)
                        np.dot(N1, k, u1)
                        np.dot(N2, k, u2)
                        np.dot(N0, w, vw)
                        np.dot(N1, w, v1)
                        ku0 = k @ u0
                        ku1 = k @ u1
                        ku2 = k @ u2
                        wu0 = w @ u0
                        wu1 = w @ u1
                        wvw = w @ vw
                        # order matters: each N update reads its own prior
                        # state only, via the precomputed products above
                        _rank1_symmetric_update(
                            N2, z, u2, ku2 - Fs / (Fi * Fi) - 2.0 * wu1 + wvw, m
                        )
                        for r in range(m):
                            zr = z[r]
                            for q in range(r, m):
                                val = N2[r, q] + zr * v1[q] + v1[r] * z[q]
                                N2[r, q] = val
                                N2[q, r] = val
                        _rank1_symmetric_update(
                            N1, z, u1, 1.0 / Fi + ku1 - 2.0 * wu0, m
                        )
                        for r in range(m):
                            zr = z[r]
                            for q in range(r, m):
                                val = N1[r, q] + zr * vw[q] + vw[r] * z[q]
                                N1[r, q] = val
                                N1[q, r] = val
                        _rank1_symmetric_update(N0, z, u0, ku0, m)
                else:
                    F = step_Fs[s]
                    Ks = step_Ks[s]
                    for r in range(m):
                        k[r] = Ks[r] / F
                    kr0 = k @ r0
                    kr1 = k @ r1
                    for r in range(m):
                        r0[r] += z[r] * (v / F - kr0)
                        r1[r] -= z[r] * kr1
                    if want_cov:
                        np.dot(N0, k, u0)
                        np.dot(N1, k, u1)
                        np.dot(N2, k, u2)
                        _rank1_symmetric_update(N0, z, u0, k @ u0 + 1.0 / F, m)
                        _rank1_symmetric_update(N1, z, u1, k @ u1, m)
                        _rank1_symmetric_update(N2, z, u2, k @ u2, m)
            else:
                F = step_Fs[s]
                Ks = step_Ks[s]
                for r in range(m):
                    k[r] = Ks[r] / F
                kr0 = k @ r0
                for r in range(m):
                    r0[r] += z[r] * (v / F - kr0)
                if want_cov:
                    np.dot(N0, k, u0)
                    _rank1_symmetric_update(N0, z, u0, k @ u0 + 1.0 / F, m)
            s -= 1

        Ps = Ps_pred[t]
        if in_diffuse:
            Pi = Pi_pred[t]
            out_mean[t] = a_pred[t] + Ps @ r0 + Pi @ r1
            if want_cov:
                np.dot(Ps, N0, wrk)
                cov = Ps - wrk @ Ps
                np.dot(Pi, N1, wrk)
                PiN1Ps = wrk @ Ps
                cov = cov - PiN1Ps.T - PiN1Ps
                np.dot(Pi, N2, wrk)
                cov = cov - wrk @ Pi
                out_cov[t] = 0.5 * (cov + cov.T)
        else:
            out_mean[t] = a_pred[t] + Ps @ r0
            if want_cov:
                np.dot(Ps, N0, wrk)
                cov = Ps - wrk @ Ps
                out_cov[t] = 0.5 * (cov + cov.T)

        if t > 0:
            r0 = Tt @ r0
            if want_cov:
                np.dot(Tt, N0, wrk)
                np.dot(wrk, T, N0)
            if in_diffuse:
                r1 = Tt @ r1
                if want_cov:
                    np.dot(Tt, N1, wrk)
                    np.dot(wrk, T, N1)
                    np.dot(Tt, N2, wrk)
                    np.dot(wrk, T, N2)


@njit(cache=True)
def state_recursion(T, c, Rsel, alpha1, shocks):
    """Iterate alpha[t+1] = T alpha[t] + c + R shocks[t] from alpha[0]=alpha1."""
    n = shocks.shape[0] + 1
    m = alpha1.shape[0]
    alpha = np.empty((n, m))
    alpha[0] = alpha1
    for t in range(1, n):
        alpha[t] = T @ alpha[t - 1] + c + Rsel @ shocks[t - 1]
    return alpha
