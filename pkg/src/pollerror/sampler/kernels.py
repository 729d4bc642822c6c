"""Compiled per-contest Kalman filter / FFBS kernels for the random-walk model.

Each contest's latent path x_t = theta_t - v starts at x_0 = 0 and observes
u_i = y_i - v = x_{t_i} + alpha + e_i with e_i ~ N(0, var_i). Filtering is
linear in the data, so running the same gains over the data and over a vector
of ones gives the likelihood as an explicit quadratic in alpha:

    log p(u | alpha) = -0.5 * (logdet + c - 2 alpha b + alpha^2 a)

which is then either evaluated at a given alpha or integrated against the
alpha prior. Filtered means for any alpha are ``fu - alpha * f1``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True, error_model="numpy")
def rw_block(v, alpha, tau, gamma, mu_a, s2_a, starts, t, y, n, lengths,
             integrate_alpha, draw, za, zt, alpha_out, theta_out, a_out, b_out, k_out):
    """Filter every contest and optionally draw its latent block.

    ``a_out``, ``b_out``, ``k_out`` receive the coefficients of the path-
    marginalized log-likelihood ``k + alpha b - alpha^2 a / 2``. When drawing
    with ``integrate_alpha``, alpha is first redrawn from its conditional under
    an N(mu_a, s2_a) prior; otherwise the path is drawn given ``alpha``.
    Returns the index of a contest whose filter failed, or -1.
    """
    R = v.shape[0]
    D = 0
    for r in range(R):
        D = max(D, lengths[r])
    fu = np.empty(D + 1)
    f1 = np.empty(D + 1)
    fv = np.empty(D + 1)
    for r in range(R):
        L = lengths[r]
        g2 = gamma[r] * gamma[r]
        t2 = tau[r] * tau[r]
        a = 0.0
        b = 0.0
        c = 0.0
        logdet = 0.0
        mu_u = 0.0
        mu_1 = 0.0
        V = 0.0
        i = starts[r]
        end = starts[r + 1]
        for d in range(0, L + 1):
            if d > 0:
                V += g2
            while i < end and t[i] == d:
                var_i = y[i] * (1.0 - y[i]) / n[i] + t2
                F = V + var_i
                if not F > 0.0:
                    return r
                e_u = (y[i] - v[r]) - mu_u
                e_1 = 1.0 - mu_1
                a += e_1 * e_1 / F
                b += e_u * e_1 / F
                c += e_u * e_u / F
                logdet += LOG_2PI + math.log(F)
                K = V / F
                mu_u += K * e_u
                mu_1 += K * e_1
                V = V * var_i / F
                i += 1
            fu[d] = mu_u
            f1[d] = mu_1
            fv[d] = V
        a_out[r] = a
        b_out[r] = b
        k_out[r] = -0.5 * (logdet + c)
        if not draw:
            continue
        if integrate_alpha:
            prec = a + 1.0 / s2_a
            al = (b + mu_a / s2_a) / prec + za[r] / math.sqrt(prec)
        else:
            al = alpha[r]
        alpha_out[r] = al
        if L == 0:
            continue
        mean = fu[L] - al * f1[L]
        x = mean + math.sqrt(fv[L]) * zt[r, L - 1]
        theta_out[r, L - 1] = v[r] + x
        for d in range(L - 1, 0, -1):
            f = fu[d] - al * f1[d]
            G = fv[d] / (fv[d] + g2)
            m_d = f + G * (x - f)
            s_d = fv[d] * g2 / (fv[d] + g2)
            x = m_d + math.sqrt(s_d) * zt[r, d - 1]
            theta_out[r, d - 1] = v[r] + x
    return -1


@njit(cache=True, error_model="numpy")
def rw_smoothed_moments(v, alpha, tau, gamma, starts, t, y, n, lengths, mean_out, var_out):
    """Posterior mean and variance of each theta_t given alpha (RTS smoother)."""
    R = v.shape[0]
    D = mean_out.shape[1]
    fm = np.empty(D + 1)
    fv = np.empty(D + 1)
    for r in range(R):
        L = lengths[r]
        g2 = gamma[r] * gamma[r]
        t2 = tau[r] * tau[r]
        mu = 0.0
        V = 0.0
        i = starts[r]
        end = starts[r + 1]
        for d in range(0, L + 1):
            if d > 0:
                V += g2
            while i < end and t[i] == d:
                var_i = y[i] * (1.0 - y[i]) / n[i] + t2
                F = V + var_i
                K = V / F
                mu += K * ((y[i] - v[r] - alpha[r]) - mu)
                V = V * var_i / F
                i += 1
            fm[d] = mu
            fv[d] = V
        if L == 0:
            continue
        ms = fm[L]
        vs = fv[L]
        mean_out[r, L - 1] = v[r] + ms
        var_out[r, L - 1] = vs
        for d in range(L - 1, 0, -1):
            P = fv[d] + g2
            G = fv[d] / P
            ms = fm[d] + G * (ms - fm[d])
            vs = fv[d] + G * G * (vs - P)
            mean_out[r, d - 1] = v[r] + ms
            var_out[r, d - 1] = vs
    return 0


@njit(cache=True, error_model="numpy")
def contest_loglik(family, v, alpha, beta, tau, theta, starts, t, y, n, out_exact, out_plug):
    """Per-contest log-likelihood under the exact and plug-in binomial variance.

    family: 0 static, 1 linear-logit, 2 random walk. Returns the number of
    poll means that hit the [0, 1] clamp.
    """
    R = v.shape[0]
    clamped = 0
    for r in range(R):
        le = 0.0
        lp = 0.0
        t2 = tau[r] * tau[r]
        if family == 1:
            lv = math.log(v[r] / (1.0 - v[r]))
        for i in range(starts[r], starts[r + 1]):
            if family == 0:
                raw = v[r] + alpha[r]
            elif family == 1:
                raw = 1.0 / (1.0 + math.exp(-(lv + alpha[r] + beta[r] * t[i])))
            else:
                raw = (v[r] if t[i] == 0 else theta[r, t[i] - 1]) + alpha[r]
            p = min(max(0.0, raw), 1.0)
            if p != raw:
                clamped += 1
            d = y[i] - p
            ve = p * (1.0 - p) / n[i] + t2
            vp = y[i] * (1.0 - y[i]) / n[i] + t2
            le += -0.5 * (LOG_2PI + math.log(ve) + d * d / ve)
            lp += -0.5 * (LOG_2PI + math.log(vp) + d * d / vp)
        out_exact[r] = le
        out_plug[r] = lp
    return clamped
