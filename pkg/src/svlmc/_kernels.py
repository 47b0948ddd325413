"""Compiled cores for the Kalman recursions.

All kernels operate on plain float arrays, take no RNG (normal draws are
passed in), and report numerical breakdown through an integer status instead
of raising: 0 = ok, 1 = non-positive innovation variance, 2 = a filter
variance fell below the -1e-10 clamping tolerance.

Correlated observation/state noise (cross covariance C_t between u_t and the
state increment noise) is handled by the standard uncorrelated-form
substitution eta_t = (C_t/H_t^2) u_t + eta*_t, which shifts the transition
intercept by (C_t/H_t^2)(y_t - c_t) and the coefficient by -C_t Z_t / H_t^2.
"""

import math

import numpy as np
from numba import njit

_LOG_2PI = math.log(2.0 * math.pi)
_VAR_TOL = -1e-10

STATUS_OK = 0
STATUS_INNOV = 1
STATUS_VARIANCE = 2


@njit(cache=True)
def scalar_filter(ystar, c, Z, H2, g, phi, W2, C, a1, P1):
    """Kalman filter for a scalar-state model with correlated noises.

    Transition arrays g, W2, C are read at t = 0..T-2.  Returns
    (loglik, pred_mean, pred_var, filt_mean, filt_var, innov, innov_var,
    status).
    """
    T = ystar.shape[0]
    pred_mean = np.empty(T)
    pred_var = np.empty(T)
    filt_mean = np.empty(T)
    filt_var = np.empty(T)
    innov = np.empty(T)
    innov_var = np.empty(T)
    loglik = 0.0
    status = STATUS_OK
    a = a1
    P = P1
    for t in range(T):
        pred_mean[t] = a
        pred_var[t] = P
        nu = ystar[t] - c[t] - Z[t] * a
        F = Z[t] * Z[t] * P + H2[t]
        innov[t] = nu
        innov_var[t] = F
        if F <= 0.0 or not math.isfinite(F):
            status = STATUS_INNOV
            break
        loglik += -0.5 * (_LOG_2PI + math.log(F) + nu * nu / F)
        PZ = P * Z[t]
        fm = a + PZ * nu / F
        fv = P - PZ * PZ / F
        if fv < 0.0:
            if fv < _VAR_TOL:
                status = STATUS_VARIANCE
                break
            fv = 0.0
        filt_mean[t] = fm
        filt_var[t] = fv
        if t < T - 1:
            K = (phi * PZ + C[t]) / F
            a = g[t] + phi * a + K * nu
            P = phi * phi * P + W2[t] - K * K * F
            if P < 0.0:
                if P < _VAR_TOL:
                    status = STATUS_VARIANCE
                    break
                P = 0.0
    return loglik, pred_mean, pred_var, filt_mean, filt_var, innov, innov_var, status


@njit(cache=True)
def ffbs_draw(ystar, c, Z, H2, g, phi, W2, C, a1, P1, normals):
    """One joint draw from p(state | ystar) by filtering then backward sampling.

    normals: T iid N(0,1) variates, consumed back to front.  Returns
    (draw, status).
    """
    T = ystar.shape[0]
    filt_mean = np.empty(T)
    filt_var = np.empty(T)
    a = a1
    P = P1
    status = STATUS_OK
    for t in range(T):
        nu = ystar[t] - c[t] - Z[t] * a
        F = Z[t] * Z[t] * P + H2[t]
        if F <= 0.0 or not math.isfinite(F):
            return np.empty(0), STATUS_INNOV
        PZ = P * Z[t]
        fm = a + PZ * nu / F
        fv = P - PZ * PZ / F
        if fv < 0.0:
            if fv < _VAR_TOL:
                return np.empty(0), STATUS_VARIANCE
            fv = 0.0
        filt_mean[t] = fm
        filt_var[t] = fv
        if t < T - 1:
            K = (phi * PZ + C[t]) / F
            a = g[t] + phi * a + K * nu
            P = phi * phi * P + W2[t] - K * K * F
            if P < 0.0:
                if P < _VAR_TOL:
                    return np.empty(0), STATUS_VARIANCE
                P = 0.0
    x = np.empty(T)
    x[T - 1] = filt_mean[T - 1] + math.sqrt(filt_var[T - 1]) * normals[T - 1]
    for t in range(T - 2, -1, -1):
        # transition in uncorrelated form, conditional on y_t
        ratio = C[t] / H2[t]
        phit = phi - ratio * Z[t]
        gt = g[t] + ratio * (ystar[t] - c[t])
        Wt2 = W2[t] - C[t] * C[t] / H2[t]
        B = phit * phit * filt_var[t] + Wt2
        if B <= 0.0:
            mean = filt_mean[t]
            var = filt_var[t]
        else:
            G = filt_var[t] * phit / B
            mean = filt_mean[t] + G * (x[t + 1] - gt - phit * filt_mean[t])
            var = filt_var[t] - G * G * B
        if var < 0.0:
            if var < _VAR_TOL:
                return np.empty(0), STATUS_VARIANCE
            var = 0.0
        x[t] = mean + math.sqrt(var) * normals[t]
    return x, status


@njit(cache=True)
def augmented_filter(ystar, c, H2, g, W2, C, phi, sigma, P1_h, mu_mean, mu_var):
    """Filter for the model with state (htilde_t, mu), mu constant.

    Observation: ystar_t = sigma*htilde_t + mu + c_t + u_t.  Returns
    (loglik, mu_filt_mean, mu_filt_var, status); the mu moments at t = T are
    the exact conditional of mu given all observations.
    """
    T = ystar.shape[0]
    ah = 0.0
    am = mu_mean
    Phh = P1_h
    Phm = 0.0
    Pmm = mu_var
    loglik = 0.0
    status = STATUS_OK
    fm_m = mu_mean
    fv_m = mu_var
    for t in range(T):
        nu = ystar[t] - c[t] - sigma * ah - am
        Mh = sigma * Phh + Phm
        Mm = sigma * Phm + Pmm
        F = sigma * Mh + Mm + H2[t]
        if F <= 0.0 or not math.isfinite(F):
            return loglik, fm_m, fv_m, STATUS_INNOV
        loglik += -0.5 * (_LOG_2PI + math.log(F) + nu * nu / F)
        fm_m = am + Mm * nu / F
        fv_m = Pmm - Mm * Mm / F
        if fv_m < 0.0:
            if fv_m < _VAR_TOL:
                return loglik, fm_m, fv_m, STATUS_VARIANCE
            fv_m = 0.0
        if t < T - 1:
            Kh = (phi * Mh + C[t]) / F
            Km = Mm / F
            ah = g[t] + phi * ah + Kh * nu
            am = am + Km * nu
            Phh = phi * phi * Phh + W2[t] - Kh * Kh * F
            Phm = phi * Phm - Kh * Km * F
            Pmm = Pmm - Km * Km * F
            if Phh < 0.0 or Pmm < 0.0:
                if Phh < _VAR_TOL or Pmm < _VAR_TOL:
                    return loglik, fm_m, fv_m, STATUS_VARIANCE
                if Phh < 0.0:
                    Phh = 0.0
                if Pmm < 0.0:
                    Pmm = 0.0
    return loglik, fm_m, fv_m, status
