"""Independent reference implementations used to compute expected values.

Everything here deliberately takes a different construction path from the
library: joint densities come from scipy building blocks and explicit
change-of-variables factors, and state-space quantities come from unrolling
the recursions into one multivariate normal instead of filtering.
"""

from itertools import product

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal, norm

from svlmc.kalman import CondGaussSSM


def svl_log_joint_bruteforce(y, h, phi, rho, sigma, mu):
    """log p(y, h | theta) via bivariate (eps, eta) pairs plus Jacobians."""
    T = len(y)
    lp = norm.logpdf(h[0], mu, sigma / np.sqrt(1.0 - phi ** 2))
    cov = np.array([[1.0, rho], [rho, 1.0]])
    for t in range(T - 1):
        eps = y[t] * np.exp(-0.5 * h[t])
        eta = (h[t + 1] - mu - phi * (h[t] - mu)) / sigma
        lp += multivariate_normal.logpdf([eps, eta], mean=[0.0, 0.0], cov=cov)
        lp += -0.5 * h[t] - np.log(sigma)  # d(eps, eta)/d(y_t, h_{t+1})
    eps_last = y[-1] * np.exp(-0.5 * h[-1])
    lp += norm.logpdf(eps_last) - 0.5 * h[-1]
    return float(lp)


def aux_component_cov(j, d, rho, table):
    """2x2 covariance of (xi_t, increment_t) under component j and sign d."""
    v1sq = table.v1[j] ** 2
    v2sq = rho ** 2 * table.v2[j] ** 2 + (1.0 - rho ** 2)
    c = d * rho * table.v1[j] * table.v2[j]
    return np.array([[v1sq, c], [c, v2sq]])


def aux_component_logpdf(xi, e, d, j, rho, table):
    mean = [table.m1[j], d * rho * table.m2[j]]
    return multivariate_normal.logpdf([xi, e], mean=mean,
                                      cov=aux_component_cov(j, d, rho, table))


def aux_config_logpdf(ystar, d, ht, config, phi, rho, sigma, mu, table):
    """log p(s=config) + log p(ht, ystar | s=config, theta)."""
    T = len(ystar)
    xi = ystar - mu - sigma * ht
    e = ht[1:] - phi * ht[:-1]
    lp = norm.logpdf(ht[0], 0.0, 1.0 / np.sqrt(1.0 - phi ** 2))
    for t, j in enumerate(config):
        lp += np.log(table.prob[j])
        if t < T - 1:
            lp += aux_component_logpdf(xi[t], e[t], d[t], j, rho, table)
        else:
            lp += norm.logpdf(xi[t], table.m1[j], table.v1[j])
    return float(lp)


def aux_marginal_enumeration(ystar, d, ht, phi, rho, sigma, mu, table):
    """Indicator-marginal log density by exhaustive config enumeration."""
    T = len(ystar)
    J = table.prob.size
    terms = [aux_config_logpdf(ystar, d, ht, config, phi, rho, sigma, mu, table)
             for config in product(range(J), repeat=T)]
    return float(logsumexp(terms))


def unroll_ssm_joint(m: CondGaussSSM):
    """Joint normal of states and observations by propagating the noise vector.

    Noise layout: (x1 deviation, u_1..u_T, w_1..w_{T-1}).  Returns
    (mean_y, cov_y, mean_x, cov_x, cov_xy).
    """
    T = len(m)
    dim = 1 + T + (T - 1)
    S = np.zeros((dim, dim))
    S[0, 0] = m.P1
    for t in range(T):
        S[1 + t, 1 + t] = m.H[t] ** 2
    for t in range(T - 1):
        S[1 + T + t, 1 + T + t] = m.W[t] ** 2
        S[1 + t, 1 + T + t] = S[1 + T + t, 1 + t] = m.C[t]
    X = np.zeros((T, dim))
    bx = np.zeros(T)
    X[0, 0] = 1.0
    bx[0] = m.a1
    for t in range(T - 1):
        X[t + 1] = m.phi * X[t]
        X[t + 1, 1 + T + t] += 1.0
        bx[t + 1] = m.g[t] + m.phi * bx[t]
    Y = np.zeros((T, dim))
    by = np.zeros(T)
    for t in range(T):
        Y[t] = m.Z[t] * X[t]
        Y[t, 1 + t] += 1.0
        by[t] = m.c[t] + m.Z[t] * bx[t]
    return by, Y @ S @ Y.T, bx, X @ S @ X.T, X @ S @ Y.T


def mvn_condition(mean_x, cov_x, cov_xy, mean_y, cov_y, y):
    """Conditional mean and covariance of x | y for a joint normal."""
    sol = np.linalg.solve(cov_y, y - mean_y)
    cmean = mean_x + cov_xy @ sol
    ccov = cov_x - cov_xy @ np.linalg.solve(cov_y, cov_xy.T)
    return cmean, ccov


def random_ssm(rng, T):
    """A random valid scalar-state model with correlated noises."""
    phi = rng.uniform(-0.95, 0.95)
    H = rng.uniform(0.2, 1.5, size=T)
    W = rng.uniform(0.2, 1.5, size=T - 1)
    r = rng.uniform(-0.9, 0.9, size=T - 1)
    return CondGaussSSM(
        c=rng.normal(size=T),
        Z=rng.uniform(0.3, 2.0, size=T) * rng.choice([-1.0, 1.0], size=T),
        H=H,
        g=0.5 * rng.normal(size=T - 1),
        phi=phi,
        W=W,
        C=r * H[:-1] * W,
        a1=rng.normal(),
        P1=rng.uniform(0.1, 2.0),
    )


def unroll_aux_joint(s, d, phi, rho, sigma, mu, table):
    """Joint normal of (ystar, htilde) built from the generative equations.

    Noise layout: (ht1 deviation, w_1..w_T, z_1..z_{T-1}); mu enters the
    observation mean as the constant `mu`.  Independent of the package's
    system assembly.
    """
    T = len(s)
    j = np.asarray(s) - 1
    dim = 1 + T + (T - 1)
    S = np.eye(dim)
    S[0, 0] = 1.0 / (1.0 - phi ** 2)
    Xh = np.zeros((T, dim))
    bh = np.zeros(T)
    Xh[0, 0] = 1.0
    for t in range(T - 1):
        Xh[t + 1] = phi * Xh[t]
        Xh[t + 1, 1 + t] += d[t] * rho * table.v2[j[t]]
        Xh[t + 1, 1 + T + t] += np.sqrt(1.0 - rho ** 2)
        bh[t + 1] = phi * bh[t] + d[t] * rho * table.m2[j[t]]
    Y = np.zeros((T, dim))
    by = np.zeros(T)
    for t in range(T):
        Y[t] = sigma * Xh[t]
        Y[t, 1 + t] += table.v1[j[t]]
        by[t] = mu + sigma * bh[t] + table.m1[j[t]]
    return by, Y @ S @ Y.T, bh, Xh @ S @ Xh.T, Xh @ S @ Y.T


def collapsed_oracle(s, d, ystar, phi, rho, sigma, table, mu_mean, mu_var):
    """log p(ystar | s, phi, rho, sigma) with mu integrated analytically.

    mu adds a rank-one mu_var * 11' to the covariance of the mu = mu_mean
    model (mu enters every observation with unit loading).
    """
    by, cov_y, _, _, _ = unroll_aux_joint(s, d, phi, rho, sigma, mu_mean, table)
    T = len(ystar)
    cov = cov_y + mu_var * np.ones((T, T))
    return float(multivariate_normal.logpdf(ystar, mean=by, cov=cov))


def mu_posterior_oracle(s, d, ystar, phi, rho, sigma, table, mu_mean, mu_var):
    """Exact posterior mean and variance of mu given ystar, s, (phi, rho, sigma)."""
    by, cov_y, _, _, _ = unroll_aux_joint(s, d, phi, rho, sigma, mu_mean, table)
    T = len(ystar)
    cov = cov_y + mu_var * np.ones((T, T))
    cross = mu_var * np.ones(T)
    sol = np.linalg.solve(cov, ystar - by)
    mean = mu_mean + cross @ sol
    var = mu_var - cross @ np.linalg.solve(cov, cross)
    return float(mean), float(var)
