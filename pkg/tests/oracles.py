"""Independent reference implementations used only by the test suite.

A continuous-time Kalman-Bucy filter and an RTS-style backward smoother,
Euler-discretized, written deliberately differently from the library
(explicit matrix inverses, batched across models, (B, n, 1) column-vector
states) so that agreement is evidence of correctness rather than shared code.
"""

import numpy as np


def kalman_bucy_filter(lam_x, lam_y, f_x, f_y, sxx, syy, sxy,
                       x_path, dt, mu0, r0):
    """Batched Euler-discretized Kalman-Bucy filter.

    Shapes: lam_x (B, k, l), lam_y (B, l, l), f_x (B, k, 1), f_y (B, l, 1),
    sxx (B, k, k), syy/r0 (B, l, l), sxy (B, k, l), x_path (B, J+1, k, 1),
    mu0 (B, l, 1). Returns means (B, J+1, l, 1) and covariances
    (B, J+1, l, l).
    """
    B, J1 = x_path.shape[0], x_path.shape[1]
    l = lam_y.shape[-1]
    syx = np.swapaxes(sxy, -1, -2)
    inv_sxx = np.linalg.inv(sxx)
    lam_x_t = np.swapaxes(lam_x, -1, -2)
    lam_y_t = np.swapaxes(lam_y, -1, -2)

    means = np.empty((B, J1, l, 1))
    covs = np.empty((B, J1, l, l))
    mu = mu0.copy()
    r = r0.copy()
    means[:, 0] = mu
    covs[:, 0] = r
    for j in range(J1 - 1):
        gain = (syx + r @ lam_x_t) @ inv_sxx
        innov = (x_path[:, j + 1] - x_path[:, j]
                 - (lam_x @ mu + f_x) * dt)
        mu = mu + (lam_y @ mu + f_y) * dt + gain @ innov
        r = r + (lam_y @ r + r @ lam_y_t + syy
                 - gain @ (sxy + lam_x @ r)) * dt
        r = 0.5 * (r + np.swapaxes(r, -1, -2))
        means[:, j + 1] = mu
        covs[:, j + 1] = r
    return means, covs


def rts_smoother(lam_y, f_y, syy, filt_means, filt_covs, dt):
    """Batched Euler-discretized continuous-time RTS backward smoother.

    Valid for models without cross noise between observed and hidden noise
    sources. filt_means (B, J+1, l, 1), filt_covs (B, J+1, l, l); returns
    smoothed means/covariances of the same shapes, endpoint copied from the
    filter.
    """
    B, J1, l, _ = filt_means.shape
    lam_y_t = np.swapaxes(lam_y, -1, -2)
    means = np.empty_like(filt_means)
    covs = np.empty_like(filt_covs)
    means[:, -1] = filt_means[:, -1]
    covs[:, -1] = filt_covs[:, -1]
    mu = filt_means[:, -1].copy()
    r = filt_covs[:, -1].copy()
    for j in range(J1 - 2, -1, -1):
        c = syy @ np.linalg.inv(filt_covs[:, j])
        mu = mu - (lam_y @ mu + f_y + c @ (mu - filt_means[:, j])) * dt
        g = lam_y + c
        r = r - (g @ r + r @ np.swapaxes(g, -1, -2) - syy) * dt
        r = 0.5 * (r + np.swapaxes(r, -1, -2))
        means[:, j] = mu
        covs[:, j] = r
    return means, covs


def random_stable_linear_system(rng, l):
    """Random stable LTI coefficient set (k=1, hidden dimension l, no cross
    noise) as plain arrays for both the oracle and the library."""
    lam_x = rng.uniform(-1.5, 1.5, size=(1, l))
    # Stable hidden drift: negative-diagonal plus a small skew coupling.
    diag = -rng.uniform(0.5, 2.0, size=l)
    lam_y = np.diag(diag)
    if l > 1:
        w = rng.uniform(-0.5, 0.5)
        lam_y[0, 1] += w
        lam_y[1, 0] -= w
    f_x = rng.uniform(-1.0, 1.0, size=1)
    f_y = rng.uniform(-1.0, 1.0, size=l)
    s1x = np.array([[rng.uniform(0.5, 1.5)]])
    s2y = np.diag(rng.uniform(0.5, 1.5, size=l))
    return dict(lambda_x=lam_x, lambda_y=lam_y, f_x=f_x, f_y=f_y,
                sigma1_x=s1x, sigma2_y=s2y)
