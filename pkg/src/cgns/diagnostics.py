"""Pathwise skill metrics and uncertainty-spectrum diagnostics.

Squared temporal statistics follow the divide-by-J convention (sums run over
all J + 1 grid points, normalized by J), SRMSE standardizes by the truth's
temporal standard deviation, and the anomaly correlation is the centered
trace inner product. The ACF is the biased trace-form estimator (so lag 0 is
exactly 1 and the autocovariance sequence stays PSD), and spectra come from
Welch's method. All functions are pure maps over immutable arrays.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from .errors import DegenerateSeries
from .filtering import PosteriorSeries
from .linalg import TOL_PSD, symmetrize
from .model import CgnsModel, auxiliary, evaluate, gramians

#: Default time units discarded before equilibrium (ACF/PSD) estimates.
DEFAULT_BURN_IN = 10.0

#: Default threshold, in truth standard deviations, defining extreme events.
DEFAULT_EXTREME_THETA = 1.0


@dataclass(frozen=True)
class MetricReport:
    """Scalar pathwise skill summary for one estimate against the truth."""

    srmse: float
    corr: float
    corr_extreme: float
    eta: float
    bias_sq: float
    variance_term: float


@dataclass(frozen=True)
class AcfCurve:
    """Autocorrelation values on nonnegative lags; values[0] == 1."""

    lags: np.ndarray
    values: np.ndarray
    beta1: Optional[float] = None
    beta2: Optional[float] = None


@dataclass(frozen=True)
class SpectrumTrack:
    """Per-step eigenvalue extremes of damping and fluctuation matrices.

    Damping regimes: 'unconditional', 'forward', 'backward' (real parts of a
    generally nonsymmetric matrix). Noise regimes use the same keys for the
    matched fluctuation covariances; diff_min tracks the smallest eigenvalue
    of the (possibly indefinite) gap between the unconditional and forward
    fluctuation covariances.
    """

    times: np.ndarray
    damping_max: dict = field(default_factory=dict)
    damping_min: dict = field(default_factory=dict)
    noise_max: dict = field(default_factory=dict)
    noise_min: dict = field(default_factory=dict)
    diff_min: np.ndarray = None


def _as_2d(series):
    a = np.asarray(series, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or len(a) < 2:
        raise ValueError("series must have at least 2 rows")
    return a


def temporal_mean(series) -> np.ndarray:
    """Time average over the J + 1 grid points."""
    return _as_2d(series).mean(axis=0)


def temporal_std(series) -> float:
    """Scalar temporal standard deviation (trace form, divide-by-J)."""
    a = _as_2d(series)
    anom = a - temporal_mean(a)
    return float(np.sqrt(np.sum(anom ** 2) / (len(a) - 1)))


def temporal_stats(series):
    """(time-average vector, scalar temporal std)."""
    return temporal_mean(series), temporal_std(series)


def _require_spread(std, label):
    if std <= 0.0:
        raise DegenerateSeries(f"{label} has zero temporal spread")


def srmse(truth, estimate) -> float:
    """Root-mean-squared error standardized by the truth's temporal std."""
    t = _as_2d(truth)
    e = _as_2d(estimate)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    std_t = temporal_std(t)
    _require_spread(std_t, "truth")
    mse = np.sum((t - e) ** 2) / (len(t) - 1)
    return float(np.sqrt(mse) / std_t)


def corr(truth, estimate) -> float:
    """Anomaly pattern correlation (centered trace inner product)."""
    t = _as_2d(truth)
    e = _as_2d(estimate)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    ta = t - temporal_mean(t)
    ea = e - temporal_mean(e)
    denom = np.sqrt(np.sum(ta ** 2)) * np.sqrt(np.sum(ea ** 2))
    if denom <= 0.0:
        raise DegenerateSeries("correlation undefined for a constant series")
    return float(np.sum(ta * ea) / denom)


def extreme_mask(series_1d, theta: float = DEFAULT_EXTREME_THETA) -> np.ndarray:
    """Steps where a scalar truth coordinate exceeds its mean + theta*std."""
    a = np.asarray(series_1d, dtype=float).reshape(-1)
    mean = a.mean()
    std = np.sqrt(np.sum((a - mean) ** 2) / (len(a) - 1))
    return a > mean + theta * std


def corr_conditional(truth, estimate, mask) -> float:
    """Anomaly correlation over a masked subset, centered on the subset."""
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < 2:
        raise DegenerateSeries("conditional correlation needs >= 2 masked rows")
    return corr(_as_2d(truth)[mask], _as_2d(estimate)[mask])


def _samples_array(ensemble):
    samples = getattr(ensemble, "samples", ensemble)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.ndim != 3 or samples.shape[0] < 1:
        raise ValueError("ensemble must be (m, J+1, l) with m >= 1")
    return samples


def bias_variance(truth, ensemble):
    """Bias/variance split of the expected squared sampling error.

    Returns (bias_sq, variance_term, expected_sq_srmse): the squared SRMSE of
    the ensemble mean, the spread of samples about it rescaled to truth units,
    and the ensemble average of the squared SRMSE of individual samples. The
    first two reconstruct the third up to Monte Carlo cross terms.
    """
    t = _as_2d(truth)
    samples = _samples_array(ensemble)
    ens_mean = samples.mean(axis=0)
    std_t = temporal_std(t)
    _require_spread(std_t, "truth")
    bias_sq = srmse(t, ens_mean) ** 2
    J = len(t) - 1
    spread = np.sum((samples - ens_mean) ** 2, axis=(1, 2)) / J
    variance_term = float(spread.mean() / std_t ** 2)
    expected = np.sum((samples - t) ** 2, axis=(1, 2)) / J
    expected_sq_srmse = float(expected.mean() / std_t ** 2)
    return bias_sq, variance_term, expected_sq_srmse


def eta_factor(mean_series, ensemble) -> float:
    """Attenuation factor relating sample and posterior-mean correlations.

    Per sample: the ratio of the mean series' anomaly norm to the sample's
    anomaly norm (denominator expanded through the residual decomposition);
    returned averaged over the ensemble. Always in [0, 1] up to roundoff.
    """
    mean = _as_2d(mean_series)
    samples = _samples_array(ensemble)
    m_anom = mean - temporal_mean(mean)
    num = np.sqrt(np.sum(m_anom ** 2))
    if num <= 0.0 and np.allclose(samples, mean):
        return 1.0
    etas = np.empty(len(samples))
    for i, sample in enumerate(samples):
        resid = sample - mean
        r_anom = resid - temporal_mean(resid)
        denom_sq = (np.sum(m_anom ** 2) + np.sum(r_anom ** 2)
                    + 2.0 * np.sum(m_anom * r_anom))
        if denom_sq <= 0.0:
            raise DegenerateSeries("sample anomaly norm is zero")
        etas[i] = num / np.sqrt(denom_sq)
    return float(etas.mean())


def _trace_autocov(anom, max_lag):
    """Biased trace-form autocovariance for lags 0..max_lag via FFT."""
    n, p = anom.shape
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    spec = np.fft.rfft(anom, n=nfft, axis=0)
    acov = np.fft.irfft((spec * np.conj(spec)).real.sum(axis=1), n=nfft)
    return acov[:max_lag + 1] / n


def acf(series, max_lag: int) -> AcfCurve:
    """Biased trace-form autocorrelation on lags 0..max_lag."""
    a = _as_2d(series)
    if max_lag < 0 or max_lag >= len(a):
        raise ValueError("max_lag must be in [0, len(series) - 1)")
    anom = a - a.mean(axis=0)
    acov = _trace_autocov(anom, max_lag)
    if acov[0] <= 0.0:
        raise DegenerateSeries("ACF undefined for a constant series")
    return AcfCurve(lags=np.arange(max_lag + 1, dtype=float),
                    values=acov / acov[0])


def ensemble_acf_decomposition(mean_series, ensemble, max_lag: int):
    """Convex split of the ensemble ACF into mean and residual parts.

    Returns (acf_mean, acf_residual, combined) where combined carries the
    weights beta1 (mean share of total variance) and beta2 = 1 - beta1 and
    values beta1*ACF(mean) + beta2*ACF(residual). The residual ACF pools the
    autocovariance over all ensemble members.
    """
    mean = _as_2d(mean_series)
    samples = _samples_array(ensemble)
    acf_mean = acf(mean, max_lag)

    resid = samples - mean
    acov = np.zeros(max_lag + 1)
    for r in resid:
        anom = r - r.mean(axis=0)
        acov += _trace_autocov(anom, max_lag)
    acov /= len(resid)
    if acov[0] <= 0.0:
        raise DegenerateSeries("residual ACF undefined: zero spread")
    acf_resid = AcfCurve(lags=acf_mean.lags, values=acov / acov[0])

    var_mean = temporal_std(mean) ** 2
    var_resid = float(np.mean([temporal_std(r) ** 2 for r in resid]))
    beta1 = var_mean / (var_mean + var_resid)
    beta2 = var_resid / (var_mean + var_resid)
    combined = AcfCurve(lags=acf_mean.lags,
                        values=beta1 * acf_mean.values + beta2 * acf_resid.values,
                        beta1=beta1, beta2=beta2)
    return acf_mean, acf_resid, combined


def psd_estimate(series_1d, segment_len: int, dt: float = 1.0):
    """One-sided Welch power spectral density (Hann window, 50% overlap).

    Normalized as a density in cyclic frequency, so sum(power)*df recovers
    the series variance up to windowing loss.
    """
    a = np.asarray(series_1d, dtype=float).reshape(-1)
    if len(a) < 2 * segment_len:
        raise ValueError("series must be at least twice the segment length")
    if np.ptp(a) == 0.0:
        raise DegenerateSeries("PSD undefined for a constant series")
    freqs, power = signal.welch(a, fs=1.0 / dt, window="hann",
                                nperseg=segment_len,
                                noverlap=segment_len // 2,
                                detrend="constant", scaling="density")
    return freqs, power


def uncertainty_spectra(model: CgnsModel, runs) -> SpectrumTrack:
    """Eigenvalue tracks of the damping and fluctuation matrices.

    runs is a list of (x_path, filter_series) pairs on a common grid; tracks
    are averaged over runs. Damping regimes: the hidden-dynamics feedback,
    the forward-sampling residual feedback, and the (negated) backward one.
    Noise regimes: the raw hidden-noise covariance, the forward fluctuation
    covariance, and the backward fluctuation covariance B.
    """
    if not runs:
        raise ValueError("uncertainty_spectra needs at least one run")
    grid = runs[0][1].grid
    times = grid.times()
    n = len(times)
    l = model.l
    regimes = ("unconditional", "forward", "backward")
    d_max = {k: np.zeros(n) for k in regimes}
    d_min = {k: np.zeros(n) for k in regimes}
    n_max = {k: np.zeros(n) for k in regimes}
    n_min = {k: np.zeros(n) for k in regimes}
    diff_min = np.zeros(n)

    for x_path, series in runs:
        x_path = np.asarray(x_path, dtype=float).reshape(-1, model.k)
        if len(series) != n or len(x_path) != n:
            raise ValueError("all runs must share the reference grid")
        damp = {k: np.empty((n, l, l)) for k in regimes}
        noise = {k: np.empty((n, l, l)) for k in regimes}
        for j in range(n):
            t = times[j]
            snap = evaluate(model, t, x_path[j])
            gr = gramians(snap, t=t)
            aux = auxiliary(snap, gr, t=t)
            r_f = series.covs[j]
            rgr = r_f @ aux.gamma @ r_f
            damp["unconditional"][j] = snap.lambda_y
            damp["forward"][j] = aux.a_mat - r_f @ aux.gamma
            damp["backward"][j] = -(np.linalg.solve(
                symmetrize(r_f).T, aux.b_mat.T).T + aux.a_mat)
            noise["unconditional"][j] = gr.syy
            noise["forward"][j] = symmetrize(aux.b_mat + rgr)
            noise["backward"][j] = aux.b_mat
        for k in regimes:
            ev = np.linalg.eigvals(damp[k]).real
            d_max[k] += ev.max(axis=1)
            d_min[k] += ev.min(axis=1)
            ew = np.linalg.eigvalsh(noise[k])
            n_max[k] += ew[:, -1]
            n_min[k] += ew[:, 0]
        gap = noise["unconditional"] - noise["forward"]
        diff_min += np.linalg.eigvalsh(symmetrize(gap))[:, 0]

    nr = float(len(runs))
    return SpectrumTrack(
        times=times,
        damping_max={k: d_max[k] / nr for k in regimes},
        damping_min={k: d_min[k] / nr for k in regimes},
        noise_max={k: n_max[k] / nr for k in regimes},
        noise_min={k: n_min[k] / nr for k in regimes},
        diff_min=diff_min / nr,
    )


def metric_report(truth, mean_series, ensemble,
                  extreme_coord=0, theta: float = DEFAULT_EXTREME_THETA) -> MetricReport:
    """Assemble the scalar skill summary for one posterior mean + ensemble."""
    t = _as_2d(truth)
    mask = extreme_mask(t[:, extreme_coord], theta)
    bias_sq, variance_term, _ = bias_variance(t, ensemble)
    return MetricReport(
        srmse=srmse(t, mean_series),
        corr=corr(t, mean_series),
        corr_extreme=corr_conditional(t, mean_series, mask),
        eta=eta_factor(mean_series, ensemble),
        bias_sq=bias_sq,
        variance_term=variance_term,
    )


def metric_report_to_json(report: MetricReport, path):
    with open(path, "w") as fh:
        json.dump({k: float(getattr(report, k)) for k in
                   ("srmse", "corr", "corr_extreme", "eta",
                    "bias_sq", "variance_term")},
                  fh, indent=2, sort_keys=True)


def curve_to_csv(xs, ys, path, header="lag_or_freq,value"):
    """Two-column CSV used for both ACF curves and PSD estimates."""
    data = np.column_stack([np.asarray(xs, float), np.asarray(ys, float)])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header,
               comments="")


def spectrum_to_json(track: SpectrumTrack, path):
    payload = {
        "times": track.times.tolist(),
        "damping_max": {k: v.tolist() for k, v in track.damping_max.items()},
        "damping_min": {k: v.tolist() for k, v in track.damping_min.items()},
        "noise_max": {k: v.tolist() for k, v in track.noise_max.items()},
        "noise_min": {k: v.tolist() for k, v in track.noise_min.items()},
        "diff_min": track.diff_min.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def spectrum_from_json(path) -> SpectrumTrack:
    with open(path) as fh:
        payload = json.load(fh)
    return SpectrumTrack(
        times=np.asarray(payload["times"]),
        damping_max={k: np.asarray(v) for k, v in payload["damping_max"].items()},
        damping_min={k: np.asarray(v) for k, v in payload["damping_min"].items()},
        noise_max={k: np.asarray(v) for k, v in payload["noise_max"].items()},
        noise_min={k: np.asarray(v) for k, v in payload["noise_min"].items()},
        diff_min=np.asarray(payload["diff_min"]),
    )
