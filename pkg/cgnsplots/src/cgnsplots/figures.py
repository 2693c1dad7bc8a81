"""Renderers for the three case-study figures.

fig1: observed/hidden time series with kernel-density marginals.
fig2: ACF curves, power spectral densities, and correlation bars.
fig3: eigenvalue tracks of the uncertainty matrices on a log time axis.

All data comes from the CSV/JSON artifacts listed in a run manifest; the
renderers only load, arrange, and draw. Checksums of every plotted array are
returned so tests can verify nothing was recomputed or altered.
"""

import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats


class MissingInputError(Exception):
    """A file required for the requested figure is absent from the manifest
    or from disk; the message names the offending manifest entry."""


@dataclass(frozen=True)
class FigureSpec:
    manifest_path: str
    out_path: str
    fig_id: str  # "fig1" | "fig2" | "fig3"
    style: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RenderResult:
    fig_id: str
    out_path: str
    n_panels: int
    axis_scales: tuple  # one (xscale, yscale) pair per panel
    checksums: dict     # source file name -> sha256 of the plotted arrays


def _sha256(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=float)).tobytes())
    return h.hexdigest()


class _Manifest:
    def __init__(self, path):
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise MissingInputError(f"manifest not found: {path}")
        self.base = os.path.dirname(os.path.abspath(path))
        self.files = set(payload.get("files", []))

    def require(self, name) -> str:
        if name not in self.files:
            raise MissingInputError(
                f"manifest 'files' entry missing required artifact {name!r}")
        path = os.path.join(self.base, name)
        if not os.path.exists(path):
            raise MissingInputError(
                f"artifact {name!r} listed in manifest but absent on disk")
        return path

    def optional(self, name):
        if name not in self.files:
            return None
        path = os.path.join(self.base, name)
        return path if os.path.exists(path) else None


def _read_table(path):
    """(column names, float matrix); a trailing non-numeric column (the
    series 'kind' label) is dropped."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2,
                          usecols=range(len(names) - 1))
        names = names[:-1]
    return names, data


def _columns(names, data, prefix):
    idx = [i for i, n in enumerate(names) if n.startswith(prefix)]
    if not idx:
        raise MissingInputError(f"no {prefix}* columns in table {names}")
    return data[:, idx]


def _kde_panel(ax, series, labels):
    for values, label in zip(series, labels):
        kde = stats.gaussian_kde(values)  # Scott's rule bandwidth
        grid = np.linspace(values.min(), values.max(), 400)
        ax.plot(grid, kde(grid), label=label)
    ax.set_ylabel("PDF")
    ax.legend(fontsize=7)


def _render_fig1(manifest, style):
    t_names, truth = _read_table(manifest.require("truth.csv"))
    f_names, filt = _read_table(manifest.require("filter.csv"))
    s_names, smo = _read_table(manifest.require("smoother.csv"))
    t = truth[:, 0]
    x_obs = _columns(t_names, truth, "x_")[:, 0]
    y_true = _columns(t_names, truth, "y_")
    mu_f = _columns(f_names, filt, "mu_")
    mu_s = _columns(s_names, smo, "mu_")

    fig, axes = plt.subplots(3, 2, figsize=style.get("figsize", (10, 8)))
    axes[0, 0].plot(t, x_obs, color="k", lw=0.7)
    axes[0, 0].set_ylabel("$u_1$")
    _kde_panel(axes[0, 1], [x_obs], ["truth"])
    for row, coord in ((1, 0), (2, 1)):
        ax = axes[row, 0]
        ax.plot(t, y_true[:, coord], color="k", lw=0.7, label="truth")
        ax.plot(t, mu_f[:, coord], color="tab:red", lw=0.7, label="filter")
        ax.plot(t, mu_s[:, coord], color="tab:blue", lw=0.7, label="smoother")
        ax.set_ylabel(f"$u_{coord + 2}$")
        ax.legend(fontsize=7)
        _kde_panel(axes[row, 1],
                   [y_true[:, coord], mu_f[:, coord], mu_s[:, coord]],
                   ["truth", "filter", "smoother"])
    axes[2, 0].set_xlabel("t")
    checksums = {
        "truth.csv": _sha256(truth),
        "filter.csv": _sha256(filt),
        "smoother.csv": _sha256(smo),
    }
    return fig, list(axes.ravel()), checksums


def _render_fig2(manifest, style):
    curves = {}
    checksums = {}
    for name in ("acf_truth.csv", "acf_filter.csv", "acf_smoother.csv"):
        _, data = _read_table(manifest.require(name))
        curves[name] = data
        checksums[name] = _sha256(data)
    sample_missing = []
    for name in ["acf_sample.csv"] + [
            f"psd_sample_y{c}.csv" for c in (0, 1)]:
        path = manifest.optional(name)
        if path is None:
            sample_missing.append(name)
        else:
            _, data = _read_table(path)
            curves[name] = data
            checksums[name] = _sha256(data)
    if sample_missing:
        warnings.warn("sample artifacts missing "
                      f"({', '.join(sample_missing)}); rendering truth/mean "
                      "curves only", RuntimeWarning)
    psd_truth = {}
    for coord in (0, 1):
        name = f"psd_truth_y{coord}.csv"
        _, data = _read_table(manifest.require(name))
        psd_truth[coord] = data
        checksums[name] = _sha256(data)
    with open(manifest.require("metrics.json")) as fh:
        metrics = json.load(fh)

    fig, axes = plt.subplots(2, 2, figsize=style.get("figsize", (10, 7)))
    ax = axes[0, 0]
    labels = {"acf_truth.csv": "truth", "acf_filter.csv": "filter mean",
              "acf_smoother.csv": "smoother mean",
              "acf_sample.csv": "backward sample"}
    for name, label in labels.items():
        if name in curves:
            ax.plot(curves[name][:, 0], curves[name][:, 1], label=label)
    ax.set_xlabel("lag")
    ax.set_ylabel("ACF")
    ax.legend(fontsize=7)

    for coord, ax in ((0, axes[0, 1]), (1, axes[1, 0])):
        ax.plot(psd_truth[coord][:, 0], psd_truth[coord][:, 1],
                label="truth")
        name = f"psd_sample_y{coord}.csv"
        if name in curves:
            ax.plot(curves[name][:, 0], curves[name][:, 1],
                    label="backward sample")
        ax.set_yscale("log")
        ax.set_xlabel("frequency")
        ax.set_ylabel(f"PSD $u_{coord + 2}$")
        ax.legend(fontsize=7)

    ax = axes[1, 1]
    per = metrics["per_coordinate"]
    coords = sorted(per)
    width = 0.35
    xs = np.arange(len(coords))
    bar_filter = [per[c]["corr_filter"] for c in coords]
    bar_smoother = [per[c]["corr_smoother"] for c in coords]
    ax.bar(xs - width / 2, bar_filter, width, label="filter")
    ax.bar(xs + width / 2, bar_smoother, width, label="smoother")
    ax.set_xticks(xs, coords)
    ax.set_ylabel("corr with truth")
    ax.legend(fontsize=7)
    checksums["metrics.json"] = _sha256(bar_filter, bar_smoother)
    return fig, list(axes.ravel()), checksums


def _render_fig3(manifest, style):
    with open(manifest.require("spectrum.json")) as fh:
        payload = json.load(fh)
    times = np.asarray(payload["times"], dtype=float)
    mask = times > 0  # log-scaled time axis cannot show t = 0
    regimes = ("unconditional", "forward", "backward")

    fig, axes = plt.subplots(2, 2, figsize=style.get("figsize", (10, 7)))
    plotted = [times]
    for ax, key, title in ((axes[0, 0], "damping_max", "max damping eig"),
                           (axes[0, 1], "damping_min", "min damping eig"),
                           (axes[1, 0], "noise_max", "max noise eig")):
        for regime in regimes:
            track = np.asarray(payload[key][regime], dtype=float)
            ax.plot(times[mask], track[mask], label=regime)
            plotted.append(track)
        ax.set_xscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(title)
        ax.legend(fontsize=7)
    ax = axes[1, 1]
    diff = np.asarray(payload["diff_min"], dtype=float)
    ax.plot(times[mask], diff[mask], color="tab:purple")
    ax.axhline(0.0, color="k", lw=0.6, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("min eig of fluctuation gap")
    plotted.append(diff)
    checksums = {"spectrum.json": _sha256(*plotted)}
    return fig, list(axes.ravel()), checksums


_RENDERERS = {"fig1": _render_fig1, "fig2": _render_fig2, "fig3": _render_fig3}


def render(spec: FigureSpec) -> RenderResult:
    """Render one figure to PNG and report panel/axis metadata and the
    checksums of everything plotted."""
    if spec.fig_id not in _RENDERERS:
        raise ValueError(f"unknown figure id {spec.fig_id!r}; "
                         f"expected one of {sorted(_RENDERERS)}")
    manifest = _Manifest(spec.manifest_path)
    fig, axes, checksums = _RENDERERS[spec.fig_id](manifest, spec.style)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=spec.style.get("dpi", 150), format="png")
    scales = tuple((ax.get_xscale(), ax.get_yscale()) for ax in axes)
    plt.close(fig)
    return RenderResult(fig_id=spec.fig_id, out_path=spec.out_path,
                        n_panels=len(axes), axis_scales=scales,
                        checksums=checksums)
