//! Generated matplotlib script rendering a scan CSV as a heatmap.

use std::path::Path;

use crate::config::{Scale, ScanConfig};

/// Path of the script accompanying `csv`.
pub fn script_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("plot.py")
}

/// Python source that reads `csv` and writes `<csv stem>.png`. Cells with a
/// positivity violation are drawn gray, failed cells are left blank.
pub fn script(cfg: &ScanConfig, csv: &Path) -> String {
    let file = csv
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let png = csv.with_extension("png");
    let png = png
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let scale = |s: Scale| match s {
        Scale::Linear => "linear",
        Scale::Log => "log",
    };
    format!(
        r##"#!/usr/bin/env python3
# Generated by oqs-bench {version}.
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
METRIC = "{metric}"

rows = []
with open(os.path.join(HERE, "{file}"), newline="") as fh:
    reader = csv.DictReader(line for line in fh if not line.startswith("#"))
    for r in reader:
        rows.append(r)

gammas = sorted({{float(r["gamma"]) for r in rows}})
betas = sorted({{float(r["beta"]) for r in rows}})
value = np.full((len(betas), len(gammas)), np.nan)
violation = np.zeros_like(value, dtype=bool)
for r in rows:
    i, j = betas.index(float(r["beta"])), gammas.index(float(r["gamma"]))
    if r["status"] == "ok":
        value[i, j] = float(r[METRIC])
    elif r["status"] == "positivity_violation":
        violation[i, j] = True

fig, ax = plt.subplots(figsize=(5, 4))
mesh = ax.pcolormesh(gammas, betas, value, shading="nearest", cmap="viridis")
ax.pcolormesh(gammas, betas, np.where(violation, 1.0, np.nan), shading="nearest", cmap="Greys", vmin=0, vmax=2)
fig.colorbar(mesh, ax=ax, label=METRIC)
ax.set_xscale("{gscale}")
ax.set_yscale("{bscale}")
ax.set_xlabel(r"$\gamma/\omega$")
ax.set_ylabel(r"$\hbar\omega\beta$")
ax.set_title("{method}, $E_c = {cutoff}$, dim = {dim}")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{png}"), dpi=150)
"##,
        version = env!("CARGO_PKG_VERSION"),
        metric = cfg.metric.name(),
        method = cfg.method.name(),
        cutoff = cfg.fixed.cutoff,
        dim = cfg.fixed.dim,
        gscale = scale(cfg.grid.gamma.scale),
        bscale = scale(cfg.grid.beta.scale),
    )
}
