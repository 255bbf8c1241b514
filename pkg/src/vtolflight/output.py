"""Writing a run to disk: full log, flat metrics summary, per-figure slices."""

import os

import numpy as np

from .sim import COL, COLUMNS

LOG_FILE = "log.csv"
SUMMARY_FILE = "summary.txt"

# plot-ready slices of the log, one file per figure
FIGURES = {
    "fig_airspeed.csv": ("t", "airspeed", "airspeed_est", "speed_r", "phase"),
    "fig_altitude.csv": ("t", "altitude", "vz", "vz_r", "phase"),
    "fig_pitch.csv": ("t", "pitch_deg", "roll_deg", "phase"),
    "fig_heading.csv": ("t", "heading_deg", "heading_err_deg", "phase"),
    "fig_thrust.csv": ("t", "T_mc_r", "T_fw_r", "t1", "t2", "t3", "t4", "t_push",
                       "pwm1", "pwm2", "pwm3", "pwm4", "pwm_push"),
    "fig_surfaces.csv": ("t", "delta_a_deg", "delta_rel_deg", "delta_rer_deg", "lambda"),
}
INT_COLUMNS = {"phase", "flags", "pwm1", "pwm2", "pwm3", "pwm4", "pwm_push"}


def _fmt(name, x):
    if name in INT_COLUMNS:
        return str(int(x))
    return f"{x:.9g}"


def _column(data, name):
    if name == "altitude":
        return -data[:, COL["z"]]
    return data[:, COL[name]]


def write_table(path, names, cols):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        n = len(cols[0]) if cols else 0
        for k in range(n):
            fh.write(",".join(_fmt(nm, c[k]) for nm, c in zip(names, cols)) + "\n")


def _summary_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def write_summary(path, metrics):
    """Flat ``key = value`` text; wall-clock entries are left out."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# run metrics\n")
        for key in sorted(metrics):
            if key == "runtime_s":
                continue
            fh.write(f"{key} = {_summary_value(metrics[key])}\n")


def emit_outputs(log, out_dir, metrics=None):
    """Write the log, the summary and the figure slices; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    data = log.data if len(log) else np.zeros((0, len(COLUMNS)))
    paths = []
    p = os.path.join(out_dir, LOG_FILE)
    write_table(p, COLUMNS, [data[:, n] for n in range(len(COLUMNS))])
    paths.append(p)
    p = os.path.join(out_dir, SUMMARY_FILE)
    write_summary(p, metrics or {})
    paths.append(p)
    for name, cols in FIGURES.items():
        p = os.path.join(out_dir, name)
        write_table(p, cols, [_column(data, c) for c in cols])
        paths.append(p)
    return paths
