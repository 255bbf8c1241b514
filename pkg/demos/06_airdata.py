"""
Estimating the air velocity without a vane
==========================================

With only a pitot tube the air velocity along the body x axis is measured.
If the wind is horizontal and there is no sideslip, the vertical component
of the air velocity equals the vertical inertial speed, and that fixes the
remaining component. The regularizer keeps the estimate bounded at knife
edge; its price is a small error at steep bank.
"""

import math

import numpy as np

from vtolflight.airdata import estimate_airvelocity
from vtolflight.geometry import frame_from_euler

wind = np.array([-3.0, 1.0, 0.0])
va_body = np.array([18.0, 0.0, 1.5])

print(f"{'bank':>5} {'exact error':>12} {'regularized error':>18}")
for bank in (0, 30, 60, 75, 85, 90):
    R = frame_from_euler(math.radians(bank), math.radians(4.0), 0.7)
    va = R @ va_body
    v = va + wind
    pitot = va @ R[:, 0]
    errs = []
    for eps in (0.0, 1e-3):
        if eps == 0.0 and bank == 90:
            errs.append(float("nan"))
            continue
        est = estimate_airvelocity(v, R, pitot, eps)
        errs.append(np.linalg.norm(est.v_a - va) / np.linalg.norm(va))
    print(f"{bank:5d} {errs[0]:12.2e} {errs[1]:18.2e}")
