"""충돌 사상의 정확한 항등식 잔차 (배치)

- T⁻¹∘T = id
- DT 해석식 vs 중심 차분
- det DT = cos φ / cos φ₁ = JᵘT·JˢT·E(Tx)/E(x)  (E = 안정/불안정 방향 사이 각의 sin)
- log JˢT² (x) = log JˢT(x) + log JˢT(Tx)
"""
import logging
from typing import Dict

import numpy as np

from src.complexity.sampling import sample_srb
from src.dynamics.billiard_map import advance, advance_inverse, differential
from src.dynamics.hyperbolicity import (
    log_stable_jacobians, log_unstable_jacobians, orbit, stable_log_jacobian_batch, stable_slopes, unstable_slopes,
)
from src.geometry.table import TableGeometry
from src.utils.rng import make_rng

logger = logging.getLogger("billiard_thermo")

FD_STEP = 1e-6
MIN_COS = 0.1
IDENTITY_DEPTH = 40


def _periodic_diff(table: TableGeometry, ids, a, b):
    perim = table.perimeters[ids]
    d = np.mod(a - b + 0.5 * perim, perim) - 0.5 * perim
    return d


def finite_difference_dT(table: TableGeometry, ids, r, phi, h: float = FD_STEP) -> np.ndarray:
    """중심 차분 DT, shape (N, 2, 2). 같은 산란체에 안 맞는 점은 NaN"""
    base = advance(table, ids, r, phi)
    out = np.full((len(ids), 2, 2), np.nan)
    for col, (dr, dphi) in enumerate(((h, 0.0), (0.0, h))):
        plus = advance(table, ids, r + dr, phi + dphi)
        minus = advance(table, ids, r - dr, phi - dphi)
        same = (plus.ids == base.ids) & (minus.ids == base.ids) & base.ok & plus.ok & minus.ok
        sid = np.where(same, base.ids, 0)
        out[:, 0, col] = np.where(same, _periodic_diff(table, sid, plus.r, minus.r) / (2 * h), np.nan)
        out[:, 1, col] = np.where(same, (plus.phi - minus.phi) / (2 * h), np.nan)
    return out


def identity_residuals(table: TableGeometry, count: int = 10_000, seed: int = 0) -> Dict[str, float]:
    """랜덤 비특이 점들 위의 최대 잔차"""
    rng = make_rng(seed, "identities")
    ids, r, phi = sample_srb(table, count, rng)
    keep = np.cos(phi) > MIN_COS
    ids, r, phi = ids[keep], r[keep], phi[keep]

    fwd = advance(table, ids, r, phi)
    ok = fwd.ok & (np.cos(np.nan_to_num(fwd.phi, nan=np.pi / 2)) > MIN_COS)
    ids, r, phi = ids[ok], r[ok], phi[ok]
    f_ids, f_r, f_phi, tau = fwd.ids[ok], fwd.r[ok], fwd.phi[ok], fwd.tau[ok]

    back = advance_inverse(table, f_ids, f_r, f_phi)
    round_trip = np.hypot(_periodic_diff(table, ids, back.r, r), back.phi - phi)
    round_trip = np.where(back.ids == ids, round_trip, np.inf)

    K0, K1 = table.curvatures[ids], table.curvatures[f_ids]
    dT = differential(K0, K1, np.cos(phi), np.cos(f_phi), tau)
    fd = finite_difference_dT(table, ids, r, phi)
    scale = np.linalg.norm(dT, axis=(1, 2))
    fd_err = np.linalg.norm(dT - fd, axis=(1, 2)) / scale
    det_err = np.abs(np.linalg.det(dT) - np.cos(phi) / np.cos(f_phi)) / np.abs(np.cos(phi) / np.cos(f_phi))

    orb = orbit(table, ids, r, phi, IDENTITY_DEPTH + 2)
    Vs, _ = stable_slopes(table, orb)
    Vu, _ = unstable_slopes(table, orb, IDENTITY_DEPTH)
    log_js = log_stable_jacobians(table, orb, Vs)
    log_ju = log_unstable_jacobians(table, orb, Vu)
    with np.errstate(invalid="ignore"):
        E = np.abs(Vu[:2] - Vs[:2]) / np.sqrt((1 + Vu[:2] ** 2) * (1 + Vs[:2] ** 2))
        lhs = np.log(np.cos(orb.phi[0]) / np.cos(orb.phi[1]))
        rhs = log_ju[0] + log_js[0] + np.log(E[1]) - np.log(E[0])
        jac_err = np.abs(np.expm1(rhs - lhs))
    jac_err = jac_err[np.isfinite(jac_err)]

    two, v2 = stable_log_jacobian_batch(table, ids, r, phi, 2, IDENTITY_DEPTH)
    one, v1 = stable_log_jacobian_batch(table, ids, r, phi, 1, IDENTITY_DEPTH)
    nxt, vn = stable_log_jacobian_batch(table, f_ids, f_r, f_phi, 1, IDENTITY_DEPTH)
    both = v2 & v1 & vn
    cocycle = np.abs(two[both] - one[both] - nxt[both])

    def _max(x):
        x = x[np.isfinite(x)]
        return float(x.max()) if x.size else float("nan")

    report = {
        "points": int(len(ids)),
        "round_trip": _max(round_trip),
        "dT_finite_difference": _max(fd_err),
        "det_dT": _max(det_err),
        "jacobian_identity": _max(jac_err),
        "cocycle": _max(cocycle),
    }
    report["passed"] = bool(
        report["round_trip"] < 1e-10 and report["dT_finite_difference"] < 1e-5
        and report["jacobian_identity"] < 1e-6 and report["cocycle"] < 1e-9
    )
    logger.debug(f"항등식 잔차: {report}")
    return report
