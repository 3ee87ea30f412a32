"""Itinerary: M₀ⁿ'ᴴ 원소의 기호 주소

앞 방향 키는 j = 0..n−1 의 (산란체, 띠) 와 마지막 Tⁿx 의 산란체,
그리고 각 비행의 격자 lift 로 이루어진다. 같은 산란체 쌍이라도 다른
lift 를 지나면 서로 다른 연결 성분이다.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from src.dynamics.billiard_map import PhasePoint, TOL_TANGENT
from src.dynamics.hyperbolicity import orbit
from src.geometry.table import TableGeometry
from src.singularity.strips import strip_indices
from src.utils.errors import DomainError, TruncatedItineraryError

logger = logging.getLogger("billiard_thermo")

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class Itinerary:
    symbols: Tuple[Tuple[int, int], ...]
    direction: str = FORWARD
    final_id: int = -1
    lifts: Tuple[Tuple[int, int], ...] = ()

    def __len__(self):
        return len(self.symbols)

    def prefix(self, m: int) -> Tuple[Tuple[int, int], ...]:
        return self.symbols[:m]


def itinerary(
    table: TableGeometry,
    x: PhasePoint,
    n: int,
    direction: str = FORWARD,
    use_strips: bool = True,
    tol_tangent: float = TOL_TANGENT,
) -> Itinerary:
    """x 의 길이 n itinerary (backward 면 T⁻ʲx 의 주소)"""
    if direction not in (FORWARD, BACKWARD):
        raise DomainError(f"direction 은 forward|backward (받은 값 {direction})")
    if n < 1:
        raise DomainError(f"n ≥ 1 이어야 함 (받은 값 {n})")
    table.check_id(x.scatterer_id)
    orb = orbit(table, [x.scatterer_id], [x.r], [x.phi], n, tol_tangent, inverse=direction == BACKWARD)
    achieved = int(orb.valid_len[0])
    if achieved < n:
        raise TruncatedItineraryError(
            f"{achieved} 스텝에서 접선 충돌 근처로 itinerary 가 잘림", achieved_length=achieved,
        )
    phis = orb.phi[:n, 0]
    strips = strip_indices(phis, table.q_exponent, table.k0) if use_strips else np.zeros(n, dtype=int)
    symbols = tuple((int(i), int(k)) for i, k in zip(orb.ids[:n, 0], strips))
    lifts = tuple((int(a), int(b)) for a, b in orb.lift[:n, 0])
    return Itinerary(symbols=symbols, direction=direction, final_id=int(orb.ids[n, 0]), lifts=lifts)


def itinerary_codes(
    table: TableGeometry,
    ids, r, phi,
    n: int,
    use_strips: bool = True,
    include_lifts: bool = True,
    tol_tangent: float = TOL_TANGENT,
):
    """배치 itinerary 를 정수 클래스 번호로 인코딩

    반환: (codes, valid). valid 가 아닌 점의 code 는 −1.
    """
    orb = orbit(table, ids, r, phi, n, tol_tangent)
    valid = orb.valid_len >= n
    cols = [orb.ids[: n + 1].T]
    if use_strips:
        cols.append(strip_indices(np.nan_to_num(orb.phi[:n]), table.q_exponent, table.k0).T)
    if include_lifts:
        cols.append(orb.lift[:n].transpose(1, 0, 2).reshape(len(valid), -1))
    rows = np.concatenate(cols, axis=1)
    codes = np.full(len(valid), -1, dtype=np.int64)
    if np.any(valid):
        _, inverse = np.unique(rows[valid], axis=0, return_inverse=True)
        codes[valid] = inverse.ravel()
    return codes, valid


def itinerary_histogram(codes: np.ndarray, n: int, top: int = 10) -> dict:
    """클래스 크기 분포 요약 (JSON 용)"""
    counts = pd.Series(codes[codes >= 0]).value_counts()
    return {
        "n": int(n),
        "count": int(counts.size),
        "samples": int(counts.sum()),
        "top_classes": [{"code": int(c), "size": int(s)} for c, s in counts.head(top).items()],
    }
