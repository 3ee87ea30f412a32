"""난수 시드 파생

하나의 64비트 시드에서 이름별로 자식 시드를 결정적으로 만든다.
같은 (seed, name) 쌍은 항상 같은 Generator를 준다.
"""
import hashlib
from typing import Union

import numpy as np


def child_seed(seed: int, *names: Union[str, int, float]) -> np.random.SeedSequence:
    """(seed, 이름...) 에서 SeedSequence 파생"""
    key = "/".join(str(n) for n in names).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    spawn_key = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=spawn_key)


def make_rng(seed: int, *names: Union[str, int, float]) -> np.random.Generator:
    """이름별 Generator"""
    return np.random.default_rng(child_seed(seed, *names))
