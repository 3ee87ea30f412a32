"""공용 fixture"""
import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

from src.geometry.table import default_table, load_table_config


@pytest.fixture(scope="session")
def table():
    """기본 당구대 (반지름 0.25 원 두 개, 무한 지평)"""
    return default_table()


@pytest.fixture(scope="session")
def finite_table():
    """유한 지평 당구대 (반지름 0.4, 0.2)"""
    return load_table_config(os.path.join(ROOT, "config", "finite_table.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def phase_points(finite_table, rng):
    """cos φ > 0.3 인 유한 당구대 위의 점 배치"""
    n = 400
    ids = rng.integers(0, finite_table.n_scatterers, n)
    r = rng.random(n) * finite_table.perimeters[ids]
    phi = rng.uniform(-1.2, 1.2, n)
    return ids, r, phi


@pytest.fixture(scope="session")
def ulam_operator(finite_table):
    """작은 격자 (4×4, 셀당 16 샘플) 의 t=1 연산자"""
    from src.spectrum.ulam import assemble_ulam
    return assemble_ulam(finite_table, 1.0, (4, 4), 16, seed=7)


@pytest.fixture(scope="session")
def srb_measure(ulam_operator):
    """t=1 평형 측도 추정"""
    from src.spectrum.eigen import equilibrium_measure, leading_triple
    return equilibrium_measure(ulam_operator, leading_triple(ulam_operator))
