"""청크 단위 병렬 맵

청크 분할과 결과 순서가 스레드 수와 무관하므로 리덕션 결과도 같다.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

T = TypeVar("T")

_THREADS = 1


def set_thread_cap(threads: int):
    """전역 스레드 상한 설정 (--threads)"""
    global _THREADS
    _THREADS = max(1, int(threads))


def chunk_bounds(total: int, chunk_size: int) -> List[slice]:
    """[0, total) 을 고정 크기 청크로 분할"""
    chunk_size = max(1, int(chunk_size))
    return [slice(i, min(i + chunk_size, total)) for i in range(0, total, chunk_size)]


def map_chunks(func: Callable[[slice], T], total: int, chunk_size: int = 4096) -> List[T]:
    """청크별로 func 실행, 입력 순서대로 결과 반환"""
    chunks = chunk_bounds(total, chunk_size)
    if _THREADS <= 1 or len(chunks) <= 1:
        return [func(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=_THREADS) as pool:
        return list(pool.map(func, chunks))
