from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple

from app.config import settings


def chunk_bounds(n: int, chunk_size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + chunk_size, n)) for start in range(0, n, max(1, chunk_size))]


def run_chunked(
    n: int,
    fn: Callable[[int, int], None],
    threads: int = settings.THREADS,
    chunk_size: int = settings.CHUNK_SIZE,
) -> None:
    """Call ``fn(start, stop)`` over [0, n) in chunks; ``fn`` must only write its own slice."""
    bounds = chunk_bounds(n, chunk_size)
    if threads <= 1 or len(bounds) <= 1:
        for start, stop in bounds:
            fn(start, stop)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # list() re-raises the first worker exception
        list(pool.map(lambda b: fn(*b), bounds))
