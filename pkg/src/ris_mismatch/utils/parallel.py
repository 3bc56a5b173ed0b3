from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def run_cells(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """
    Выполняет независимые ячейки развёртки; порядок результатов = порядок items.
    При workers > 1: пул процессов (func должна быть функцией уровня модуля).
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))
