"""
Воспроизводимые потоки случайных чисел.

Все генераторы: Philox (счётчиковый) поверх SeedSequence, поток определяется
кортежем ключей (master_seed, тег, индекс...), поэтому результат не зависит от
порядка и числа воркеров.
"""
import zlib

import numpy as np

PROFILE = "profile"
NOISE = "noise"
STARTS = "starts"


def _entropy(keys: tuple) -> list[int]:
    out: list[int] = []
    for key in keys:
        if isinstance(key, str):
            out.append(zlib.crc32(key.encode("utf-8")))
        else:
            key = int(key)
            if key < 0:
                raise ValueError(f"seed keys must be non-negative, got {key}")
            # SeedSequence принимает произвольно большие int, но разложим на 32-битные слова явно
            out.extend([key & 0xFFFFFFFF, (key >> 32) & 0xFFFFFFFF])
    return out


def generator(*keys) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_entropy(keys))))


def derive_seed(*keys) -> int:
    """64-битный сид, детерминированно выведенный из ключей."""
    lo, hi = np.random.SeedSequence(_entropy(keys)).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
