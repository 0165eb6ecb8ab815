"""
Централизованный менеджер параллельных вычислений для qdimer
"""

import concurrent.futures
import logging
import threading
from typing import Any, Callable, Iterable, List, Optional

import numpy as np

from config.config import Config

logger = logging.getLogger(__name__)


class ParallelManager:
    """Пул потоков с детерминированным порядком результатов"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max(1, max_workers or Config.THREADS)
        self._executor: Optional[concurrent.futures.ThreadPoolExecutor] = None
        self._lock = threading.Lock()

    def _get_executor(self) -> concurrent.futures.ThreadPoolExecutor:
        """Получить или создать пул"""
        if self._executor is None:
            with self._lock:
                if self._executor is None:
                    self._executor = concurrent.futures.ThreadPoolExecutor(
                        max_workers=self.max_workers, thread_name_prefix="qdimer"
                    )
        return self._executor

    def map_ordered(self, func: Callable[[Any], Any], items: Iterable[Any],
                    workers: Optional[int] = None) -> List[Any]:
        """Применить func ко всем элементам; результаты в порядке входа"""
        items = list(items)
        if not items:
            return []
        # вложенный вызов из потока пула выполняется последовательно
        nested = threading.current_thread().name.startswith("qdimer")
        if nested or (workers or self.max_workers) <= 1 or len(items) == 1:
            return [func(x) for x in items]
        futures = [self._get_executor().submit(func, x) for x in items]
        return [f.result() for f in futures]

    @staticmethod
    def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
        """Независимые потоки случайных чисел из одного зерна"""
        children = np.random.SeedSequence(seed).spawn(max(1, count))
        return [np.random.default_rng(s) for s in children]

    def shutdown(self):
        """Завершение работы менеджера"""
        if self._executor:
            self._executor.shutdown(wait=True)
            self._executor = None
            logger.debug("🔚 Пул потоков остановлен")


# Глобальный экземпляр
parallel_manager = ParallelManager()
