"""
Кэш результатов перебора покрытий
"""

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, Optional

from config.config import Config


@dataclass
class CacheEntry:
    """Запись в кэше"""
    value: Any
    kind: str
    timestamp: datetime = field(default_factory=datetime.now)


class EnumerationCache:
    """Кэш списков покрытий и конфигураций по отпечатку графа"""

    def __init__(self, max_size: int = 64):
        self.max_size = max_size
        self.cache: Dict[str, CacheEntry] = {}
        self._lock = threading.RLock()
        self.hits = 0
        self.misses = 0

    def _generate_key(self, fingerprint: str, kind: str, params: Optional[Dict[str, Any]] = None) -> str:
        """Генерировать ключ кэша"""
        cache_data = {"graph": fingerprint, "kind": kind, "params": params or {}}
        cache_str = json.dumps(cache_data, sort_keys=True)
        return hashlib.md5(cache_str.encode()).hexdigest()

    def get(self, fingerprint: str, kind: str, params: Optional[Dict[str, Any]] = None) -> Optional[Any]:
        """Получить результат из кэша"""
        key = self._generate_key(fingerprint, kind, params)
        with self._lock:
            entry = self.cache.get(key)
            if entry is None:
                self.misses += 1
                return None
            self.hits += 1
            return entry.value

    def set(self, fingerprint: str, kind: str, value: Any, params: Optional[Dict[str, Any]] = None):
        """Сохранить результат в кэш"""
        key = self._generate_key(fingerprint, kind, params)
        with self._lock:
            if key not in self.cache and len(self.cache) >= self.max_size:
                self._evict_oldest()
            self.cache[key] = CacheEntry(value=value, kind=kind)

    def _evict_oldest(self):
        """Удалить самую старую запись"""
        if not self.cache:
            return
        oldest_key = min(self.cache.keys(), key=lambda k: self.cache[k].timestamp)
        del self.cache[oldest_key]

    def clear(self):
        with self._lock:
            self.cache.clear()
            self.hits = 0
            self.misses = 0

    def get_stats(self) -> Dict[str, Any]:
        """Получить статистику кэша"""
        with self._lock:
            total = self.hits + self.misses
            return {
                "size": len(self.cache),
                "max_size": self.max_size,
                "hits": self.hits,
                "misses": self.misses,
                "hit_rate": self.hits / total if total else 0.0,
            }


# Глобальный экземпляр
enumeration_cache = EnumerationCache(max_size=Config.ENUM_CACHE_SIZE)
