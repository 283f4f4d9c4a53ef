import threading
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from scipy.special import expit


class NodeLevel(BaseModel):
    """Nodes added at one refinement level of the tanh-sinh rule on [0, 1]"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    level: int
    h: float
    x: np.ndarray
    complement: np.ndarray
    w: np.ndarray


class TanhSinhNodePool:
    """Process-wide cache of tanh-sinh node tables.

    Level 0 uses step h = 1 on [-t_max, t_max]; level k adds the odd multiples of
    2**-k, so summing levels 0..k with weight h_k gives the full rule at step h_k.
    Tables are built once and shared read-only between threads.
    """

    _instance: Optional["TanhSinhNodePool"] = None
    _instance_lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._instance_lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self) -> None:
        if not hasattr(self, "initialized"):
            self.t_max = 4.0
            self._max_cached_levels = 12
            self._levels: Dict[int, NodeLevel] = {}
            self._levels_lock = threading.Lock()
            self.initialized = True

    def _build_level(self, level: int) -> NodeLevel:
        if level == 0:
            t = np.arange(-self.t_max, self.t_max + 0.5, 1.0)
            h = 1.0
        else:
            h = 2.0**-level
            n = int(self.t_max / h)
            k = np.arange(-n, n + 1)
            k = k[k % 2 != 0]
            t = k * h
        v = np.pi * np.sinh(t)
        x = expit(v)
        complement = expit(-v)
        w = np.pi * np.cosh(t) * x * complement
        # Near t_max, expit rounds to 1; the complement still holds the true distance.
        x = np.clip(x, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
        return NodeLevel(level=level, h=h, x=x, complement=complement, w=w)

    def get_level(self, level: int) -> NodeLevel:
        """Get the node table for one refinement level"""
        if level < 0 or level > self._max_cached_levels:
            raise ValueError(f"Tanh-sinh level must lie in [0, {self._max_cached_levels}], got {level}")
        table = self._levels.get(level)
        if table is None:
            with self._levels_lock:
                table = self._levels.get(level)
                if table is None:
                    table = self._build_level(level)
                    self._levels[level] = table
                    logger.debug(f"Built tanh-sinh level {level} with {table.x.size} nodes")
        return table

    def levels_up_to(self, level: int) -> List[NodeLevel]:
        return [self.get_level(k) for k in range(level + 1)]

    def node_counts(self) -> List[Tuple[int, int]]:
        with self._levels_lock:
            return sorted((k, v.x.size) for k, v in self._levels.items())
