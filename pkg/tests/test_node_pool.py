import pytest
import asyncio
import threading

import numpy as np

from newton_dual.node_pool.tanh_sinh_pool import TanhSinhNodePool


def test_node_pool_singleton():
    """Test that TanhSinhNodePool is a true singleton"""
    pool1 = TanhSinhNodePool()
    pool2 = TanhSinhNodePool()
    pool3 = TanhSinhNodePool()

    assert pool1 is pool2
    assert pool2 is pool3
    assert id(pool1) == id(pool2) == id(pool3)

    assert pool1._levels is pool2._levels
    assert pool1._levels_lock is pool2._levels_lock
    assert pool1.t_max == pool2.t_max


def test_node_pool_thread_safety():
    """Test TanhSinhNodePool singleton behavior under concurrent access"""
    results = []
    tables = []
    lock = threading.Lock()

    def create_pool():
        pool = TanhSinhNodePool()
        table = pool.get_level(5)
        with lock:
            results.append(id(pool))
            tables.append(id(table))

    threads = [threading.Thread(target=create_pool) for _ in range(10)]

    for thread in threads:
        thread.start()

    for thread in threads:
        thread.join()

    assert len(set(results)) == 1, f"Got different instances: {set(results)}"
    assert len(set(tables)) == 1, "Level 5 was built more than once"
    assert len(results) == 10


@pytest.mark.asyncio
async def test_node_pool_async_singleton():
    """Test TanhSinhNodePool singleton in async context"""

    async def create_pool():
        return await asyncio.to_thread(TanhSinhNodePool)

    tasks = [create_pool() for _ in range(8)]
    pools = await asyncio.gather(*tasks)

    assert all(pool is pools[0] for pool in pools)
    assert len(set(id(pool) for pool in pools)) == 1


def test_node_levels_integrate_unit_interval():
    """Test that summed levels integrate x^2 on [0, 1] to 1/3"""
    pool = TanhSinhNodePool()
    level = 6
    h = 2.0**-level
    total = sum(np.sum(table.w * table.x**2) for table in pool.levels_up_to(level))

    assert abs(h * total - 1 / 3) < 1e-12


def test_node_levels_are_interior():
    """Test that nodes lie strictly inside the unit interval at every level"""
    pool = TanhSinhNodePool()
    for table in pool.levels_up_to(8):
        assert np.all(table.x > 0)
        assert np.all(table.x < 1)
        assert table.x.size == table.w.size == table.complement.size


def test_node_complement_resolves_upper_endpoint():
    """Test that the complement stays positive where x rounds next to 1"""
    table = TanhSinhNodePool().get_level(3)
    outer = table.x > 0.5

    assert np.all(table.complement > 0)
    assert np.min(table.complement[outer]) < 1e-16
    assert np.allclose(table.x[outer] + table.complement[outer], 1.0, rtol=0, atol=1e-15)
    assert np.all(table.w > 0)


def test_node_pool_rejects_bad_level():
    """Test that levels outside the cached range are rejected"""
    with pytest.raises(ValueError):
        TanhSinhNodePool().get_level(-1)
