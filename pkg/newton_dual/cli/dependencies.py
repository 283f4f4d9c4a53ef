from functools import lru_cache

from newton_dual.node_pool.tanh_sinh_pool import TanhSinhNodePool
from newton_dual.services.jobs import Dualize, Heun, Orbit, Phase, Spectrum, Verify


@lru_cache()
def get_node_pool() -> TanhSinhNodePool:
    """Get tanh-sinh node pool"""
    return TanhSinhNodePool()


@lru_cache()
def get_dualize_service() -> Dualize:
    """Get Dualize service"""
    return Dualize(get_node_pool())


@lru_cache()
def get_spectrum_service() -> Spectrum:
    """Get Spectrum service"""
    return Spectrum(get_node_pool())


@lru_cache()
def get_verify_service() -> Verify:
    """Get Verify service"""
    return Verify(get_node_pool())


@lru_cache()
def get_orbit_service() -> Orbit:
    """Get Orbit service"""
    return Orbit(get_node_pool())


@lru_cache()
def get_heun_service() -> Heun:
    """Get Heun service"""
    return Heun(get_node_pool())


@lru_cache()
def get_phase_service() -> Phase:
    """Get Phase service"""
    return Phase(get_node_pool())
