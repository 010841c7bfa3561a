import functools
import logging
import time

from django.conf import settings
from django.core.cache import cache

from .cache_signals import ground_state_solved
from .ground_state import GroundState, solve_ground_state
from .linearized import ProfileSet, build_profile_chain
from .spectral import Grid1D

logger = logging.getLogger(__name__)


def get_cache_key(prefix, identifier=None):
    """Generate consistent cache keys"""
    if identifier:
        return f"{prefix}_{identifier}"
    return prefix


def cache_performance(cache_name):
    """Decorator to log how long a cached computation took"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.time()
            result = func(*args, **kwargs)
            end_time = time.time()

            logger.info(f"{cache_name}: {end_time - start_time:.4f}s")
            return result
        return wrapper
    return decorator


def ground_state_identifier(grid: Grid1D, power: int, tol: float) -> str:
    return f"p{power}_n{grid.n_points}_L{grid.length:g}_tol{tol:g}"


def profile_index_key(gs_key: str) -> str:
    return get_cache_key('profile_keys', gs_key)


@cache_performance("ground_state_cache")
def cached_ground_state(grid: Grid1D, power: int = 3, tol=None, refresh: bool = False) -> GroundState:
    """Ground state for (grid, power, tol), solved once per cache lifetime."""
    tol = tol if tol is not None else settings.HALFWAVE['GROUND_STATE_TOL']
    cache_key = get_cache_key('ground_state', ground_state_identifier(grid, power, tol))

    if not refresh:
        cached = cache.get(cache_key)
        if cached is not None:
            logger.info(f"Cache HIT for {cache_key}")
            return cached

    logger.info(f"Cache MISS for {cache_key}")
    gs = solve_ground_state(grid, power=power, tol=tol,
                            max_iter=settings.HALFWAVE['GROUND_STATE_MAX_ITER'])
    cache.set(cache_key, gs, timeout=settings.CACHE_TTL)
    ground_state_solved.send(sender=GroundState, cache_key=cache_key,
                             index_key=profile_index_key(cache_key))
    return gs


@cache_performance("profile_chain_cache")
def cached_profile_chain(gs: GroundState, tol=None, compatibility_tol=None) -> ProfileSet:
    tol = tol if tol is not None else settings.HALFWAVE['PROFILE_TOL']
    compatibility_tol = (compatibility_tol if compatibility_tol is not None
                         else settings.HALFWAVE['COMPATIBILITY_TOL'])
    gs_key = get_cache_key('ground_state', ground_state_identifier(
        gs.grid, gs.nonlinearity_power, gs.tolerance))
    cache_key = get_cache_key('profiles', f"{gs_key}_tol{tol:g}_ctol{compatibility_tol:g}")

    cached = cache.get(cache_key)
    if cached is not None:
        logger.info(f"Cache HIT for {cache_key}")
        return cached

    logger.info(f"Cache MISS for {cache_key}")
    profiles = build_profile_chain(gs, tol=tol, compatibility_tol=compatibility_tol)
    cache.set(cache_key, profiles, timeout=settings.CACHE_TTL)

    index_key = profile_index_key(gs_key)
    keys = cache.get(index_key) or []
    if cache_key not in keys:
        cache.set(index_key, keys + [cache_key], timeout=settings.CACHE_TTL)
    return profiles
