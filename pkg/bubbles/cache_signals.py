from django.core.cache import cache
from django.dispatch import Signal, receiver
import logging

logger = logging.getLogger(__name__)

# Sent after a ground state is (re-)solved and stored; carries its cache_key
# and the key of the index listing the profile chains derived from it.
ground_state_solved = Signal()


@receiver(ground_state_solved)
def invalidate_profile_chains(sender, cache_key, index_key, **kwargs):
    """Drop profile chains derived from a ground state that was just re-solved"""
    keys = cache.get(index_key) or []

    # Clear every chain built on the old solution
    for key in keys:
        cache.delete(key)

    # Clear the index itself
    cache.delete(index_key)

    if keys:
        logger.info(f"Invalidated {len(keys)} profile chain(s) for {cache_key} after solve")
