import time
import logging
from functools import wraps

# Dedicated logger so experiment timings can be filtered from solver diagnostics
timing_logger = logging.getLogger("timing")


def _qualified_name(func) -> str:
    class_name = ""
    if hasattr(func, '__qualname__'):
        qualname_parts = func.__qualname__.split('.')
        if len(qualname_parts) > 1:
            class_name = qualname_parts[-2] + "."
    return f"{class_name}{func.__name__}"


def timed(func):
    """
    Log the wall time of the decorated call to the 'timing' logger.
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            total_time = time.perf_counter() - start_time
            timing_logger.info(f"{_qualified_name(func)} took {total_time:.4f} seconds to execute.")
    return wrapper
