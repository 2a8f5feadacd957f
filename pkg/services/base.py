"""Base service class for microcell studies."""

import asyncio
import cython
import logging
import os
from asyncio import sleep
from functools import wraps
from typing import Dict, List

import aiofiles
import pandas as pd

from config import MAX_RETRIES, INITIAL_RETRY_DELAY, CSV_FLOAT_FORMAT

logger = logging.getLogger('MicroCell.BaseService')


def retry_with_backoff(max_retries: int = MAX_RETRIES, initial_delay: float = INITIAL_RETRY_DELAY):
    """Decorator for retrying coroutines with exponential backoff on OSError."""
    def decorator(func):
        @wraps(func)
        async def wrapper(*args, **kwargs):
            delay = initial_delay
            for retry in range(max_retries):
                try:
                    return await func(*args, **kwargs)
                except OSError as e:
                    if retry == max_retries - 1:
                        raise
                    logger.warning(f"Retrying {func.__name__} after error: {str(e)}")
                    await sleep(delay)
                    delay *= 2
        return wrapper
    return decorator


def render_table(table: pd.DataFrame) -> str:
    """CSV text of a result table, formatted for byte-stable reruns."""
    return table.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


@cython.cclass
class BaseService:
    """Base service class: collects study outputs and writes them out."""

    _outputs: Dict[str, str]

    def __init__(self):
        """Initialize the base service."""
        self._outputs = {}

    @property
    def outputs(self) -> Dict[str, str]:
        """Pending outputs, file name -> text."""
        return dict(self._outputs)

    def cleanup(self):
        """Drop pending outputs."""
        self._outputs.clear()

    def export(self, name: str, content) -> None:
        """Queue an output produced outside the service."""
        self._export(name, content)

    def _export(self, name: str, content) -> None:
        """Queue a table or text for writing."""
        if isinstance(content, pd.DataFrame):
            content = render_table(content)
        self._outputs[name] = content

    @retry_with_backoff()
    async def _write_to_file_async(self, filepath: str, content: str) -> None:
        """Write content to a file asynchronously, retrying transient errors."""
        try:
            async with aiofiles.open(filepath, 'w', newline='') as f:
                await f.write(content)
        except OSError as e:
            logger.error(f"Failed to write to {filepath}: {str(e)}")
            raise

    async def flush_async(self, output_dir: str) -> List[str]:
        """Write pending outputs one after another; returns the paths written."""
        os.makedirs(output_dir, exist_ok=True)
        written = []
        for name in sorted(self._outputs):
            path = os.path.join(output_dir, name)
            await self._write_to_file_async(path, self._outputs[name])
            written.append(path)
            logger.debug(f"Wrote {path}")
        self._outputs.clear()
        return written

    def flush(self, output_dir: str) -> List[str]:
        """Synchronous wrapper around flush_async."""
        return asyncio.run(self.flush_async(output_dir))
