"""
Domain port for grayscale image data used to cut signal patches.
"""
from abc import ABC, abstractmethod

import numpy as np


class ImageSourcePort(ABC):
    """Port for grayscale images"""

    @abstractmethod
    def load(self) -> np.ndarray:
        """
        Load the image as a 2D float array with values in [0, 255].

        Raises:
            FileSystemException: When the image cannot be read
            ValidationException: When the data is not an 8-bit grayscale image
        """
        pass

    @property
    @abstractmethod
    def name(self) -> str:
        """Identifier recorded in signal provenance."""
        pass
