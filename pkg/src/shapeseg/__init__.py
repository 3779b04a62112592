"""Shape-prior level-set segmentation: PCA priors over signed distance
functions, a four-term variational energy, and projected gradient descent."""

from .cli import __version__

__all__ = ["__version__"]
