"""Regularized sandpile solver: semismooth Newton, path-following and source control."""

from sandpile.runconfig import FORMAT_VERSION

__version__ = "0.1.0"

__all__ = ["FORMAT_VERSION", "__version__"]
