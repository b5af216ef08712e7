"""Mean-field simulator and analysis toolkit for self-stimulated spin echoes."""

__version__ = "0.1.0"
