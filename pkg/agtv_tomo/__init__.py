"""agtv-tomo: adaptive graph total variation tomographic reconstruction"""

__version__ = "0.1.0"
__all__ = ["__version__"]
