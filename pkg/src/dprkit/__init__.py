"""Tools for managing variable-size modules on partially reconfigurable FPGA regions."""

from .errors import DprError

__version__ = "0.1.0"

__all__ = ["DprError", "__version__"]
