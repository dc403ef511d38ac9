from .outputManager import OutputManager, write_fields

__all__ = ["OutputManager", "write_fields"]
