# bnbar/__init__.py
__all__ = ["helpers", "engine", "estimation"]
