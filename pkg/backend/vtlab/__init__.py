"""vtlab: learned marketplace simulators, platform-policy training and their verification."""

__version__ = "0.1.0"
