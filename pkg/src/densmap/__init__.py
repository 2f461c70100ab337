"""densmap: real-space laboratory for the time-dependent density-potential map."""

__version__ = "0.1.0"
