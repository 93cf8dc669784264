"""PCO Sync - pulse-coupled oscillator synchronization to a global cue."""

__version__ = "0.1.0"
