"""Two-cell OFDM downlink simulator: joint ML co-channel interference
cancellation with one-bit closed-loop power control."""

__version__ = "0.1.0"
