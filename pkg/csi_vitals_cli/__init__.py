"""CSI Vitals CLI - breathing and heart rate sensing from Wi-Fi channel state information."""

__version__ = "0.1.0"
