"""Command modules for CSI Vitals CLI."""
