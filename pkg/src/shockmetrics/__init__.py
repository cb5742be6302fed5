"""Time-to-compromise and steady-state metrics for networks under push and pull attacks."""
