"""Learning constant orders for lost-sales inventory with lead times and random supply."""

__version__ = "0.1.0"
